//! Core data model: k-partite k-uniform hypergraphs with one partition class
//! per edge slot.
//!
//! A graph has `k` classes holding `n` local slots each. Edges are legal
//! k-tuples (one vertex per class) stored densely as one bit per tuple, so
//! membership tests are O(1) and degree queries are strided scans. Vertex
//! removal keeps the index space intact and instead clears per-class alive
//! masks, which lets the matching pipelines peel off small sets repeatedly
//! without reindexing.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitVec;

/// A vertex, addressed by its partition class and its local slot within it.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Vertex {
    pub class: usize,
    pub local: usize,
}

impl Vertex {
    pub fn new(class: usize, local: usize) -> Self {
        Vertex { class, local }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.class, self.local)
    }
}

/// An edge as one local index per class, in class order.
pub type Edge = Vec<usize>;

/// A set of vertices, at most one per class.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LegalSet {
    slots: Vec<Option<usize>>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum HypergraphError {
    #[error("invalid legal set: {0}")]
    InvalidLegalSet(String),
    #[error("vertex ({class},{local}) out of range or removed")]
    VertexOutOfRange { class: usize, local: usize },
    #[error("edge {0:?} is not a legal tuple for this graph")]
    IllegalEdge(Edge),
    #[error("bad parameters: {0}")]
    BadParameters(String),
}

impl LegalSet {
    /// The empty set over `k` classes.
    pub fn empty(k: usize) -> Self {
        LegalSet {
            slots: vec![None; k],
        }
    }

    pub fn from_vertices(k: usize, vertices: &[Vertex]) -> Result<Self, HypergraphError> {
        let mut set = LegalSet::empty(k);
        for &v in vertices {
            set.insert(v)?;
        }
        Ok(set)
    }

    /// A full legal k-set from an edge tuple.
    pub fn from_edge(edge: &[usize]) -> Self {
        LegalSet {
            slots: edge.iter().map(|&l| Some(l)).collect(),
        }
    }

    pub fn insert(&mut self, v: Vertex) -> Result<(), HypergraphError> {
        if v.class >= self.slots.len() {
            return Err(HypergraphError::InvalidLegalSet(format!(
                "class {} out of range",
                v.class
            )));
        }
        match self.slots[v.class] {
            Some(old) if old != v.local => Err(HypergraphError::InvalidLegalSet(format!(
                "two vertices in class {}",
                v.class
            ))),
            _ => {
                self.slots[v.class] = Some(v.local);
                Ok(())
            }
        }
    }

    pub fn k(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn local_in_class(&self, class: usize) -> Option<usize> {
        self.slots.get(class).copied().flatten()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(c, s)| s.map(|l| Vertex::new(c, l)))
    }
}

/// A set of pairwise-disjoint edges.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Matching {
    edges: Vec<Edge>,
}

impl Matching {
    pub fn new() -> Self {
        Matching { edges: Vec::new() }
    }

    pub fn from_edges(edges: Vec<Edge>) -> Self {
        Matching { edges }
    }

    pub fn push(&mut self, edge: Edge) {
        self.edges.push(edge);
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn into_edges(self) -> Vec<Edge> {
        self.edges
    }

    /// All vertices covered by the matching.
    pub fn covered(&self) -> BTreeSet<Vertex> {
        let mut out = BTreeSet::new();
        for e in &self.edges {
            for (c, &l) in e.iter().enumerate() {
                out.insert(Vertex::new(c, l));
            }
        }
        out
    }

    pub fn covers(&self, v: Vertex) -> bool {
        self.edges.iter().any(|e| e[v.class] == v.local)
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            for (c, &l) in e.iter().enumerate() {
                if !seen.insert(Vertex::new(c, l)) {
                    return false;
                }
            }
        }
        true
    }

    /// Concatenate several matchings into one edge list.
    pub fn union<'a>(parts: impl IntoIterator<Item = &'a Matching>) -> Matching {
        let mut out = Matching::new();
        for m in parts {
            out.edges.extend(m.edges.iter().cloned());
        }
        out
    }
}

/// A k-partite k-graph with dense edge storage.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PartiteHypergraph {
    k: usize,
    n: usize,
    /// Per-class alive masks; removal clears bits instead of reindexing.
    alive: Vec<BitVec>,
    /// One bit per legal tuple, row-major by class (class 0 most significant).
    edges: BitVec,
    edge_count: usize,
    /// strides[c] = n^(k-1-c), so tuple index = sum locals[c] * strides[c].
    strides: Vec<usize>,
}

impl PartiteHypergraph {
    /// An empty graph with `k` classes of `n` vertices. Requires `k >= 2`,
    /// `n >= 1`, and `n^k` to fit in memory.
    pub fn new(k: usize, n: usize) -> Result<Self, HypergraphError> {
        if k < 2 {
            return Err(HypergraphError::BadParameters(format!("k = {k} < 2")));
        }
        if n < 1 {
            return Err(HypergraphError::BadParameters("n = 0".into()));
        }
        let mut tuples = 1usize;
        for _ in 0..k {
            tuples = tuples.checked_mul(n).ok_or_else(|| {
                HypergraphError::BadParameters(format!("n^k overflows for n={n}, k={k}"))
            })?;
        }
        let mut strides = vec![1usize; k];
        for c in (0..k - 1).rev() {
            strides[c] = strides[c + 1] * n;
        }
        Ok(PartiteHypergraph {
            k,
            n,
            alive: vec![BitVec::ones(n); k],
            edges: BitVec::zeros(tuples),
            edge_count: 0,
            strides,
        })
    }

    /// The complete graph: every legal tuple is an edge.
    pub fn complete(k: usize, n: usize) -> Result<Self, HypergraphError> {
        let mut h = Self::new(k, n)?;
        for idx in 0..h.edges.len() {
            h.edges.set(idx, true);
        }
        h.edge_count = h.edges.len();
        Ok(h)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The local index bound (class capacity). Classes may hold fewer alive
    /// vertices after removals.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_alive(&self, v: Vertex) -> bool {
        v.class < self.k && v.local < self.n && self.alive[v.class].get(v.local)
    }

    pub fn class_size(&self, class: usize) -> usize {
        self.alive[class].count_ones()
    }

    /// Alive locals of one class, ascending.
    pub fn class_locals(&self, class: usize) -> impl Iterator<Item = usize> + '_ {
        self.alive[class].iter_ones()
    }

    /// All alive vertices, ascending by (class, local).
    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.k).flat_map(move |c| self.class_locals(c).map(move |l| Vertex::new(c, l)))
    }

    pub fn vertex_count(&self) -> usize {
        (0..self.k).map(|c| self.class_size(c)).sum()
    }

    /// Class sizes are equal, returning the common size.
    pub fn equal_class_sizes(&self) -> Option<usize> {
        let s = self.class_size(0);
        (1..self.k).all(|c| self.class_size(c) == s).then_some(s)
    }

    #[inline]
    pub fn tuple_index(&self, edge: &[usize]) -> usize {
        debug_assert_eq!(edge.len(), self.k);
        edge.iter().zip(&self.strides).map(|(&l, &s)| l * s).sum()
    }

    pub fn tuple_from_index(&self, mut idx: usize) -> Edge {
        let mut t = vec![0; self.k];
        for (slot, &stride) in t.iter_mut().zip(&self.strides) {
            *slot = idx / stride;
            idx %= stride;
        }
        t
    }

    fn check_tuple(&self, edge: &[usize]) -> Result<(), HypergraphError> {
        if edge.len() != self.k {
            return Err(HypergraphError::IllegalEdge(edge.to_vec()));
        }
        for (c, &l) in edge.iter().enumerate() {
            if l >= self.n || !self.alive[c].get(l) {
                return Err(HypergraphError::VertexOutOfRange { class: c, local: l });
            }
        }
        Ok(())
    }

    /// Insert an edge; returns whether it was newly added.
    pub fn add_edge(&mut self, edge: &[usize]) -> Result<bool, HypergraphError> {
        self.check_tuple(edge)?;
        let idx = self.tuple_index(edge);
        if self.edges.get(idx) {
            return Ok(false);
        }
        self.edges.set(idx, true);
        self.edge_count += 1;
        Ok(true)
    }

    /// Delete an edge; returns whether it was present.
    pub fn remove_edge(&mut self, edge: &[usize]) -> Result<bool, HypergraphError> {
        self.check_tuple(edge)?;
        let idx = self.tuple_index(edge);
        if !self.edges.get(idx) {
            return Ok(false);
        }
        self.edges.set(idx, false);
        self.edge_count -= 1;
        Ok(true)
    }

    /// Toggle a tuple's membership by dense index. Used by perturbation
    /// generators.
    pub fn toggle_tuple(&mut self, idx: usize) {
        let present = self.edges.get(idx);
        self.edges.set(idx, !present);
        if present {
            self.edge_count -= 1;
        } else {
            self.edge_count += 1;
        }
    }

    #[inline]
    pub fn has_edge(&self, edge: &[usize]) -> bool {
        debug_assert!(self.check_tuple(edge).is_ok());
        self.edges.get(self.tuple_index(edge))
    }

    #[inline]
    pub fn has_tuple_index(&self, idx: usize) -> bool {
        self.edges.get(idx)
    }

    pub fn tuple_space(&self) -> usize {
        self.edges.len()
    }

    /// All edges, ascending by tuple index.
    pub fn edge_list(&self) -> Vec<Edge> {
        self.edges
            .iter_ones()
            .map(|idx| self.tuple_from_index(idx))
            .collect()
    }

    /// Number of edges containing every vertex of the legal set `S`.
    ///
    /// `S` must be nonempty, contain only alive vertices, and have size at
    /// most `k`; completions range over alive vertices of the free classes.
    pub fn degree(&self, s: &LegalSet) -> Result<usize, HypergraphError> {
        if s.k() != self.k {
            return Err(HypergraphError::InvalidLegalSet(format!(
                "legal set over {} classes, graph has {}",
                s.k(),
                self.k
            )));
        }
        if s.is_empty() {
            return Err(HypergraphError::InvalidLegalSet("empty set".into()));
        }
        for v in s.vertices() {
            if !self.is_alive(v) {
                return Err(HypergraphError::VertexOutOfRange {
                    class: v.class,
                    local: v.local,
                });
            }
        }
        let free: Vec<usize> = (0..self.k)
            .filter(|&c| s.local_in_class(c).is_none())
            .collect();
        let base: usize = (0..self.k)
            .filter_map(|c| s.local_in_class(c).map(|l| l * self.strides[c]))
            .sum();
        Ok(self.count_completions(base, &free))
    }

    fn count_completions(&self, base: usize, free: &[usize]) -> usize {
        match free.split_first() {
            None => usize::from(self.edges.get(base)),
            Some((&c, rest)) => self
                .class_locals(c)
                .map(|l| self.count_completions(base + l * self.strides[c], rest))
                .sum(),
        }
    }

    pub fn vertex_degree(&self, v: Vertex) -> usize {
        let s = LegalSet::from_vertices(self.k, &[v]).expect("single vertex is legal");
        self.degree(&s).expect("alive vertex")
    }

    /// Minimum degree over all legal (k-1)-sets of alive vertices.
    pub fn min_codegree(&self) -> usize {
        let mut best = usize::MAX;
        let mut tuple = vec![0usize; self.k];
        for free_class in 0..self.k {
            let classes: Vec<usize> = (0..self.k).filter(|&c| c != free_class).collect();
            if classes.iter().any(|&c| self.class_size(c) == 0) {
                continue;
            }
            self.for_each_assignment(&classes, &mut tuple, 0, &mut |t| {
                let base: usize = classes.iter().map(|&c| t[c] * self.strides[c]).sum();
                let d = self.count_completions(base, &[free_class]);
                if d < best {
                    best = d;
                }
            });
        }
        if best == usize::MAX {
            0
        } else {
            best
        }
    }

    fn for_each_assignment(
        &self,
        classes: &[usize],
        tuple: &mut Vec<usize>,
        depth: usize,
        f: &mut impl FnMut(&[usize]),
    ) {
        if depth == classes.len() {
            f(tuple);
            return;
        }
        let c = classes[depth];
        let locals: Vec<usize> = self.class_locals(c).collect();
        for l in locals {
            tuple[c] = l;
            self.for_each_assignment(classes, tuple, depth + 1, f);
        }
    }

    /// Number of edges containing `v` whose intersection with `marked` has
    /// parity `parity` (0 = even, 1 = odd).
    pub fn parity_degree(&self, v: Vertex, marked: &BTreeSet<Vertex>, parity: u8) -> usize {
        assert!(self.is_alive(v), "parity_degree of a removed vertex {v}");
        let mask: Vec<BitVec> = self.class_masks(marked);
        let mut count = 0;
        self.for_each_edge_through(v, &mut |t| {
            let hits = t
                .iter()
                .enumerate()
                .filter(|&(c, &l)| mask[c].get(l))
                .count();
            if hits % 2 == parity as usize {
                count += 1;
            }
        });
        count
    }

    pub(crate) fn class_masks(&self, verts: &BTreeSet<Vertex>) -> Vec<BitVec> {
        let mut mask = vec![BitVec::zeros(self.n); self.k];
        for v in verts {
            if v.class < self.k && v.local < self.n {
                mask[v.class].set(v.local, true);
            }
        }
        mask
    }

    /// Visit every edge containing `v`, in tuple-index order.
    pub fn for_each_edge_through(&self, v: Vertex, f: &mut impl FnMut(&[usize])) {
        let free: Vec<usize> = (0..self.k).filter(|&c| c != v.class).collect();
        let mut tuple = vec![0usize; self.k];
        tuple[v.class] = v.local;
        let base = v.local * self.strides[v.class];
        self.walk_edges(base, &free, 0, &mut tuple, f);
    }

    fn walk_edges(
        &self,
        base: usize,
        free: &[usize],
        depth: usize,
        tuple: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if depth == free.len() {
            if self.edges.get(base) {
                f(tuple);
            }
            return;
        }
        let c = free[depth];
        let locals: Vec<usize> = self.class_locals(c).collect();
        for l in locals {
            tuple[c] = l;
            self.walk_edges(base + l * self.strides[c], free, depth + 1, tuple, f);
        }
    }

    /// The subgraph obtained by deleting the vertices of `t` (and every edge
    /// touching them). Dead slots stay addressable but are excluded from all
    /// queries.
    pub fn remove_vertices(&self, t: &BTreeSet<Vertex>) -> PartiteHypergraph {
        let mut out = self.clone();
        let mask = self.class_masks(t);
        for v in t {
            if out.is_alive(*v) {
                out.alive[v.class].set(v.local, false);
            }
        }
        // Drop every edge meeting a removed vertex.
        let dead: Vec<usize> = out
            .edges
            .iter_ones()
            .filter(|&idx| {
                let t = out.tuple_from_index(idx);
                t.iter().enumerate().any(|(c, &l)| mask[c].get(l))
            })
            .collect();
        for idx in dead {
            out.edges.set(idx, false);
            out.edge_count -= 1;
        }
        out
    }

    /// Lexicographically least edge whose class-`c` vertex lies in
    /// `allowed[c]` for every class, if any.
    pub fn first_edge_in(&self, allowed: &[BTreeSet<usize>]) -> Option<Edge> {
        self.first_edge_in_where(allowed, |_| true)
    }

    /// Like [`Self::first_edge_in`] but also filtered by a tuple predicate.
    pub fn first_edge_in_where(
        &self,
        allowed: &[BTreeSet<usize>],
        pred: impl Fn(&[usize]) -> bool,
    ) -> Option<Edge> {
        assert_eq!(allowed.len(), self.k);
        let mut tuple = vec![0usize; self.k];
        self.first_edge_rec(allowed, &pred, 0, 0, &mut tuple)
            .then(|| tuple.clone())
    }

    fn first_edge_rec(
        &self,
        allowed: &[BTreeSet<usize>],
        pred: &impl Fn(&[usize]) -> bool,
        depth: usize,
        base: usize,
        tuple: &mut Vec<usize>,
    ) -> bool {
        if depth == self.k {
            return self.edges.get(base) && pred(tuple);
        }
        for &l in &allowed[depth] {
            if !self.alive[depth].get(l) {
                continue;
            }
            tuple[depth] = l;
            if self.first_edge_rec(
                allowed,
                pred,
                depth + 1,
                base + l * self.strides[depth],
                tuple,
            ) {
                return true;
            }
        }
        false
    }

    /// Count edges inside the per-class vertex pools `allowed`.
    pub fn count_edges_in(&self, allowed: &[BTreeSet<usize>]) -> usize {
        let mut count = 0;
        self.for_each_edge_in(allowed, &mut |_| count += 1);
        count
    }

    /// Visit every edge inside the per-class pools, lexicographically.
    pub fn for_each_edge_in(&self, allowed: &[BTreeSet<usize>], f: &mut impl FnMut(&[usize])) {
        assert_eq!(allowed.len(), self.k);
        let mut tuple = vec![0usize; self.k];
        self.edges_in_rec(allowed, 0, 0, &mut tuple, f);
    }

    fn edges_in_rec(
        &self,
        allowed: &[BTreeSet<usize>],
        depth: usize,
        base: usize,
        tuple: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if depth == self.k {
            if self.edges.get(base) {
                f(tuple);
            }
            return;
        }
        for &l in &allowed[depth] {
            if !self.alive[depth].get(l) {
                continue;
            }
            tuple[depth] = l;
            self.edges_in_rec(allowed, depth + 1, base + l * self.strides[depth], tuple, f);
        }
    }

    /// Extract the subgraph induced by `pool[c]` in each class, relabelling
    /// locals to 0..pool[c].len(). Returns the graph and the per-class
    /// original locals (position = new local).
    pub fn induced(&self, pool: &[Vec<usize>]) -> (PartiteHypergraph, Vec<Vec<usize>>) {
        assert_eq!(pool.len(), self.k);
        let m = pool.iter().map(|p| p.len()).max().unwrap_or(1).max(1);
        let mut sub = PartiteHypergraph::new(self.k, m).expect("valid induced dims");
        // Kill padding slots so class sizes match the pools.
        let padding: BTreeSet<Vertex> = (0..self.k)
            .flat_map(|c| (pool[c].len()..m).map(move |l| Vertex::new(c, l)))
            .collect();
        sub = sub.remove_vertices(&padding);
        let allowed: Vec<BTreeSet<usize>> =
            pool.iter().map(|p| p.iter().copied().collect()).collect();
        let place: Vec<std::collections::BTreeMap<usize, usize>> = pool
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &l)| (l, i)).collect())
            .collect();
        self.for_each_edge_in(&allowed, &mut |t| {
            let mapped: Edge = t.iter().enumerate().map(|(c, &l)| place[c][&l]).collect();
            sub.add_edge(&mapped).expect("induced edge is legal");
        });
        (sub, pool.to_vec())
    }
}

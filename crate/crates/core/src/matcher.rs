//! Exhaustive perfect- and maximum-matching search.
//!
//! This is the ground truth the other modules are checked against, so the
//! search is complete: no heuristic may change a verdict, only the order in
//! which the tree is explored. Branching always assigns the next class-0
//! vertex (fail-first: the one with the fewest live edges), which makes a
//! matching an exact cover of class 0.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::hypergraph::{Edge, Matching, PartiteHypergraph, Vertex};

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub timeout: Duration,
    /// Cache infeasible free-vertex sets. Off by default: the state space is
    /// 2^(k n) and memory stays predictable without it.
    pub use_memo: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            timeout: Duration::from_secs(60),
            use_memo: false,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub max_depth: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "value")]
pub enum SearchStatus<T> {
    Complete(T),
    Timeout,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchResult<T> {
    pub status: SearchStatus<T>,
    pub stats: SearchStats,
}

impl<T> SearchResult<T> {
    /// The completed value; None on timeout.
    pub fn completed(self) -> Option<T> {
        match self.status {
            SearchStatus::Complete(v) => Some(v),
            SearchStatus::Timeout => None,
        }
    }

    pub fn timed_out(&self) -> bool {
        matches!(self.status, SearchStatus::Timeout)
    }
}

/// True iff every edge of `m` is an edge of `h`, the edges are pairwise
/// disjoint, and (when `require_perfect`) they cover every alive vertex.
pub fn verify_matching(h: &PartiteHypergraph, m: &Matching, require_perfect: bool) -> bool {
    for e in m.edges() {
        if e.len() != h.k() {
            return false;
        }
        if e.iter()
            .enumerate()
            .any(|(c, &l)| !h.is_alive(Vertex::new(c, l)))
        {
            return false;
        }
        if !h.has_edge(e) {
            return false;
        }
    }
    if !m.is_disjoint() {
        return false;
    }
    if require_perfect {
        let covered = m.covered();
        if h.vertices().any(|v| !covered.contains(&v)) {
            return false;
        }
    }
    true
}

struct Searcher<'a> {
    h: &'a PartiteHypergraph,
    k: usize,
    words_per_class: usize,
    strides: Vec<usize>,
    /// Free-vertex masks, `words_per_class` words per class.
    free: Vec<u64>,
    deadline: Instant,
    started: Instant,
    nodes: u64,
    max_depth: usize,
    /// States proven to admit no perfect matching.
    nogood: Option<HashSet<Vec<u64>>>,
    timed_out: bool,
}

impl<'a> Searcher<'a> {
    fn new(h: &'a PartiteHypergraph, cfg: &SolverConfig) -> Self {
        let words_per_class = h.n().div_ceil(64);
        let mut free = vec![0u64; h.k() * words_per_class];
        for c in 0..h.k() {
            for l in h.class_locals(c) {
                free[c * words_per_class + l / 64] |= 1 << (l % 64);
            }
        }
        let strides = (0..h.k())
            .map(|c| h.n().pow((h.k() - 1 - c) as u32))
            .collect();
        let now = Instant::now();
        Searcher {
            h,
            k: h.k(),
            words_per_class,
            strides,
            free,
            deadline: now + cfg.timeout,
            started: now,
            nodes: 0,
            max_depth: 0,
            nogood: cfg.use_memo.then(HashSet::new),
            timed_out: false,
        }
    }

    fn stats(&self) -> SearchStats {
        SearchStats {
            nodes_expanded: self.nodes,
            max_depth: self.max_depth,
            elapsed: self.started.elapsed(),
        }
    }

    #[inline]
    fn is_free(&self, class: usize, local: usize) -> bool {
        self.free[class * self.words_per_class + local / 64] >> (local % 64) & 1 == 1
    }

    #[inline]
    fn set_free(&mut self, class: usize, local: usize, value: bool) {
        let w = class * self.words_per_class + local / 64;
        let mask = 1u64 << (local % 64);
        if value {
            self.free[w] |= mask;
        } else {
            self.free[w] &= !mask;
        }
    }

    fn free_locals(&self, class: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for w in 0..self.words_per_class {
            let mut word = self.free[class * self.words_per_class + w];
            while word != 0 {
                out.push(w * 64 + word.trailing_zeros() as usize);
                word &= word - 1;
            }
        }
        out
    }

    fn free_count(&self, class: usize) -> usize {
        (0..self.words_per_class)
            .map(|w| self.free[class * self.words_per_class + w].count_ones() as usize)
            .sum()
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes.is_multiple_of(256) && Instant::now() > self.deadline {
            self.timed_out = true;
        }
        self.timed_out
    }

    /// Edges through the free class-0 vertex `v0` with all vertices free,
    /// lexicographic.
    fn live_edges_through(&self, v0: usize) -> Vec<Edge> {
        let mut out = Vec::new();
        let mut tuple = vec![0usize; self.k];
        tuple[0] = v0;
        self.live_edges_rec(1, v0 * self.strides[0], &mut tuple, &mut out);
        out
    }

    fn live_edges_rec(
        &self,
        class: usize,
        base: usize,
        tuple: &mut Vec<usize>,
        out: &mut Vec<Edge>,
    ) {
        if class == self.k {
            if self.h.has_tuple_index(base) {
                out.push(tuple.clone());
            }
            return;
        }
        let s = self.strides[class];
        for l in self.free_locals(class) {
            tuple[class] = l;
            self.live_edges_rec(class + 1, base + l * s, tuple, out);
        }
    }

    fn count_live_edges_through(&self, v0: usize) -> usize {
        self.count_rec(1, v0 * self.strides[0])
    }

    fn count_rec(&self, class: usize, base: usize) -> usize {
        if class == self.k {
            return usize::from(self.h.has_tuple_index(base));
        }
        let s = self.strides[class];
        self.free_locals(class)
            .into_iter()
            .map(|l| self.count_rec(class + 1, base + l * s))
            .sum()
    }

    fn take_edge(&mut self, e: &[usize]) {
        for (c, &l) in e.iter().enumerate() {
            self.set_free(c, l, false);
        }
    }

    fn put_edge(&mut self, e: &[usize]) {
        for (c, &l) in e.iter().enumerate() {
            self.set_free(c, l, true);
        }
    }

    /// Complete search for a perfect matching on the free vertices.
    fn perfect(&mut self, depth: usize, chosen: &mut Vec<Edge>) -> bool {
        if self.tick() {
            return false;
        }
        self.max_depth = self.max_depth.max(depth);
        let class0 = self.free_locals(0);
        if class0.is_empty() {
            return true;
        }
        if let Some(nogood) = &self.nogood {
            if nogood.contains(&self.free) {
                return false;
            }
        }
        // Fail-first: branch on the class-0 vertex with fewest live edges.
        let mut branch = class0[0];
        let mut best = usize::MAX;
        for &v0 in &class0 {
            let c = self.count_live_edges_through(v0);
            if c == 0 {
                self.record_nogood();
                return false;
            }
            if c < best {
                best = c;
                branch = v0;
            }
        }
        for e in self.live_edges_through(branch) {
            self.take_edge(&e);
            let ok = self.perfect(depth + 1, chosen);
            if ok {
                chosen.push(e);
                return true;
            }
            self.put_edge(&e);
            if self.timed_out {
                return false;
            }
        }
        self.record_nogood();
        false
    }

    fn record_nogood(&mut self) {
        if self.timed_out {
            return;
        }
        if let Some(nogood) = &mut self.nogood {
            nogood.insert(self.free.clone());
        }
    }

    /// Branch and bound for a maximum matching. Class-0 vertices are decided
    /// in ascending order; each is either matched by one of its live edges or
    /// skipped for good.
    fn maximum(&mut self, pos: usize, current: &mut Vec<Edge>, best: &mut Vec<Edge>) {
        if self.tick() {
            return;
        }
        self.max_depth = self.max_depth.max(current.len());
        if current.len() > best.len() {
            *best = current.clone();
        }
        let class0: Vec<usize> = self
            .free_locals(0)
            .into_iter()
            .filter(|&l| l >= pos)
            .collect();
        // Any further edge consumes one free vertex in every class.
        let headroom = (1..self.k)
            .map(|c| self.free_count(c))
            .min()
            .unwrap_or(0)
            .min(class0.len());
        if current.len() + headroom <= best.len() {
            return;
        }
        let Some(&v0) = class0.first() else { return };
        for e in self.live_edges_through(v0) {
            self.take_edge(&e);
            current.push(e.clone());
            self.maximum(v0 + 1, current, best);
            current.pop();
            self.put_edge(&e);
            if self.timed_out {
                return;
            }
        }
        // Skip v0 permanently.
        self.set_free(0, v0, false);
        self.maximum(v0 + 1, current, best);
        self.set_free(0, v0, true);
    }
}

/// Search for a perfect matching. Complete when it returns within the
/// timeout: `Some` is a verified matching, `None` means none exists.
pub fn find_perfect_matching(
    h: &PartiteHypergraph,
    cfg: &SolverConfig,
) -> SearchResult<Option<Matching>> {
    if h.equal_class_sizes().is_none() {
        return SearchResult {
            status: SearchStatus::Complete(None),
            stats: SearchStats::default(),
        };
    }
    let mut s = Searcher::new(h, cfg);
    let mut chosen = Vec::new();
    let found = s.perfect(0, &mut chosen);
    let stats = s.stats();
    if s.timed_out {
        return SearchResult {
            status: SearchStatus::Timeout,
            stats,
        };
    }
    let status = if found {
        chosen.reverse();
        let m = Matching::from_edges(chosen);
        debug_assert!(verify_matching(h, &m, true));
        SearchStatus::Complete(Some(m))
    } else {
        SearchStatus::Complete(None)
    };
    SearchResult { status, stats }
}

/// Exact maximum matching via branch and bound (greedy lower bound,
/// class-size upper bound).
pub fn max_matching(h: &PartiteHypergraph, cfg: &SolverConfig) -> SearchResult<(usize, Matching)> {
    let mut s = Searcher::new(h, cfg);
    // Greedy incumbent to prune against.
    let mut best: Vec<Edge> = Vec::new();
    for e in h.edge_list() {
        if e.iter().enumerate().all(|(c, &l)| s.is_free(c, l)) {
            s.take_edge(&e);
            best.push(e);
        }
    }
    for e in &best {
        s.put_edge(e);
    }
    let mut current = Vec::new();
    s.maximum(0, &mut current, &mut best);
    let stats = s.stats();
    if s.timed_out {
        return SearchResult {
            status: SearchStatus::Timeout,
            stats,
        };
    }
    let m = Matching::from_edges(best);
    debug_assert!(verify_matching(h, &m, false));
    SearchResult {
        status: SearchStatus::Complete((m.len(), m)),
        stats,
    }
}

//! Staged constructive matcher for graphs close to the half-split template.
//!
//! The construction fixes a best template witness, repairs it by switching
//! misplaced vertices, evens out the marked side with one edge if needed,
//! covers the bad vertices with a small matching, balances the per-class
//! marked residuals through a complete-multipartite auxiliary matching,
//! enforces a divisibility condition, and finishes with typed matchings plus
//! local exchange rotations. Every stage posts its invariants into a trace;
//! at desk scale a run either produces a verified perfect matching or a
//! report naming the stage that failed and a concrete witness.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extremal::{closeness, ClosenessConfig, SearchMode};
use crate::hypergraph::{Edge, Matching, PartiteHypergraph, Vertex};
use crate::matcher::{find_perfect_matching, verify_matching, SolverConfig};
use crate::parity::ParityCertificate;

/// One vertex pool per class.
pub type ClassSets = Vec<BTreeSet<usize>>;

/// One rotation: matching-edge indices to drop and the edges replacing them.
type RotationPlan = (Vec<usize>, Vec<Edge>);

/// A vertex of the auxiliary 2-graph: (class, slot within the class).
pub type AuxVertex = (usize, usize);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Degree slack: the run requires min co-degree >= (1/2 - alpha) n.
    pub alpha: f64,
    /// Closeness budget; also sets the bad-vertex threshold sqrt(eps) n^(k-1).
    pub epsilon: f64,
    /// Typed-matching size fraction; None means 1/(9k).
    pub tau: Option<f64>,
    /// Reject class sizes below 100 k^2 instead of warning.
    pub strict_constants: bool,
    /// Budget for exchange-rotation subset enumeration.
    pub exchange_cap: u64,
    /// Seed for the closeness local search.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 0.125,
            epsilon: 0.01,
            tau: None,
            strict_constants: false,
            exchange_cap: 1_000_000,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn tau_for(&self, k: usize) -> f64 {
        self.tau.unwrap_or(1.0 / (9.0 * k as f64))
    }
}

/// One posted invariant with its outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageCheck {
    pub stage: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Error, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum StageError {
    #[error("precondition violated: {context}")]
    PreconditionViolated { context: String },
    #[error("greedy construction stuck: {context}")]
    GreedyStuck {
        context: String,
        vertex: Option<Vertex>,
    },
    #[error("no edge realizes the lift: {context}")]
    LiftFailed {
        context: String,
        marked_classes: Vec<usize>,
    },
    #[error("auxiliary multipartite matching infeasible for sizes {sizes:?}")]
    AuxiliaryInfeasible { sizes: Vec<usize> },
    #[error("exchange search exhausted: {context}")]
    ExchangeExhausted {
        context: String,
        leftovers: Vec<Vertex>,
        missing_samples: Vec<Edge>,
    },
}

#[derive(Error, Debug, Clone)]
pub enum PipelineError {
    #[error("classes have unequal sizes")]
    UnequalClasses,
    #[error("pipeline needs at least 3 classes, got {0}")]
    UnsupportedUniformity(usize),
    #[error("min co-degree {actual} below the (1/2 - alpha) n = {required:.2} floor")]
    DegreeTooLow { required: f64, actual: usize },
    #[error("strict mode: class size {got} below 100 k^2 = {need}")]
    ClassSizeTooSmall { need: usize, got: usize },
    #[error("instance carries a parity obstruction; no perfect matching exists")]
    Obstruction(ParityCertificate),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PipelineState {
    /// Template witness: marked half per class.
    pub witness_sets: Vec<Vec<usize>>,
    pub closeness_cost: usize,
    /// Vertices missing too many template edges.
    pub bad: Vec<Vertex>,
    /// Per-class sides after the repair switch.
    pub plain_side: Vec<Vec<usize>>,
    pub marked_side: Vec<Vec<usize>>,
    /// Edge restoring even parity of the marked side, when one is needed.
    pub parity_edge: Option<Edge>,
    /// Matching covering the bad vertices.
    pub bad_cover: Matching,
    /// Matching equalizing marked residuals across classes.
    pub balancer: Matching,
    /// Matching forcing residuals to a multiple of k-1 (odd k only).
    pub divisibility_fix: Matching,
    /// Typed matchings: index 0 interior, index 1+j pivoting in class j.
    pub type_matchings: Vec<Matching>,
    /// Residual pools after each consuming stage.
    pub residuals: Vec<ResidualStage>,
    pub checks: Vec<StageCheck>,
    pub warnings: Vec<String>,
}

/// Snapshot of the per-class residual pools at one point of the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualStage {
    pub after: String,
    pub plain: Vec<Vec<usize>>,
    pub marked: Vec<Vec<usize>>,
}

fn snapshot(after: &str, plain: &ClassSets, marked: &ClassSets) -> ResidualStage {
    ResidualStage {
        after: after.to_string(),
        plain: plain.iter().map(|s| s.iter().copied().collect()).collect(),
        marked: marked.iter().map(|s| s.iter().copied().collect()).collect(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub error: StageError,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub k: usize,
    pub n: usize,
    pub state: PipelineState,
    pub failure: Option<StageFailure>,
    pub matching: Option<Matching>,
}

impl PipelineReport {
    pub fn succeeded(&self) -> bool {
        self.matching.is_some()
    }
}

/// Template edges through `v` (even marked intersection) that `h` lacks.
pub fn missing_edge_count(h: &PartiteHypergraph, sets: &[Vec<usize>], v: Vertex) -> usize {
    let masks = mark_masks(h, sets);
    let mut missing = 0usize;
    for_each_tuple_through(h, v, &mut |tuple, idx| {
        let hits = tuple
            .iter()
            .enumerate()
            .filter(|&(c, &l)| masks[c][l])
            .count();
        if hits % 2 == 0 && !h.has_tuple_index(idx) {
            missing += 1;
        }
    });
    missing
}

/// Vertices contained in at least sqrt(eps) n^(k-1) template edges absent
/// from `h`, for the witness `sets`.
pub fn compute_bad_set(
    h: &PartiteHypergraph,
    sets: &[Vec<usize>],
    epsilon: f64,
) -> BTreeSet<Vertex> {
    let n = h.n() as f64;
    let threshold = epsilon.sqrt() * n.powi(h.k() as i32 - 1);
    h.vertices()
        .filter(|&v| (missing_edge_count(h, sets, v) as f64) >= threshold)
        .collect()
}

/// Repair the witness: bad vertices with few even-parity edges swap sides;
/// everything else stays. Returns (plain side, marked side) per class.
pub fn switch_classes(
    h: &PartiteHypergraph,
    sets: &[Vec<usize>],
    bad: &BTreeSet<Vertex>,
) -> (ClassSets, ClassSets) {
    let k = h.k();
    let marked_union: BTreeSet<Vertex> = sets
        .iter()
        .enumerate()
        .flat_map(|(c, s)| s.iter().map(move |&l| Vertex::new(c, l)))
        .collect();
    let threshold = (h.n() as f64).powi(k as i32 - 1) / 8.0;
    let mut plain: ClassSets = vec![BTreeSet::new(); k];
    let mut marked: ClassSets = vec![BTreeSet::new(); k];
    for v in h.vertices() {
        let in_marked = marked_union.contains(&v);
        let flips = bad.contains(&v) && (h.parity_degree(v, &marked_union, 0) as f64) < threshold;
        let lands_marked = in_marked != flips;
        if lands_marked {
            marked[v.class].insert(v.local);
        } else {
            plain[v.class].insert(v.local);
        }
    }
    (plain, marked)
}

/// When the marked side has odd total size, find an edge meeting it an odd
/// number of times (removing it makes the rest even). `Ok(None)` when the
/// side is already even; an obstruction certificate when no such edge exists.
pub fn find_parity_edge(
    h: &PartiteHypergraph,
    marked: &ClassSets,
) -> Result<Option<Edge>, PipelineError> {
    let total: usize = marked.iter().map(BTreeSet::len).sum();
    if total.is_multiple_of(2) {
        return Ok(None);
    }
    let all: ClassSets = (0..h.k()).map(|c| h.class_locals(c).collect()).collect();
    let found = h.first_edge_in_where(&all, |t| {
        t.iter()
            .enumerate()
            .filter(|&(c, &l)| marked[c].contains(&l))
            .count()
            % 2
            == 1
    });
    match found {
        Some(e) => Ok(Some(e)),
        None => {
            // Every edge meets the odd-size marked side evenly: that is a
            // parity certificate, so the instance is of the excluded type.
            let cert = ParityCertificate::from_sets(
                marked.iter().map(|s| s.iter().copied().collect()).collect(),
            );
            debug_assert!(cert.verify(h));
            Err(PipelineError::Obstruction(cert))
        }
    }
}

/// Greedily cover every bad vertex outside the parity edge by a fresh edge
/// meeting the residual marked side an even number of times.
pub fn cover_bad_vertices(
    h: &PartiteHypergraph,
    parity_edge: &Option<Edge>,
    bad: &BTreeSet<Vertex>,
    marked: &ClassSets,
) -> Result<Matching, StageError> {
    let k = h.k();
    let mut used: ClassSets = vec![BTreeSet::new(); k];
    let mut marked_rest = marked.clone();
    if let Some(e) = parity_edge {
        for (c, &l) in e.iter().enumerate() {
            used[c].insert(l);
            marked_rest[c].remove(&l);
        }
    }
    let mut cover = Matching::new();
    for &v in bad {
        if used[v.class].contains(&v.local) {
            continue; // already covered by the parity edge or an earlier edge
        }
        let mut pools: ClassSets = (0..k)
            .map(|c| h.class_locals(c).filter(|l| !used[c].contains(l)).collect())
            .collect();
        pools[v.class] = BTreeSet::from([v.local]);
        let eligible = h.first_edge_in_where(&pools, |t| {
            t.iter()
                .enumerate()
                .filter(|&(c, &l)| marked_rest[c].contains(&l))
                .count()
                % 2
                == 0
        });
        match eligible {
            Some(e) => {
                for (c, &l) in e.iter().enumerate() {
                    used[c].insert(l);
                }
                cover.push(e);
            }
            None => {
                return Err(StageError::GreedyStuck {
                    context: format!("no even-parity edge available at bad vertex {v}"),
                    vertex: Some(v),
                })
            }
        }
    }
    Ok(cover)
}

/// Perfect matching of the complete multipartite 2-graph with the given
/// class sizes: pairs of (class, slot). Feasible iff the total is even and
/// no class exceeds half; built by pairing the two currently largest classes.
pub fn complete_multipartite_pm(sizes: &[usize]) -> Option<Vec<(AuxVertex, AuxVertex)>> {
    let total: usize = sizes.iter().sum();
    let max = sizes.iter().copied().max().unwrap_or(0);
    if !total.is_multiple_of(2) || max * 2 > total {
        return None;
    }
    let mut remaining = sizes.to_vec();
    let mut next = vec![0usize; sizes.len()];
    let mut pairs = Vec::with_capacity(total / 2);
    for _ in 0..total / 2 {
        let p = (0..remaining.len()).max_by_key(|&c| remaining[c]).unwrap();
        let q = (0..remaining.len())
            .filter(|&c| c != p)
            .max_by_key(|&c| remaining[c])
            .unwrap();
        debug_assert!(remaining[q] > 0);
        pairs.push(((p, next[p]), (q, next[q])));
        next[p] += 1;
        next[q] += 1;
        remaining[p] -= 1;
        remaining[q] -= 1;
    }
    Some(pairs)
}

/// Build the balancing matching: each edge takes one marked vertex in each
/// of two classes and plain vertices elsewhere, leaving all classes with
/// equally many marked residuals (and an even total).
pub fn balance_residuals(
    h: &PartiteHypergraph,
    plain: &ClassSets,
    marked: &ClassSets,
) -> Result<Matching, StageError> {
    let k = h.k();
    let d: Vec<usize> = marked.iter().map(BTreeSet::len).collect();
    let total: usize = d.iter().sum();
    if !total.is_multiple_of(2) {
        return Err(StageError::PreconditionViolated {
            context: format!("marked residual total {total} is odd"),
        });
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| d[b].cmp(&d[a]).then(a.cmp(&b)));
    let sorted: Vec<usize> = order.iter().map(|&c| d[c]).collect();
    if sorted[0] == sorted[k - 1] {
        return Ok(Matching::new());
    }
    let r = sorted[0] % 2; // makes sorted[0] + r even
    let aux_sizes: Vec<usize> = sorted
        .iter()
        .map(|&di| (di - sorted[k - 1]) + (sorted[0] + r) - sorted[k - 1])
        .collect();
    let aux = complete_multipartite_pm(&aux_sizes)
        .ok_or(StageError::AuxiliaryInfeasible { sizes: aux_sizes })?;

    let mut used: ClassSets = vec![BTreeSet::new(); k];
    let mut out = Matching::new();
    for ((sp, _), (sq, _)) in aux {
        let p = order[sp];
        let q = order[sq];
        let mut pools: ClassSets = Vec::with_capacity(k);
        for c in 0..k {
            let source = if c == p || c == q {
                &marked[c]
            } else {
                &plain[c]
            };
            pools.push(source.difference(&used[c]).copied().collect());
        }
        match h.first_edge_in(&pools) {
            Some(e) => {
                for (c, &l) in e.iter().enumerate() {
                    used[c].insert(l);
                }
                out.push(e);
            }
            None => {
                return Err(StageError::LiftFailed {
                    context: format!(
                        "no edge with marked slots in classes {p} and {q} and plain slots elsewhere"
                    ),
                    marked_classes: vec![p, q],
                })
            }
        }
    }
    Ok(out)
}

/// For odd k: remove a small matching so that the (equal) marked residual
/// count becomes a multiple of k-1. Works in rounds of k edges, each round
/// consuming two marked vertices per class.
pub fn trim_to_divisibility(
    h: &PartiteHypergraph,
    plain: &ClassSets,
    marked: &ClassSets,
) -> Result<Matching, StageError> {
    let k = h.k();
    let d: Vec<usize> = marked.iter().map(BTreeSet::len).collect();
    if d.iter().any(|&x| x != d[0]) {
        return Err(StageError::PreconditionViolated {
            context: format!("marked residuals unequal: {d:?}"),
        });
    }
    let s = d[0] % (k - 1);
    if s == 0 {
        return Ok(Matching::new());
    }
    if !s.is_multiple_of(2) {
        return Err(StageError::PreconditionViolated {
            context: format!("residual remainder {s} is odd; total parity was broken upstream"),
        });
    }
    let mut used: ClassSets = vec![BTreeSet::new(); k];
    let mut out = Matching::new();
    for round in 0..s / 2 {
        for i in 0..k {
            let j = (i + 1) % k;
            let mut pools: ClassSets = Vec::with_capacity(k);
            for c in 0..k {
                let source = if c == i || c == j {
                    &marked[c]
                } else {
                    &plain[c]
                };
                pools.push(source.difference(&used[c]).copied().collect());
            }
            match h.first_edge_in(&pools) {
                Some(e) => {
                    for (c, &l) in e.iter().enumerate() {
                        used[c].insert(l);
                    }
                    out.push(e);
                }
                None => {
                    return Err(StageError::LiftFailed {
                        context: format!(
                            "round {round}: no edge with marked slots in classes {i} and {j}"
                        ),
                        marked_classes: vec![i, j],
                    })
                }
            }
        }
    }
    Ok(out)
}

/// Perfect matching on the vertices listed in `pools` (original labels),
/// using a complete search on the induced subgraph.
fn induced_pm(h: &PartiteHypergraph, pools: &[Vec<usize>]) -> Option<Vec<Edge>> {
    let (sub, pool) = h.induced(pools);
    sub.equal_class_sizes()?;
    let cfg = SolverConfig {
        timeout: std::time::Duration::from_secs(10),
        use_memo: false,
    };
    let m = find_perfect_matching(&sub, &cfg).completed()??;
    Some(
        m.edges()
            .iter()
            .map(|e| e.iter().enumerate().map(|(c, &l)| pool[c][l]).collect())
            .collect(),
    )
}

/// Greedy maximal matching inside per-class pools, lexicographic.
fn greedy_matching_in(h: &PartiteHypergraph, pools: &ClassSets, limit: usize) -> Matching {
    let mut free = pools.clone();
    let mut out = Matching::new();
    while out.len() < limit {
        match h.first_edge_in(&free) {
            Some(e) => {
                for (c, &l) in e.iter().enumerate() {
                    free[c].remove(&l);
                }
                out.push(e);
            }
            None => break,
        }
    }
    out
}

/// Choose `take` slots out of each pool minus `used`, ascending.
fn leftovers(pools: &ClassSets, covered: &ClassSets) -> ClassSets {
    pools
        .iter()
        .zip(covered)
        .map(|(p, u)| p.difference(u).copied().collect())
        .collect()
}

fn cover_class_sets(covered: &mut ClassSets, edge: &[usize]) {
    for (c, &l) in edge.iter().enumerate() {
        covered[c].insert(l);
    }
}

/// Exchange-augmented perfect matching of one side (all pools in `side`):
/// grow a greedy matching; while vertices remain, look for a small edge
/// subset whose vertices plus one leftover per class admit a perfect
/// matching of the induced subgraph, and rotate it in.
fn side_pm(
    h: &PartiteHypergraph,
    side: &ClassSets,
    cap: &mut u64,
    label: &str,
) -> Result<Matching, StageError> {
    let k = h.k();
    let sizes: Vec<usize> = side.iter().map(BTreeSet::len).collect();
    if sizes.iter().any(|&s| s != sizes[0]) {
        return Err(StageError::PreconditionViolated {
            context: format!("{label}: side pools unequal: {sizes:?}"),
        });
    }
    let mut m = greedy_matching_in(h, side, usize::MAX);
    loop {
        let mut covered: ClassSets = vec![BTreeSet::new(); k];
        for e in m.edges() {
            cover_class_sets(&mut covered, e);
        }
        let left = leftovers(side, &covered);
        if left.iter().all(BTreeSet::is_empty) {
            return Ok(m);
        }
        let picks: Vec<usize> = left
            .iter()
            .map(|s| *s.first().expect("equal side sizes keep leftovers aligned"))
            .collect();
        match rotate_in(h, &m, &picks, cap, label)? {
            Some((drop_idx, add)) => {
                let mut edges = m.into_edges();
                let keep: Vec<Edge> = edges
                    .drain(..)
                    .enumerate()
                    .filter(|(i, _)| !drop_idx.contains(i))
                    .map(|(_, e)| e)
                    .collect();
                m = Matching::from_edges(keep);
                for e in add {
                    m.push(e);
                }
            }
            None => {
                let leftover_vertices: Vec<Vertex> = picks
                    .iter()
                    .enumerate()
                    .map(|(c, &l)| Vertex::new(c, l))
                    .collect();
                let missing = rotation_witness(h, &m, &picks);
                return Err(StageError::ExchangeExhausted {
                    context: format!(
                        "{label}: no augmenting rotation for the leftover transversal"
                    ),
                    leftovers: leftover_vertices,
                    missing_samples: missing,
                });
            }
        }
    }
}

/// Search subsets of up to k-1 matching edges such that the subset's
/// vertices plus `picks` (one leftover per class) induce a matchable block.
/// Returns the subset indices and the replacement edges.
fn rotate_in(
    h: &PartiteHypergraph,
    m: &Matching,
    picks: &[usize],
    cap: &mut u64,
    label: &str,
) -> Result<Option<RotationPlan>, StageError> {
    let k = h.k();
    for t in 0..k.min(m.len() + 1) {
        let mut combo: Vec<usize> = (0..t).collect();
        loop {
            if *cap == 0 {
                return Err(StageError::ExchangeExhausted {
                    context: format!("{label}: exchange subset budget exhausted"),
                    leftovers: picks
                        .iter()
                        .enumerate()
                        .map(|(c, &l)| Vertex::new(c, l))
                        .collect(),
                    missing_samples: Vec::new(),
                });
            }
            *cap -= 1;
            let mut pools: Vec<Vec<usize>> = picks.iter().map(|&l| vec![l]).collect();
            for &i in &combo {
                for (c, &l) in m.edges()[i].iter().enumerate() {
                    pools[c].push(l);
                }
            }
            if let Some(add) = induced_pm(h, &pools) {
                return Ok(Some((combo, add)));
            }
            if !next_combination(&mut combo, m.len()) {
                break;
            }
        }
    }
    Ok(None)
}

/// Advance `combo` to the next t-combination of 0..bound; false when done.
fn next_combination(combo: &mut [usize], bound: usize) -> bool {
    let t = combo.len();
    if t == 0 {
        return false;
    }
    let mut i = t;
    while i > 0 {
        i -= 1;
        if combo[i] + (t - i) < bound {
            combo[i] += 1;
            for j in i + 1..t {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The explicit cyclic rotation for the lexicographically first full-size
/// subset, listing the tuples that are not edges — the concrete witness
/// attached to exchange failures.
fn rotation_witness(h: &PartiteHypergraph, m: &Matching, picks: &[usize]) -> Vec<Edge> {
    let k = h.k();
    if m.len() < k - 1 {
        return Vec::new();
    }
    let chosen: Vec<&Edge> = m.edges().iter().take(k - 1).collect();
    let mut missing = Vec::new();
    for (j, &pick) in picks.iter().enumerate() {
        let mut f: Edge = vec![0; k];
        f[j] = pick;
        for (i, e) in chosen.iter().enumerate() {
            let c = (j + i + 1) % k;
            f[c] = e[c];
        }
        if !h.has_edge(&f) {
            missing.push(f);
        }
    }
    missing
}

/// Even class count: finish by matching each side of the split separately.
pub fn finish_even_k(
    h: &PartiteHypergraph,
    plain: &ClassSets,
    marked: &ClassSets,
    cap: &mut u64,
) -> Result<Matching, StageError> {
    let inner = side_pm(h, marked, cap, "marked side")?;
    let outer = side_pm(h, plain, cap, "plain side")?;
    Ok(Matching::union([&inner, &outer]))
}

/// Is `e` an interior edge (all plain) or a pivot edge of class `j`
/// (plain in class j, marked elsewhere)?
fn edge_type(e: &[usize], plain: &ClassSets, marked: &ClassSets) -> Option<Option<usize>> {
    let mut pivot: Option<usize> = None;
    let mut interior = true;
    for (c, &l) in e.iter().enumerate() {
        if plain[c].contains(&l) {
            continue;
        }
        if marked[c].contains(&l) {
            interior = false;
            continue;
        }
        return None; // outside both pools
    }
    if interior {
        return Some(None);
    }
    for (c, &l) in e.iter().enumerate() {
        if plain[c].contains(&l) {
            if pivot.is_some() {
                return None;
            }
            pivot = Some(c);
        }
    }
    pivot.map(|c| Some(Some(c)))?
}

/// Build the typed matchings: one interior matching plus one pivot matching
/// per class, each of floor(tau n) edges, pairwise disjoint.
pub fn build_type_matchings(
    h: &PartiteHypergraph,
    plain: &ClassSets,
    marked: &ClassSets,
    cfg: &PipelineConfig,
) -> Result<Vec<Matching>, StageError> {
    let k = h.k();
    let target = (cfg.tau_for(k) * h.n() as f64).floor() as usize;
    let mut used: ClassSets = vec![BTreeSet::new(); k];
    let mut matchings = Vec::with_capacity(k + 1);

    let interior_pools = leftovers(plain, &used);
    let interior = greedy_matching_in(h, &interior_pools, target);
    if interior.len() < target {
        let class = (0..k).min_by_key(|&c| interior_pools[c].len()).unwrap_or(0);
        return Err(StageError::GreedyStuck {
            context: format!(
                "interior matching stalled at {} of {target} edges (class {class} pool smallest)",
                interior.len()
            ),
            vertex: None,
        });
    }
    for e in interior.edges() {
        cover_class_sets(&mut used, e);
    }
    matchings.push(interior);

    for j in 0..k {
        let mut pools = leftovers(marked, &used);
        pools[j] = plain[j].difference(&used[j]).copied().collect();
        let mj = greedy_matching_in(h, &pools, target);
        if mj.len() < target {
            return Err(StageError::GreedyStuck {
                context: format!(
                    "class-{j} pivot matching stalled at {} of {target} edges",
                    mj.len()
                ),
                vertex: None,
            });
        }
        for e in mj.edges() {
            cover_class_sets(&mut used, e);
        }
        matchings.push(mj);
    }
    Ok(matchings)
}

/// Odd class count: absorb marked leftovers via per-class pivot rotations,
/// then plain leftovers via interior rotations, until the residual pools are
/// fully covered or no exchange applies.
pub fn finish_odd_k(
    h: &PartiteHypergraph,
    plain: &ClassSets,
    marked: &ClassSets,
    type_matchings: Vec<Matching>,
    cfg: &PipelineConfig,
) -> Result<Matching, StageError> {
    let k = h.k();
    let mut ms = type_matchings;
    let mut cap = cfg.exchange_cap;
    loop {
        let mut covered: ClassSets = vec![BTreeSet::new(); k];
        for m in &ms {
            for e in m.edges() {
                cover_class_sets(&mut covered, e);
            }
        }
        let marked_left = leftovers(marked, &covered);
        let plain_left = leftovers(plain, &covered);
        let marked_counts: Vec<usize> = marked_left.iter().map(BTreeSet::len).collect();
        let plain_counts: Vec<usize> = plain_left.iter().map(BTreeSet::len).collect();

        if marked_counts.iter().all(|&c| c == 0) && plain_counts.iter().all(|&c| c == 0) {
            return Ok(Matching::union(ms.iter()));
        }

        if marked_counts.iter().any(|&c| c > 0) {
            if marked_counts.iter().any(|&c| c != marked_counts[0]) {
                return Err(StageError::PreconditionViolated {
                    context: format!("marked leftovers unequal: {marked_counts:?}"),
                });
            }
            if marked_counts[0] < k - 1 {
                return Err(StageError::PreconditionViolated {
                    context: format!(
                        "marked leftover count {} not a multiple of k-1",
                        marked_counts[0]
                    ),
                });
            }
            absorb_marked_round(h, &mut ms, &marked_left, &plain_left, &mut cap)?;
        } else {
            absorb_plain_round(h, &mut ms, &plain_left, &mut cap)?;
        }
    }
}

/// One marked-absorption round: fix k-1 spare marked vertices per class,
/// pick one plain pivot per class (from leftovers, or by dissolving one
/// interior edge), and enlarge every pivot matching by one through an
/// induced-block rotation.
fn absorb_marked_round(
    h: &PartiteHypergraph,
    ms: &mut [Matching],
    marked_left: &ClassSets,
    plain_left: &ClassSets,
    cap: &mut u64,
) -> Result<(), StageError> {
    let k = h.k();
    let spares: Vec<Vec<usize>> = marked_left
        .iter()
        .map(|s| s.iter().copied().take(k - 1).collect())
        .collect();

    // The pivot transversal: class j of spare-set construction S_j.
    let spare_for = |j: usize, i: usize| -> usize {
        // classes i != j contribute a spare; the last construction uses the
        // diagonal spares
        if j + 1 == k {
            spares[i][i]
        } else {
            spares[i][j]
        }
    };

    let from_leftovers = plain_left.iter().all(|s| !s.is_empty());
    let pivot_sources: Vec<Vec<usize>> = if from_leftovers {
        plain_left
            .iter()
            .map(|s| s.iter().copied().collect())
            .collect()
    } else if !ms[0].is_empty() {
        Vec::new() // handled below: iterate interior edges
    } else {
        return Err(StageError::ExchangeExhausted {
            context: "marked leftovers remain but no plain pivots are available".into(),
            leftovers: flatten(marked_left),
            missing_samples: Vec::new(),
        });
    };

    let try_round = |pivots: &[usize],
                     ms: &[Matching],
                     cap: &mut u64|
     -> Result<Option<Vec<RotationPlan>>, StageError> {
        let mut plans = Vec::with_capacity(k);
        for j in 0..k {
            let mut block: Vec<Vec<usize>> = vec![Vec::new(); k];
            block[j].push(pivots[j]);
            for (i, slot) in block.iter_mut().enumerate() {
                if i != j {
                    slot.push(spare_for(j, i));
                }
            }
            let mut found = None;
            for t in 0..k.min(ms[1 + j].len() + 1) {
                let mut combo: Vec<usize> = (0..t).collect();
                loop {
                    if *cap == 0 {
                        return Err(StageError::ExchangeExhausted {
                            context: "pivot rotation budget exhausted".into(),
                            leftovers: Vec::new(),
                            missing_samples: Vec::new(),
                        });
                    }
                    *cap -= 1;
                    let mut pools = block.clone();
                    for &i in &combo {
                        for (c, &l) in ms[1 + j].edges()[i].iter().enumerate() {
                            pools[c].push(l);
                        }
                    }
                    if let Some(add) = induced_pm(h, &pools) {
                        found = Some((combo.clone(), add));
                        break;
                    }
                    if !next_combination(&mut combo, ms[1 + j].len()) {
                        break;
                    }
                }
                if found.is_some() {
                    break;
                }
            }
            match found {
                Some(plan) => plans.push(plan),
                None => return Ok(None),
            }
        }
        Ok(Some(plans))
    };

    let commit = |ms: &mut [Matching], plans: Vec<RotationPlan>| {
        for (j, (drop_idx, add)) in plans.into_iter().enumerate() {
            let edges = std::mem::take(&mut ms[1 + j]).into_edges();
            let mut kept: Vec<Edge> = edges
                .into_iter()
                .enumerate()
                .filter(|(i, _)| !drop_idx.contains(i))
                .map(|(_, e)| e)
                .collect();
            kept.extend(add);
            ms[1 + j] = Matching::from_edges(kept);
        }
    };

    if from_leftovers {
        // Independent pivot choices per class: walk candidate transversals
        // in ascending order, first full success wins.
        // Pivot j only enters construction j, so search them separately.
        let mut plans: Vec<(Vec<usize>, Vec<Edge>)> = Vec::with_capacity(k);
        for j in 0..k {
            let mut plan_j = None;
            for &pivot in &pivot_sources[j] {
                let mut pivots = vec![0usize; k];
                pivots[j] = pivot;
                // only index j matters for construction j
                let probe = try_one_pivot(h, ms, j, pivot, &spare_for, cap)?;
                if let Some(p) = probe {
                    plan_j = Some(p);
                    break;
                }
            }
            match plan_j {
                Some(p) => plans.push(p),
                None => {
                    return Err(StageError::ExchangeExhausted {
                        context: format!("no pivot rotation absorbs the class-{j} spare set"),
                        leftovers: flatten(marked_left),
                        missing_samples: spare_block_witness(h, j, &spare_for, plain_left, k),
                    })
                }
            }
        }
        commit(ms, plans);
        Ok(())
    } else {
        let interior: Vec<Edge> = ms[0].edges().to_vec();
        for (idx, wedge) in interior.iter().enumerate() {
            match try_round(wedge, ms, cap)? {
                Some(plans) => {
                    let edges = std::mem::take(&mut ms[0]).into_edges();
                    let kept: Vec<Edge> = edges
                        .into_iter()
                        .enumerate()
                        .filter(|(i, _)| *i != idx)
                        .map(|(_, e)| e)
                        .collect();
                    ms[0] = Matching::from_edges(kept);
                    commit(ms, plans);
                    return Ok(());
                }
                None => continue,
            }
        }
        Err(StageError::ExchangeExhausted {
            context: "no interior edge can be dissolved into pivot rotations".into(),
            leftovers: flatten(marked_left),
            missing_samples: Vec::new(),
        })
    }
}

/// Plan for a single pivot construction: spare transversal + pivot vertex,
/// augmented through subsets of the class-j pivot matching.
fn try_one_pivot(
    h: &PartiteHypergraph,
    ms: &[Matching],
    j: usize,
    pivot: usize,
    spare_for: &impl Fn(usize, usize) -> usize,
    cap: &mut u64,
) -> Result<Option<RotationPlan>, StageError> {
    let k = h.k();
    let mut block: Vec<Vec<usize>> = vec![Vec::new(); k];
    block[j].push(pivot);
    for (i, slot) in block.iter_mut().enumerate() {
        if i != j {
            slot.push(spare_for(j, i));
        }
    }
    for t in 0..k.min(ms[1 + j].len() + 1) {
        let mut combo: Vec<usize> = (0..t).collect();
        loop {
            if *cap == 0 {
                return Err(StageError::ExchangeExhausted {
                    context: "pivot rotation budget exhausted".into(),
                    leftovers: Vec::new(),
                    missing_samples: Vec::new(),
                });
            }
            *cap -= 1;
            let mut pools = block.clone();
            for &i in &combo {
                for (c, &l) in ms[1 + j].edges()[i].iter().enumerate() {
                    pools[c].push(l);
                }
            }
            if let Some(add) = induced_pm(h, &pools) {
                return Ok(Some((combo, add)));
            }
            if !next_combination(&mut combo, ms[1 + j].len()) {
                break;
            }
        }
    }
    Ok(None)
}

fn spare_block_witness(
    h: &PartiteHypergraph,
    j: usize,
    spare_for: &impl Fn(usize, usize) -> usize,
    plain_left: &ClassSets,
    k: usize,
) -> Vec<Edge> {
    let Some(&pivot) = plain_left[j].first() else {
        return Vec::new();
    };
    let mut tuple = vec![0usize; k];
    tuple[j] = pivot;
    for (i, slot) in tuple.iter_mut().enumerate() {
        if i != j {
            *slot = spare_for(j, i);
        }
    }
    if h.has_edge(&tuple) {
        Vec::new()
    } else {
        vec![tuple]
    }
}

/// One plain-absorption round: enlarge the interior matching by rotating in
/// the leftover plain transversal.
fn absorb_plain_round(
    h: &PartiteHypergraph,
    ms: &mut [Matching],
    plain_left: &ClassSets,
    cap: &mut u64,
) -> Result<(), StageError> {
    let counts: Vec<usize> = plain_left.iter().map(BTreeSet::len).collect();
    if counts.iter().any(|&c| c != counts[0]) || counts[0] == 0 {
        return Err(StageError::PreconditionViolated {
            context: format!("plain leftovers unequal: {counts:?}"),
        });
    }
    let picks: Vec<usize> = plain_left.iter().map(|s| *s.first().unwrap()).collect();
    match rotate_in(h, &ms[0], &picks, cap, "interior rotation")? {
        Some((drop_idx, add)) => {
            let edges = std::mem::take(&mut ms[0]).into_edges();
            let mut kept: Vec<Edge> = edges
                .into_iter()
                .enumerate()
                .filter(|(i, _)| !drop_idx.contains(i))
                .map(|(_, e)| e)
                .collect();
            kept.extend(add);
            ms[0] = Matching::from_edges(kept);
            Ok(())
        }
        None => Err(StageError::ExchangeExhausted {
            context: "no interior rotation absorbs the plain leftovers".into(),
            leftovers: picks
                .iter()
                .enumerate()
                .map(|(c, &l)| Vertex::new(c, l))
                .collect(),
            missing_samples: rotation_witness(h, &ms[0], &picks),
        }),
    }
}

fn flatten(sets: &ClassSets) -> Vec<Vertex> {
    sets.iter()
        .enumerate()
        .flat_map(|(c, s)| s.iter().map(move |&l| Vertex::new(c, l)))
        .collect()
}

fn mark_masks(h: &PartiteHypergraph, sets: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let mut masks = vec![vec![false; h.n()]; h.k()];
    for (c, s) in sets.iter().enumerate() {
        for &l in s {
            masks[c][l] = true;
        }
    }
    masks
}

fn for_each_tuple_through(h: &PartiteHypergraph, v: Vertex, f: &mut impl FnMut(&[usize], usize)) {
    let k = h.k();
    let locals: Vec<Vec<usize>> = (0..k)
        .map(|c| {
            if c == v.class {
                vec![v.local]
            } else {
                h.class_locals(c).collect()
            }
        })
        .collect();
    let mut tuple = vec![0usize; k];
    fn rec(
        h: &PartiteHypergraph,
        locals: &[Vec<usize>],
        depth: usize,
        tuple: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize], usize),
    ) {
        if depth == h.k() {
            let idx = h.tuple_index(tuple);
            f(tuple, idx);
            return;
        }
        for &l in &locals[depth] {
            tuple[depth] = l;
            rec(h, locals, depth + 1, tuple, f);
        }
    }
    rec(h, &locals, 0, &mut tuple, f);
}

/// Run the full staged construction. `Ok` carries a report that either holds
/// a verified perfect matching or names the failed stage with its witness;
/// `Err` covers precondition violations and genuine parity obstructions.
pub fn run_pipeline(
    h: &PartiteHypergraph,
    cfg: &PipelineConfig,
) -> Result<PipelineReport, PipelineError> {
    let k = h.k();
    if k < 3 {
        return Err(PipelineError::UnsupportedUniformity(k));
    }
    let n = h.equal_class_sizes().ok_or(PipelineError::UnequalClasses)?;
    let delta = h.min_codegree();
    let required = (0.5 - cfg.alpha) * n as f64;
    if (delta as f64) < required {
        return Err(PipelineError::DegreeTooLow {
            required,
            actual: delta,
        });
    }
    if cfg.strict_constants && n < 100 * k * k {
        return Err(PipelineError::ClassSizeTooSmall {
            need: 100 * k * k,
            got: n,
        });
    }

    let mut state = PipelineState::default();
    let eps_limit = (1.0 / (100.0 * (k * k) as f64))
        .min(1.0 / (k as f64 * (10.0 * (k * k) as f64).powi(k as i32 - 1)));
    if cfg.epsilon.sqrt() >= eps_limit {
        state.warnings.push(format!(
            "sqrt(epsilon) = {:.4} exceeds the asymptotic bound {:.2e}; desk-scale run",
            cfg.epsilon.sqrt(),
            eps_limit
        ));
    }
    if n < 100 * k * k {
        state
            .warnings
            .push(format!("class size {n} below 100 k^2 = {}", 100 * k * k));
    }

    // Closeness witness: exact when the half-set space is small.
    let half_choices = binomial(n, n / 2).pow(k as u32);
    let mode = if half_choices <= 30_000 {
        SearchMode::Exact
    } else {
        SearchMode::LocalSearch
    };
    let cl = closeness(
        h,
        &ClosenessConfig {
            epsilon: cfg.epsilon,
            search_mode: mode,
            max_iters: 8,
            seed: cfg.seed,
        },
    );
    state.witness_sets = cl.witness.marked_sets();
    state.closeness_cost = cl.cost;
    let max_edges = (n as f64).powi(k as i32);
    let eps_close = (cl.cost as f64) < cfg.epsilon * max_edges;
    if !eps_close {
        state.warnings.push(format!(
            "closeness cost {} is not below epsilon n^k = {:.1}; template stages may fail",
            cl.cost,
            cfg.epsilon * max_edges
        ));
    }

    let fail = |state: PipelineState, stage: &str, error: StageError| {
        Ok(PipelineReport {
            k,
            n,
            state,
            failure: Some(StageFailure {
                stage: stage.to_string(),
                error,
            }),
            matching: None,
        })
    };

    // Bad vertices and the side switch.
    let bad = compute_bad_set(h, &state.witness_sets, cfg.epsilon);
    state.bad = bad.iter().copied().collect();
    if eps_close {
        let bound = cfg.epsilon.sqrt() * (k * n) as f64;
        push_check(
            &mut state,
            "bad_set",
            "bad vertex count within sqrt(eps) k n",
            (bad.len() as f64) <= bound,
            format!("|bad| = {}, bound = {bound:.2}", bad.len()),
        );
    }
    let (plain_side, marked_side) = switch_classes(h, &state.witness_sets, &bad);
    state.plain_side = plain_side
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    state.marked_side = marked_side
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    let partition_ok = (0..k).all(|c| {
        plain_side[c].is_disjoint(&marked_side[c])
            && plain_side[c].len() + marked_side[c].len() == h.class_size(c)
    });
    push_check(
        &mut state,
        "switch",
        "sides partition each class",
        partition_ok,
        String::new(),
    );

    // Parity edge.
    let parity_edge = find_parity_edge(h, &marked_side)?;
    state.parity_edge = parity_edge.clone();
    let marked_total: usize = marked_side.iter().map(BTreeSet::len).sum();
    let removed = parity_edge
        .as_ref()
        .map(|e| {
            e.iter()
                .enumerate()
                .filter(|&(c, &l)| marked_side[c].contains(&l))
                .count()
        })
        .unwrap_or(0);
    push_check(
        &mut state,
        "parity_edge",
        "marked side is even after removing the parity edge",
        (marked_total - removed).is_multiple_of(2),
        format!("total {marked_total}, removed {removed}"),
    );

    // Bad cover.
    let cover = match cover_bad_vertices(h, &parity_edge, &bad, &marked_side) {
        Ok(m) => m,
        Err(e) => return fail(state, "bad_cover", e),
    };
    state.bad_cover = cover.clone();
    {
        let covered = cover.covered();
        let in_parity = |v: &Vertex| parity_edge.as_ref().is_some_and(|e| e[v.class] == v.local);
        let all_covered = bad.iter().all(|v| covered.contains(v) || in_parity(v));
        let mut marked_rest = marked_side.clone();
        if let Some(e) = &parity_edge {
            for (c, &l) in e.iter().enumerate() {
                marked_rest[c].remove(&l);
            }
        }
        let parity_ok = cover.edges().iter().all(|e| {
            e.iter()
                .enumerate()
                .filter(|&(c, &l)| marked_rest[c].contains(&l))
                .count()
                % 2
                == 0
        });
        let disjoint_from_parity = parity_edge.as_ref().is_none_or(|e| {
            cover
                .edges()
                .iter()
                .all(|f| f.iter().zip(e).all(|(a, b)| a != b))
        });
        push_check(
            &mut state,
            "bad_cover",
            "bad vertices covered, even parity, small, disjoint from parity edge",
            all_covered && parity_ok && cover.len() <= bad.len() && disjoint_from_parity,
            format!("|cover| = {}, |bad| = {}", cover.len(), bad.len()),
        );
    }

    // Residual pools after the parity edge and the bad cover.
    let mut used: ClassSets = vec![BTreeSet::new(); k];
    if let Some(e) = &parity_edge {
        cover_class_sets(&mut used, e);
    }
    for e in cover.edges() {
        cover_class_sets(&mut used, e);
    }
    let plain_pool = leftovers(&plain_side, &used);
    let marked_pool = leftovers(&marked_side, &used);
    state
        .residuals
        .push(snapshot("bad_cover", &plain_pool, &marked_pool));

    // Balance.
    let balancer = match balance_residuals(h, &plain_pool, &marked_pool) {
        Ok(m) => m,
        Err(e) => return fail(state, "balance", e),
    };
    state.balancer = balancer.clone();
    for e in balancer.edges() {
        cover_class_sets(&mut used, e);
    }
    let plain_pool = leftovers(&plain_side, &used);
    let marked_pool = leftovers(&marked_side, &used);
    state
        .residuals
        .push(snapshot("balance", &plain_pool, &marked_pool));
    {
        let counts: Vec<usize> = marked_pool.iter().map(BTreeSet::len).collect();
        let equal = counts.iter().all(|&c| c == counts[0]);
        let even = counts.iter().sum::<usize>() % 2 == 0;
        let two_each = balancer.edges().iter().all(|e| {
            e.iter()
                .enumerate()
                .filter(|&(c, &l)| marked_side[c].contains(&l))
                .count()
                == 2
        });
        push_check(
            &mut state,
            "balance",
            "marked residuals equal and even; balancer edges carry two marked vertices",
            equal && even && two_each,
            format!("residuals {counts:?}"),
        );
    }

    let mut cap = cfg.exchange_cap;
    let assembled = if k.is_multiple_of(2) {
        match finish_even_k(h, &plain_pool, &marked_pool, &mut cap) {
            Ok(m) => m,
            Err(e) => return fail(state, "finish_even", e),
        }
    } else {
        // Divisibility fix.
        let fix = match trim_to_divisibility(h, &plain_pool, &marked_pool) {
            Ok(m) => m,
            Err(e) => return fail(state, "divisibility", e),
        };
        state.divisibility_fix = fix.clone();
        for e in fix.edges() {
            cover_class_sets(&mut used, e);
        }
        let plain_pool = leftovers(&plain_side, &used);
        let marked_pool = leftovers(&marked_side, &used);
        state
            .residuals
            .push(snapshot("divisibility", &plain_pool, &marked_pool));
        {
            let counts: Vec<usize> = marked_pool.iter().map(BTreeSet::len).collect();
            let ok = counts.iter().all(|&c| c == counts[0] && c % (k - 1) == 0)
                && fix.len() <= k * k / 2;
            push_check(
                &mut state,
                "divisibility",
                "marked residuals equal and divisible by k-1; fix is small",
                ok,
                format!("residuals {counts:?}, |fix| = {}", fix.len()),
            );
        }

        // Typed matchings.
        let types = match build_type_matchings(h, &plain_pool, &marked_pool, cfg) {
            Ok(t) => t,
            Err(e) => return fail(state, "type_matchings", e),
        };
        state.type_matchings = types.clone();
        {
            let target = (cfg.tau_for(k) * n as f64).floor() as usize;
            let sizes_ok = types.iter().all(|m| m.len() == target);
            let union = Matching::union(types.iter());
            let disjoint = union.is_disjoint();
            let typed_ok = types.iter().enumerate().all(|(i, m)| {
                m.edges().iter().all(|e| {
                    let t = edge_type(e, &plain_pool, &marked_pool);
                    match i {
                        0 => t == Some(None),
                        _ => t == Some(Some(i - 1)),
                    }
                })
            });
            push_check(
                &mut state,
                "type_matchings",
                "typed matchings disjoint, sized floor(tau n), correctly typed",
                sizes_ok && disjoint && typed_ok,
                format!("target {target}"),
            );
        }

        match finish_odd_k(h, &plain_pool, &marked_pool, types, cfg) {
            Ok(m) => m,
            Err(e) => return fail(state, "finish_odd", e),
        }
    };

    // Assemble and verify.
    let mut final_edges: Vec<Edge> = Vec::new();
    if let Some(e) = &state.parity_edge {
        final_edges.push(e.clone());
    }
    final_edges.extend(state.bad_cover.edges().iter().cloned());
    final_edges.extend(state.balancer.edges().iter().cloned());
    final_edges.extend(state.divisibility_fix.edges().iter().cloned());
    final_edges.extend(assembled.edges().iter().cloned());
    let matching = Matching::from_edges(final_edges);
    let ok = verify_matching(h, &matching, true);
    push_check(
        &mut state,
        "assembly",
        "assembled matching is perfect",
        ok,
        format!("|matching| = {}", matching.len()),
    );
    if ok {
        Ok(PipelineReport {
            k,
            n,
            state,
            failure: None,
            matching: Some(matching),
        })
    } else {
        let error = StageError::PreconditionViolated {
            context: "assembled edges failed final verification".into(),
        };
        Ok(PipelineReport {
            k,
            n,
            state,
            failure: Some(StageFailure {
                stage: "assembly".into(),
                error,
            }),
            matching: None,
        })
    }
}

fn push_check(state: &mut PipelineState, stage: &str, name: &str, passed: bool, detail: String) {
    state.checks.push(StageCheck {
        stage: stage.to_string(),
        name: name.to_string(),
        passed,
        detail,
    });
}

fn binomial(n: usize, mut r: usize) -> u64 {
    if r > n {
        return 0;
    }
    r = r.min(n - r);
    let mut acc: u64 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::{build_h0, build_h0_canonical, H0Params};

    fn pools(v: &[&[usize]]) -> ClassSets {
        v.iter().map(|s| s.iter().copied().collect()).collect()
    }

    #[test]
    fn multipartite_pm_examples() {
        assert_eq!(complete_multipartite_pm(&[2, 2, 2]).unwrap().len(), 3);
        assert!(complete_multipartite_pm(&[4, 1, 1]).is_none());
        assert_eq!(complete_multipartite_pm(&[3, 2, 1]).unwrap().len(), 3);
        assert_eq!(complete_multipartite_pm(&[0, 0]).unwrap().len(), 0);
        assert!(complete_multipartite_pm(&[1, 1, 1]).is_none()); // odd total
    }

    #[test]
    fn multipartite_pm_pairs_are_cross_class() {
        let pairs = complete_multipartite_pm(&[3, 2, 1]).unwrap();
        for ((c1, _), (c2, _)) in pairs {
            assert_ne!(c1, c2);
        }
    }

    #[test]
    fn switch_moves_low_parity_bad_vertices() {
        // Template with designed sets; delete all even-parity edges at one
        // marked vertex so it has to switch sides.
        let p = H0Params::new(3, 4, vec![2, 2, 2]).unwrap();
        let mut h = build_h0(&p).unwrap();
        let victim = Vertex::new(0, 0); // in the designed marked set
        let doomed: Vec<Edge> = h
            .edge_list()
            .into_iter()
            .filter(|e| e[0] == victim.local)
            .collect();
        for e in &doomed {
            h.remove_edge(e).unwrap();
        }
        let sets = p.marked_sets();
        let bad = compute_bad_set(&h, &sets, 0.04);
        assert!(bad.contains(&victim));
        let (plain, marked) = switch_classes(&h, &sets, &bad);
        assert!(plain[0].contains(&victim.local));
        assert!(!marked[0].contains(&victim.local));
        // untouched vertices keep their side
        assert!(marked[1].contains(&0));
    }

    #[test]
    fn parity_edge_cases() {
        // even marked side: no edge needed
        let h = PartiteHypergraph::complete(3, 3).unwrap();
        let even = pools(&[&[0, 1], &[0, 1], &[0, 1]]);
        assert!(find_parity_edge(&h, &even).unwrap().is_none());
        // odd marked side in a complete graph: some edge with odd overlap
        let odd = pools(&[&[0, 1], &[0, 1], &[0]]);
        let e = find_parity_edge(&h, &odd).unwrap().unwrap();
        let hits = e
            .iter()
            .enumerate()
            .filter(|&(c, &l)| odd[c].contains(&l))
            .count();
        assert_eq!(hits % 2, 1);
        // template with the marked side as designed set: obstruction
        let p = H0Params::new(3, 3, vec![1, 1, 1]).unwrap();
        let t = build_h0(&p).unwrap();
        let designed = pools(&[&[0], &[0], &[0]]);
        assert!(matches!(
            find_parity_edge(&t, &designed),
            Err(PipelineError::Obstruction(_))
        ));
    }

    #[test]
    fn bad_cover_greedy_sticks_on_shared_bottleneck() {
        // Two bad vertices in different classes whose only edges run through
        // one shared vertex: the second request must fail.
        let mut h = PartiteHypergraph::new(3, 3).unwrap();
        h.add_edge(&[0, 1, 0]).unwrap(); // covers (0,0) via (2,0)
        h.add_edge(&[1, 0, 0]).unwrap(); // covers (1,0) via (2,0)
        h.add_edge(&[1, 1, 1]).unwrap();
        h.add_edge(&[2, 2, 2]).unwrap();
        h.add_edge(&[1, 2, 1]).unwrap();
        let bad: BTreeSet<Vertex> = [Vertex::new(0, 0), Vertex::new(1, 0)].into();
        let marked = pools(&[&[], &[], &[]]);
        let r = cover_bad_vertices(&h, &None, &bad, &marked);
        match r {
            Err(StageError::GreedyStuck { vertex, .. }) => {
                assert_eq!(vertex, Some(Vertex::new(1, 0)));
            }
            other => panic!("expected GreedyStuck, got {other:?}"),
        }
    }

    #[test]
    fn balance_profile_traces_through() {
        // complete graph, marked profile (4,3,3), plain the rest
        let h = PartiteHypergraph::complete(3, 8).unwrap();
        let marked = pools(&[&[0, 1, 2, 3], &[0, 1, 2], &[0, 1, 2]]);
        let plain = pools(&[&[4, 5, 6, 7], &[3, 4, 5, 6, 7], &[3, 4, 5, 6, 7]]);
        let m2 = balance_residuals(&h, &plain, &marked).unwrap();
        assert_eq!(m2.len(), 2);
        let mut residual = [4usize, 3, 3];
        for e in m2.edges() {
            for (c, &l) in e.iter().enumerate() {
                if marked[c].contains(&l) {
                    residual[c] -= 1;
                }
            }
            let hits = e
                .iter()
                .enumerate()
                .filter(|&(c, &l)| marked[c].contains(&l))
                .count();
            assert_eq!(hits, 2);
        }
        assert_eq!(residual, [2, 2, 2]);
    }

    #[test]
    fn balance_rejects_odd_total() {
        let h = PartiteHypergraph::complete(3, 4).unwrap();
        let marked = pools(&[&[0, 1], &[0], &[]]);
        let plain = pools(&[&[2, 3], &[1, 2, 3], &[0, 1, 2, 3]]);
        assert!(matches!(
            balance_residuals(&h, &plain, &marked),
            Err(StageError::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn divisibility_fix_small_cases() {
        let h = PartiteHypergraph::complete(3, 8).unwrap();
        // k=3: k-1 = 2, residuals 4 are already divisible
        let marked = pools(&[&[0, 1, 2, 3], &[0, 1, 2, 3], &[0, 1, 2, 3]]);
        let plain = pools(&[&[4, 5, 6, 7], &[4, 5, 6, 7], &[4, 5, 6, 7]]);
        assert!(trim_to_divisibility(&h, &plain, &marked)
            .unwrap()
            .is_empty());

        // k=5 with residuals 6: one round of 5 edges, residual 4 = 0 mod 4
        let h = PartiteHypergraph::complete(5, 12).unwrap();
        let marked: ClassSets = (0..5).map(|_| (0..6).collect()).collect();
        let plain: ClassSets = (0..5).map(|_| (6..12).collect()).collect();
        let fix = trim_to_divisibility(&h, &plain, &marked).unwrap();
        assert_eq!(fix.len(), 5);
        let mut residual = [6usize; 5];
        for e in fix.edges() {
            for (c, &l) in e.iter().enumerate() {
                if marked[c].contains(&l) {
                    residual[c] -= 1;
                }
            }
        }
        assert!(residual.iter().all(|&r| r == 4));
        assert!(Matching::union([&fix]).is_disjoint());
    }

    #[test]
    fn even_k_finish_uses_exchange() {
        // complete 4-partite on 2 vertices per class, minus the all-ones
        // edge: the greedy diagonal stalls and a rotation repairs it.
        let mut h = PartiteHypergraph::complete(4, 2).unwrap();
        h.remove_edge(&[1, 1, 1, 1]).unwrap();
        let marked: ClassSets = (0..4).map(|_| BTreeSet::from([0, 1])).collect();
        let plain: ClassSets = (0..4).map(|_| BTreeSet::new()).collect();
        let mut cap = 1000;
        let m = finish_even_k(&h, &plain, &marked, &mut cap).unwrap();
        assert_eq!(m.len(), 2);
        assert!(verify_matching(&h, &m, true));
    }

    #[test]
    fn even_k_finish_reports_on_empty_graph() {
        let h = PartiteHypergraph::new(4, 2).unwrap();
        let marked: ClassSets = (0..4).map(|_| BTreeSet::from([0, 1])).collect();
        let plain: ClassSets = (0..4).map(|_| BTreeSet::new()).collect();
        let mut cap = 1000;
        match finish_even_k(&h, &plain, &marked, &mut cap) {
            Err(StageError::ExchangeExhausted { leftovers, .. }) => {
                assert!(!leftovers.is_empty());
            }
            other => panic!("expected ExchangeExhausted, got {other:?}"),
        }
    }

    #[test]
    fn pipeline_matches_even_sum_template() {
        // canonical template at n = 0 mod 4 has an even marked sum and a
        // perfect matching; the pipeline must find one.
        let h = build_h0_canonical(3, 8).unwrap();
        let report = run_pipeline(&h, &PipelineConfig::default()).unwrap();
        assert!(report.succeeded(), "failure: {:?}", report.failure);
        assert!(report.state.checks.iter().all(|c| c.passed));
        let m = report.matching.unwrap();
        assert!(verify_matching(&h, &m, true));
    }

    #[test]
    fn pipeline_matches_uneven_template_profile() {
        // marked sizes (5,5,4): even sum, nontrivial balancing stage.
        let p = H0Params::new(3, 10, vec![5, 5, 4]).unwrap();
        let h = build_h0(&p).unwrap();
        let report = run_pipeline(&h, &PipelineConfig::default()).unwrap();
        assert!(report.succeeded(), "failure: {:?}", report.failure);
        assert!(verify_matching(&h, &report.matching.unwrap(), true));
    }

    #[test]
    fn pipeline_uses_parity_edge_on_odd_marked_side() {
        // canonical odd-sum template at n = 10 plus every tuple carrying
        // exactly one marked vertex, in class 0: the marked side stays odd,
        // so one of the added edges must be spent to even it out
        let mut h = build_h0_canonical(3, 10).unwrap();
        for a in 0..5 {
            for b in 5..10 {
                for c in 5..10 {
                    h.add_edge(&[a, b, c]).unwrap();
                }
            }
        }
        let report = run_pipeline(&h, &PipelineConfig::default()).unwrap();
        let e0 = report.state.parity_edge.clone().expect("parity edge used");
        let marked_hits = e0
            .iter()
            .enumerate()
            .filter(|&(c, &l)| report.state.marked_side[c].contains(&l))
            .count();
        assert_eq!(marked_hits % 2, 1);
        assert!(report.succeeded(), "failure: {:?}", report.failure);
        assert!(verify_matching(&h, &report.matching.unwrap(), true));
    }

    #[test]
    fn odd_finish_can_dissolve_interior_edges() {
        // plain pools fully covered by the interior matching: pivot
        // transversals must come from dissolving interior edges
        let h = PartiteHypergraph::complete(3, 9).unwrap();
        let plain: ClassSets = (0..3).map(|_| (0..3).collect()).collect();
        let marked: ClassSets = (0..3).map(|_| (3..7).collect()).collect();
        let interior = Matching::from_edges(vec![vec![0, 0, 0], vec![1, 1, 1], vec![2, 2, 2]]);
        let types = vec![interior, Matching::new(), Matching::new(), Matching::new()];
        let m = finish_odd_k(&h, &plain, &marked, types, &PipelineConfig::default()).unwrap();
        assert_eq!(m.len(), 7); // 21 pool vertices
        assert!(verify_matching(&h, &m, false));
        let covered = m.covered();
        for c in 0..3 {
            for &l in plain[c].iter().chain(&marked[c]) {
                assert!(covered.contains(&Vertex::new(c, l)));
            }
        }
    }

    #[test]
    fn pipeline_detects_obstruction() {
        let h = build_h0_canonical(3, 2).unwrap();
        match run_pipeline(&h, &PipelineConfig::default()) {
            Err(PipelineError::Obstruction(cert)) => assert!(cert.verify(&h)),
            other => panic!("expected obstruction, got {other:?}"),
        }
    }

    #[test]
    fn pipeline_rejects_low_degree() {
        let h = PartiteHypergraph::new(3, 4).unwrap();
        assert!(matches!(
            run_pipeline(&h, &PipelineConfig::default()),
            Err(PipelineError::DegreeTooLow { .. })
        ));
    }

    #[test]
    fn pipeline_strict_mode_rejects_small_n() {
        let h = PartiteHypergraph::complete(3, 4).unwrap();
        let cfg = PipelineConfig {
            strict_constants: true,
            ..Default::default()
        };
        assert!(matches!(
            run_pipeline(&h, &cfg),
            Err(PipelineError::ClassSizeTooSmall { .. })
        ));
    }

    #[test]
    fn pipeline_even_k() {
        let h = build_h0_canonical(4, 4).unwrap();
        // marked sum 4*2 = 8 even; a perfect matching exists
        let report = run_pipeline(&h, &PipelineConfig::default()).unwrap();
        assert!(report.succeeded(), "failure: {:?}", report.failure);
        assert!(verify_matching(&h, &report.matching.unwrap(), true));
    }

    #[test]
    fn next_combination_walks_lexicographically() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }
}

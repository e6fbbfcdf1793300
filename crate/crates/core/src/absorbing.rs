//! Absorbing-method matcher for graphs far from the half-split template.
//!
//! The engine samples small per-class vertex blocks, keeps the ones whose
//! induced subgraph has a perfect matching, and unions those matchings into
//! a reservoir. A near-perfect matching of the rest leaves (at most) one
//! legal k-set uncovered, which is then spliced into the reservoir through a
//! locally rewired block. Which block shape is sampled follows a dichotomy:
//! either every pair of large subsets spans many edges (k-blocks) or some
//! class carries many high-degree co-tuples (k+1 blocks).

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hypergraph::{Edge, LegalSet, Matching, PartiteHypergraph, Vertex};
use crate::matcher::{find_perfect_matching, max_matching, verify_matching, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    E,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::E => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbsorbConfig {
    pub log_base: LogBase,
    /// Replace the log^5(n) / C(n,k)^k block-sampling probability.
    pub sample_probability_override: Option<f64>,
    /// Disjoint witnesses demanded per probed set; None means k.
    pub family_target_per_set: Option<usize>,
    /// Total candidate-block draws allowed across retries.
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for AbsorbConfig {
    fn default() -> Self {
        AbsorbConfig {
            log_base: LogBase::E,
            sample_probability_override: None,
            family_target_per_set: None,
            max_samples: 20_000,
            seed: 0,
        }
    }
}

impl AbsorbConfig {
    pub fn target_for(&self, k: usize) -> usize {
        self.family_target_per_set.unwrap_or(k)
    }
}

/// Number of edges contained in the union of the per-class pools.
pub fn edge_count_within(h: &PartiteHypergraph, pools: &[BTreeSet<usize>]) -> usize {
    h.count_edges_in(pools)
}

/// Legal (k-1)-sets avoiding class `j` whose degree is at least
/// (1/2 + 2/log n) n.
pub fn lambda_set(h: &PartiteHypergraph, j: usize, cfg: &AbsorbConfig) -> Vec<LegalSet> {
    let m = h
        .equal_class_sizes()
        .expect("lambda sets need equal class sizes");
    assert!(m >= 2, "log threshold needs n >= 2");
    let threshold = (0.5 + 2.0 / cfg.log_base.log(m as f64)) * m as f64;
    let k = h.k();
    let classes: Vec<usize> = (0..k).filter(|&c| c != j).collect();
    let mut out = Vec::new();
    let locals: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| h.class_locals(c).collect())
        .collect();
    let mut pick = vec![0usize; classes.len()];
    'outer: loop {
        let verts: Vec<Vertex> = classes
            .iter()
            .enumerate()
            .map(|(idx, &c)| Vertex::new(c, locals[idx][pick[idx]]))
            .collect();
        let set = LegalSet::from_vertices(k, &verts).expect("distinct classes");
        if (h.degree(&set).expect("alive vertices") as f64) >= threshold {
            out.push(set);
        }
        let mut d = classes.len();
        loop {
            if d == 0 {
                break 'outer;
            }
            d -= 1;
            pick[d] += 1;
            if pick[d] < locals[d].len() {
                break;
            }
            pick[d] = 0;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dichotomy {
    DenseSubsets,
    BigLambda,
    Both,
    Neither,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub verdict: Dichotomy,
    pub dense_holds: bool,
    /// Whether the dense-subset minimum was enumerated exactly or sampled.
    pub dense_exact: bool,
    pub dense_samples: usize,
    /// A violating subset tuple and its edge count, when one was found.
    pub dense_witness: Option<(Vec<Vec<usize>>, usize)>,
    pub lambda_sizes: Vec<usize>,
    /// First class whose high-degree set is large enough.
    pub lambda_class: Option<usize>,
}

/// Evaluate both dichotomy conclusions directly. Small instances enumerate
/// the extreme (minimum-size) subset tuples — the edge count is monotone in
/// each pool, so the minimum lives there; larger instances sample subset
/// tuples and can only refute with a witness.
pub fn classify_dichotomy(h: &PartiteHypergraph, cfg: &AbsorbConfig) -> DichotomyReport {
    let m = h
        .equal_class_sizes()
        .expect("dichotomy needs equal class sizes");
    let k = h.k();
    let logn = cfg.log_base.log(m as f64);
    let gamma = 1.0 / logn;
    let min_size = (((0.5 - gamma) * m as f64).ceil()).max(0.0) as usize;
    let dense_threshold = (m as f64).powi(k as i32) / logn.powi(3);

    let locals: Vec<Vec<usize>> = (0..k).map(|c| h.class_locals(c).collect()).collect();
    let choices_per_class = binom(m, min_size);
    let total_choices = choices_per_class.saturating_pow(k as u32);
    let mut dense_holds = true;
    let mut dense_witness = None;
    let dense_exact = total_choices <= 20_000;
    let mut dense_samples = 0usize;
    if dense_exact {
        let per_class: Vec<Vec<Vec<usize>>> = locals
            .iter()
            .map(|ls| ls.iter().copied().combinations(min_size).collect())
            .collect();
        let mut idx = vec![0usize; k];
        'all: loop {
            let pools: Vec<BTreeSet<usize>> = idx
                .iter()
                .enumerate()
                .map(|(c, &i)| per_class[c][i].iter().copied().collect())
                .collect();
            let count = h.count_edges_in(&pools);
            dense_samples += 1;
            if (count as f64) < dense_threshold {
                dense_holds = false;
                dense_witness = Some((
                    pools.iter().map(|p| p.iter().copied().collect()).collect(),
                    count,
                ));
                break 'all;
            }
            let mut c = k;
            loop {
                if c == 0 {
                    break 'all;
                }
                c -= 1;
                idx[c] += 1;
                if idx[c] < per_class[c].len() {
                    break;
                }
                idx[c] = 0;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0xd1c0);
        // keep the total membership scans bounded
        let per_sample = (min_size.max(1) as u64).pow(k as u32);
        let samples = ((50_000_000 / per_sample.max(1)) as usize).clamp(20, 400);
        for _ in 0..samples {
            let pools: Vec<BTreeSet<usize>> = locals
                .iter()
                .map(|ls| {
                    let mut pool = ls.clone();
                    partial_shuffle(&mut pool, min_size, &mut rng);
                    pool.into_iter().take(min_size).collect()
                })
                .collect();
            let count = h.count_edges_in(&pools);
            dense_samples += 1;
            if (count as f64) < dense_threshold {
                dense_holds = false;
                dense_witness = Some((
                    pools.iter().map(|p| p.iter().copied().collect()).collect(),
                    count,
                ));
                break;
            }
        }
    }

    let lambda_threshold = (m as f64).powi(k as i32 - 1) / logn;
    let lambda_sizes: Vec<usize> = (0..k).map(|j| lambda_set(h, j, cfg).len()).collect();
    let lambda_class = lambda_sizes
        .iter()
        .position(|&s| (s as f64) >= lambda_threshold);

    let verdict = match (dense_holds, lambda_class.is_some()) {
        (true, true) => Dichotomy::Both,
        (true, false) => Dichotomy::DenseSubsets,
        (false, true) => Dichotomy::BigLambda,
        (false, false) => Dichotomy::Neither,
    };
    DichotomyReport {
        verdict,
        dense_holds,
        dense_exact,
        dense_samples,
        dense_witness,
        lambda_sizes,
        lambda_class,
    }
}

fn partial_shuffle(pool: &mut [usize], take: usize, rng: &mut ChaCha8Rng) {
    let len = pool.len();
    for i in 0..take.min(len.saturating_sub(1)) {
        let j = rng.gen_range(i..len);
        pool.swap(i, j);
    }
}

fn binom(n: usize, mut r: usize) -> u64 {
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

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    KMatching,
    KPlusOneMatching,
}

/// A verified local-rewiring certificate: removing `edges` from a matching
/// that covers everything but `s` and inserting `replacement` covers `s`
/// as well.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbsorbingWitness {
    pub kind: WitnessKind,
    /// The absorbed legal k-set, one local per class.
    pub s: Edge,
    /// For `KMatching`: edges[c] donates its class-c slot. For
    /// `KPlusOneMatching`: edges[0] is the spare edge, edges[1 + c] donates
    /// its class-c slot.
    pub edges: Vec<Edge>,
    /// The rewiring class of the spare edge (k+1 kind only).
    pub special_class: Option<usize>,
    pub replacement: Vec<Edge>,
}

/// Build the k-matching witness for `s` out of `edges[c]` donating class c,
/// if every rewired tuple is an edge.
pub fn derive_k_witness(
    h: &PartiteHypergraph,
    s: &Edge,
    edges: &[Edge],
) -> Option<AbsorbingWitness> {
    let k = h.k();
    if edges.len() != k || s.len() != k {
        return None;
    }
    if !all_disjoint(edges) || touches(edges, s) {
        return None;
    }
    if edges.iter().any(|e| !h.has_edge(e)) {
        return None;
    }
    let mut replacement = Vec::with_capacity(k + 1);
    let mut freed: Edge = vec![0; k];
    for (c, e) in edges.iter().enumerate() {
        let mut swapped = e.clone();
        freed[c] = swapped[c];
        swapped[c] = s[c];
        if !h.has_edge(&swapped) {
            return None;
        }
        replacement.push(swapped);
    }
    if !h.has_edge(&freed) {
        return None;
    }
    replacement.push(freed);
    Some(AbsorbingWitness {
        kind: WitnessKind::KMatching,
        s: s.clone(),
        edges: edges.to_vec(),
        special_class: None,
        replacement,
    })
}

/// Build the (k+1)-matching witness: `edges[0]` is the spare edge rewired in
/// class `j`, `edges[1 + c]` donates its class-c slot.
pub fn derive_k1_witness(
    h: &PartiteHypergraph,
    s: &Edge,
    edges: &[Edge],
    j: usize,
) -> Option<AbsorbingWitness> {
    let k = h.k();
    if edges.len() != k + 1 || s.len() != k || j >= k {
        return None;
    }
    if !all_disjoint(edges) || touches(edges, s) {
        return None;
    }
    if edges.iter().any(|e| !h.has_edge(e)) {
        return None;
    }
    let spare = &edges[0];
    let mut replacement = Vec::with_capacity(k + 2);
    let mut freed: Edge = vec![0; k];
    for c in 0..k {
        let mut swapped = edges[1 + c].clone();
        freed[c] = swapped[c];
        swapped[c] = s[c];
        if !h.has_edge(&swapped) {
            return None;
        }
        replacement.push(swapped);
    }
    // the spare edge hands its class-j vertex to the freed tuple
    let mut bridged = spare.clone();
    let spare_j = bridged[j];
    bridged[j] = freed[j];
    if !h.has_edge(&bridged) {
        return None;
    }
    let mut freed_patched = freed;
    freed_patched[j] = spare_j;
    if !h.has_edge(&freed_patched) {
        return None;
    }
    replacement.push(bridged);
    replacement.push(freed_patched);
    Some(AbsorbingWitness {
        kind: WitnessKind::KPlusOneMatching,
        s: s.clone(),
        edges: edges.to_vec(),
        special_class: Some(j),
        replacement,
    })
}

fn all_disjoint(edges: &[Edge]) -> bool {
    let k = edges.first().map(Vec::len).unwrap_or(0);
    for c in 0..k {
        let mut seen = BTreeSet::new();
        for e in edges {
            if !seen.insert(e[c]) {
                return false;
            }
        }
    }
    true
}

fn touches(edges: &[Edge], s: &Edge) -> bool {
    edges.iter().any(|e| e.iter().zip(s).any(|(a, b)| a == b))
}

/// Check every definitional condition of a stored witness: membership of all
/// named tuples, pairwise distinctness of all named vertices, and the exact
/// swap structure connecting `edges`, `s`, and `replacement`.
pub fn verify_absorbing(h: &PartiteHypergraph, w: &AbsorbingWitness) -> bool {
    let expected = match w.kind {
        WitnessKind::KMatching => derive_k_witness(h, &w.s, &w.edges),
        WitnessKind::KPlusOneMatching => match w.special_class {
            Some(j) => derive_k1_witness(h, &w.s, &w.edges, j),
            None => None,
        },
    };
    let Some(expected) = expected else {
        return false;
    };
    if expected.replacement != w.replacement {
        return false;
    }
    // replacement edges must form a matching covering V(edges) + s exactly
    if !all_disjoint(&w.replacement) {
        return false;
    }
    let mut covered: BTreeSet<Vertex> = BTreeSet::new();
    for e in &w.replacement {
        for (c, &l) in e.iter().enumerate() {
            covered.insert(Vertex::new(c, l));
        }
    }
    let mut wanted: BTreeSet<Vertex> = BTreeSet::new();
    for e in &w.edges {
        for (c, &l) in e.iter().enumerate() {
            wanted.insert(Vertex::new(c, l));
        }
    }
    for (c, &l) in w.s.iter().enumerate() {
        wanted.insert(Vertex::new(c, l));
    }
    covered == wanted
}

/// Replace the witness edges inside `m` by the witness replacement.
/// `m` must contain every witness edge.
pub fn splice(m: &Matching, w: &AbsorbingWitness) -> Matching {
    let drop: BTreeSet<&Edge> = w.edges.iter().collect();
    let mut edges: Vec<Edge> = m
        .edges()
        .iter()
        .filter(|e| !drop.contains(e))
        .cloned()
        .collect();
    edges.extend(w.replacement.iter().cloned());
    Matching::from_edges(edges)
}

/// Try every role assignment of `block_pm` (and rewiring class for the k+1
/// kind) and return the first witness absorbing `s`.
pub fn block_absorbs(
    h: &PartiteHypergraph,
    s: &Edge,
    block_pm: &[Edge],
    kind: WitnessKind,
) -> Option<AbsorbingWitness> {
    let k = h.k();
    match kind {
        WitnessKind::KMatching => {
            if block_pm.len() != k {
                return None;
            }
            for perm in block_pm.iter().permutations(k) {
                let ordered: Vec<Edge> = perm.into_iter().cloned().collect();
                if let Some(w) = derive_k_witness(h, s, &ordered) {
                    return Some(w);
                }
            }
            None
        }
        WitnessKind::KPlusOneMatching => {
            if block_pm.len() != k + 1 {
                return None;
            }
            for spare_idx in 0..block_pm.len() {
                let rest: Vec<&Edge> = block_pm
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != spare_idx)
                    .map(|(_, e)| e)
                    .collect();
                for perm in rest.iter().permutations(k) {
                    let mut ordered: Vec<Edge> = Vec::with_capacity(k + 1);
                    ordered.push(block_pm[spare_idx].clone());
                    ordered.extend(perm.into_iter().map(|&e| e.clone()));
                    for j in 0..k {
                        if let Some(w) = derive_k1_witness(h, s, &ordered, j) {
                            return Some(w);
                        }
                    }
                }
            }
            None
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CountResult {
    pub count: f64,
    pub exhaustive: bool,
    pub inspected: u64,
}

/// Count matchings of the right size that absorb `s`, exhaustively while the
/// enumeration fits the budget, by uniform sampling (with extrapolation)
/// otherwise.
pub fn count_absorbing(
    h: &PartiteHypergraph,
    s: &Edge,
    kind: WitnessKind,
    budget: u64,
    seed: u64,
) -> CountResult {
    let k = h.k();
    let size = match kind {
        WitnessKind::KMatching => k,
        WitnessKind::KPlusOneMatching => k + 1,
    };
    let edges: Vec<Edge> = h
        .edge_list()
        .into_iter()
        .filter(|e| !touches(std::slice::from_ref(e), s))
        .collect();
    if (edges.len() as u64) < size as u64 {
        return CountResult {
            count: 0.0,
            exhaustive: true,
            inspected: 0,
        };
    }
    let space = binom(edges.len(), size);
    if space <= budget {
        let mut count = 0u64;
        let mut inspected = 0u64;
        for combo in edges.iter().combinations(size) {
            inspected += 1;
            let tuple: Vec<Edge> = combo.into_iter().cloned().collect();
            if !all_disjoint(&tuple) {
                continue;
            }
            if block_absorbs(h, s, &tuple, kind).is_some() {
                count += 1;
            }
        }
        CountResult {
            count: count as f64,
            exhaustive: true,
            inspected,
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0xc047);
        let samples = budget.max(1);
        let mut hits = 0u64;
        for _ in 0..samples {
            let mut picked: Vec<usize> = Vec::with_capacity(size);
            while picked.len() < size {
                let i = rng.gen_range(0..edges.len());
                if !picked.contains(&i) {
                    picked.push(i);
                }
            }
            let tuple: Vec<Edge> = picked.iter().map(|&i| edges[i].clone()).collect();
            if all_disjoint(&tuple) && block_absorbs(h, s, &tuple, kind).is_some() {
                hits += 1;
            }
        }
        CountResult {
            count: space as f64 * hits as f64 / samples as f64,
            exhaustive: false,
            inspected: samples,
        }
    }
}

/// One sampled block: per-class pools and the matching found inside them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Block {
    pub pools: Vec<Vec<usize>>,
    pub pm: Vec<Edge>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbsorbingFamily {
    pub kind: WitnessKind,
    pub blocks: Vec<Block>,
    /// Union of the block matchings.
    pub m_prime: Matching,
    /// Probe -> disjoint witnesses found inside the family.
    pub coverage: BTreeMap<Edge, Vec<AbsorbingWitness>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, thiserror::Error)]
pub enum AbsorbError {
    #[error(
        "no family with the demanded coverage after {attempts} attempts; deficits: {deficits:?}"
    )]
    FamilyNotFound {
        attempts: usize,
        /// probe -> witnesses still missing
        deficits: Vec<(Edge, usize)>,
    },
}

/// Draw ~Poisson(p * C(n, size)^k) candidate blocks from a seeded stream.
fn draw_blocks(
    h: &PartiteHypergraph,
    size: usize,
    lambda: f64,
    rng: &mut ChaCha8Rng,
    budget_left: usize,
    forbidden: &[BTreeSet<usize>],
) -> Vec<Vec<Vec<usize>>> {
    let k = h.k();
    let count = poisson(lambda, rng).min(budget_left as u64) as usize;
    let locals: Vec<Vec<usize>> = (0..k)
        .map(|c| {
            h.class_locals(c)
                .filter(|l| !forbidden[c].contains(l))
                .collect()
        })
        .collect();
    if locals.iter().any(|ls| ls.len() < size) {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let block: Vec<Vec<usize>> = locals
            .iter()
            .map(|ls| {
                let mut pool = ls.clone();
                partial_shuffle(&mut pool, size, rng);
                let mut take: Vec<usize> = pool.into_iter().take(size).collect();
                take.sort_unstable();
                take
            })
            .collect();
        out.push(block);
    }
    out
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    // sum of Exp(1) arrivals; robust for large lambda
    let mut t = 0.0f64;
    let mut count = 0u64;
    while t < lambda {
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        t += -u.ln();
        if t < lambda {
            count += 1;
        }
    }
    count
}

fn block_matching(h: &PartiteHypergraph, pools: &[Vec<usize>]) -> Option<Vec<Edge>> {
    let (sub, pool) = h.induced(pools);
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

fn blocks_overlap(a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    a.iter()
        .zip(b)
        .any(|(x, y)| x.iter().any(|l| y.contains(l)))
}

/// Sample, validate, and de-overlap blocks; verify that every probe has
/// enough disjoint witnesses; retry with doubled probability otherwise.
///
/// Sampled blocks avoid the probe vertices: a block touching a probe can
/// never absorb it, and the full algorithm only ever probes sets that are
/// disjoint from the reservoir by construction.
pub fn build_absorbing_family(
    h: &PartiteHypergraph,
    probes: &[Edge],
    cfg: &AbsorbConfig,
) -> Result<AbsorbingFamily, AbsorbError> {
    let m = h
        .equal_class_sizes()
        .expect("family sampling needs equal class sizes");
    let k = h.k();
    let report = classify_dichotomy(h, cfg);
    let kind = match report.verdict {
        Dichotomy::BigLambda => WitnessKind::KPlusOneMatching,
        _ => WitnessKind::KMatching,
    };
    build_family_with_kind(h, probes, cfg, kind, m, k)
}

pub(crate) fn build_family_with_kind(
    h: &PartiteHypergraph,
    probes: &[Edge],
    cfg: &AbsorbConfig,
    kind: WitnessKind,
    m: usize,
    k: usize,
) -> Result<AbsorbingFamily, AbsorbError> {
    let size = match kind {
        WitnessKind::KMatching => k,
        WitnessKind::KPlusOneMatching => k + 1,
    };
    let mut forbidden: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    for s in probes {
        for (c, &l) in s.iter().enumerate() {
            forbidden[c].insert(l);
        }
    }
    let target = cfg.target_for(k);
    let logn = cfg.log_base.log(m.max(2) as f64);
    let total_blocks = binom(m, size).saturating_pow(k as u32).max(1) as f64;
    let mut p = cfg
        .sample_probability_override
        .unwrap_or((logn.powi(5) / total_blocks).min(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0xfa31);
    let mut budget = cfg.max_samples;
    let mut attempts = 0usize;
    let mut last_deficits: Vec<(Edge, usize)> = Vec::new();

    while budget > 0 {
        attempts += 1;
        let lambda = (p * total_blocks).max(1.0);
        let candidates = draw_blocks(h, size, lambda, &mut rng, budget, &forbidden);
        budget = budget.saturating_sub(candidates.len().max(1));

        // Validating blocks is independent per candidate; order is kept.
        let validated: Vec<Option<Vec<Edge>>> = candidates
            .par_iter()
            .map(|pools| block_matching(h, pools))
            .collect();

        let mut blocks: Vec<Block> = Vec::new();
        let max_blocks = (m.saturating_sub(1) / size).max(1);
        for (pools, pm) in candidates.iter().zip(validated) {
            let Some(pm) = pm else { continue };
            if blocks.len() >= max_blocks {
                break;
            }
            if blocks.iter().any(|b| blocks_overlap(&b.pools, pools)) {
                continue;
            }
            blocks.push(Block {
                pools: pools.clone(),
                pm,
            });
        }

        let mut coverage: BTreeMap<Edge, Vec<AbsorbingWitness>> = BTreeMap::new();
        let mut deficits: Vec<(Edge, usize)> = Vec::new();
        for s in probes {
            let witnesses: Vec<AbsorbingWitness> = blocks
                .iter()
                .filter_map(|b| block_absorbs(h, s, &b.pm, kind))
                .collect();
            if witnesses.len() < target {
                deficits.push((s.clone(), target - witnesses.len()));
            }
            coverage.insert(s.clone(), witnesses);
        }
        if deficits.is_empty() {
            let m_prime =
                Matching::from_edges(blocks.iter().flat_map(|b| b.pm.iter().cloned()).collect());
            debug_assert!(verify_matching(h, &m_prime, false));
            return Ok(AbsorbingFamily {
                kind,
                blocks,
                m_prime,
                coverage,
            });
        }
        last_deficits = deficits;
        p = (p * 2.0).min(1.0);
    }
    Err(AbsorbError::FamilyNotFound {
        attempts,
        deficits: last_deficits,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub probability: f64,
    pub blocks_kept: usize,
    pub near_perfect: Option<usize>,
    pub note: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbsorptionReport {
    pub dichotomy: Dichotomy,
    pub kind: WitnessKind,
    /// Blocks kept in the deciding attempt.
    pub family_size: usize,
    /// Leftover sets that had to be absorbed (lazy probing: 0 or 1).
    pub probes_covered: usize,
    pub attempts: Vec<AttemptRecord>,
    pub matching: Option<Matching>,
    pub failure: Option<String>,
}

impl AbsorptionReport {
    pub fn succeeded(&self) -> bool {
        self.matching.is_some()
    }
}

/// Absorb-then-finish perfect matching: build a reservoir family, match the
/// rest nearly perfectly, and splice the single leftover set through an
/// absorbing block. Retries with doubled sampling probability; every
/// returned matching is verified.
pub fn perfect_matching_via_absorption(
    h: &PartiteHypergraph,
    cfg: &AbsorbConfig,
) -> AbsorptionReport {
    let m = h
        .equal_class_sizes()
        .expect("absorption needs equal class sizes");
    let k = h.k();
    let dich = classify_dichotomy(h, cfg);
    let kind = match dich.verdict {
        Dichotomy::BigLambda => WitnessKind::KPlusOneMatching,
        _ => WitnessKind::KMatching,
    };
    let size = match kind {
        WitnessKind::KMatching => k,
        WitnessKind::KPlusOneMatching => k + 1,
    };
    let mut report = AbsorptionReport {
        dichotomy: dich.verdict,
        kind,
        family_size: 0,
        probes_covered: 0,
        attempts: Vec::new(),
        matching: None,
        failure: None,
    };

    let logn = cfg.log_base.log(m.max(2) as f64);
    let total_blocks = binom(m, size).saturating_pow(k as u32).max(1) as f64;
    let mut p = cfg
        .sample_probability_override
        .unwrap_or((logn.powi(5) / total_blocks).min(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0xab50);
    let mut budget = cfg.max_samples;
    let solver = SolverConfig::default();
    let forbidden: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];

    while budget > 0 {
        let lambda = (p * total_blocks).max(1.0);
        let candidates = draw_blocks(h, size, lambda, &mut rng, budget, &forbidden);
        budget = budget.saturating_sub(candidates.len().max(1));
        let validated: Vec<Option<Vec<Edge>>> = candidates
            .par_iter()
            .map(|pools| block_matching(h, pools))
            .collect();
        let mut blocks: Vec<Block> = Vec::new();
        let max_blocks = (m.saturating_sub(1) / size).max(1);
        for (pools, pm) in candidates.iter().zip(validated) {
            let Some(pm) = pm else { continue };
            if blocks.len() >= max_blocks {
                break;
            }
            if blocks.iter().any(|b| blocks_overlap(&b.pools, pools)) {
                continue;
            }
            blocks.push(Block {
                pools: pools.clone(),
                pm,
            });
        }
        let reservoir =
            Matching::from_edges(blocks.iter().flat_map(|b| b.pm.iter().cloned()).collect());
        let removed: BTreeSet<Vertex> = reservoir.covered();
        let rest = h.remove_vertices(&removed);
        let rest_size = m - reservoir.len();

        let mm = max_matching(&rest, &solver);
        let Some((matched, near)) = mm.completed() else {
            report.attempts.push(AttemptRecord {
                probability: p,
                blocks_kept: blocks.len(),
                near_perfect: None,
                note: "max matching timed out".into(),
            });
            p = (p * 2.0).min(1.0);
            continue;
        };

        if matched == rest_size {
            let full = Matching::union([&reservoir, &near]);
            if verify_matching(h, &full, true) {
                report.attempts.push(AttemptRecord {
                    probability: p,
                    blocks_kept: blocks.len(),
                    near_perfect: Some(matched),
                    note: "rest matched perfectly; no absorption needed".into(),
                });
                report.family_size = blocks.len();
                report.matching = Some(full);
                return report;
            }
        } else if matched + 1 == rest_size {
            // exactly one leftover vertex per class: the probe set
            let covered = near.covered();
            let leftover: Vec<usize> = (0..k)
                .map(|c| {
                    rest.class_locals(c)
                        .find(|&l| !covered.contains(&Vertex::new(c, l)))
                        .expect("one uncovered vertex per class")
                })
                .collect();
            let hit = blocks
                .iter()
                .find_map(|b| block_absorbs(h, &leftover, &b.pm, kind));
            match hit {
                Some(witness) => {
                    debug_assert!(verify_absorbing(h, &witness));
                    let spliced = splice(&reservoir, &witness);
                    let full = Matching::union([&spliced, &near]);
                    if verify_matching(h, &full, true) {
                        report.attempts.push(AttemptRecord {
                            probability: p,
                            blocks_kept: blocks.len(),
                            near_perfect: Some(matched),
                            note: "leftover set absorbed".into(),
                        });
                        report.family_size = blocks.len();
                        report.probes_covered = 1;
                        report.matching = Some(full);
                        return report;
                    }
                    report.attempts.push(AttemptRecord {
                        probability: p,
                        blocks_kept: blocks.len(),
                        near_perfect: Some(matched),
                        note: "splice failed verification".into(),
                    });
                }
                None => {
                    report.attempts.push(AttemptRecord {
                        probability: p,
                        blocks_kept: blocks.len(),
                        near_perfect: Some(matched),
                        note: format!("no block absorbs leftover {leftover:?}"),
                    });
                }
            }
        } else {
            report.attempts.push(AttemptRecord {
                probability: p,
                blocks_kept: blocks.len(),
                near_perfect: Some(matched),
                note: format!(
                    "near-perfect shortfall: matched {matched} of {rest_size} in the rest"
                ),
            });
        }
        p = (p * 2.0).min(1.0);
    }
    report.failure = Some("sampling budget exhausted without a perfect matching".into());
    report
}

//! Extremal constructions and the edge-deletion closeness measure.
//!
//! The template family is parameterized by one marked subset per class; its
//! edges are exactly the legal tuples meeting the union of marked sets an
//! even number of times. Closeness of a graph to the canonical template is
//! the minimum number of template edges missing from the graph, over all
//! choices of half-sized marked sets.

use std::collections::BTreeSet;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hypergraph::{HypergraphError, PartiteHypergraph};

/// Parameters of the parity template graph: class count, class size, marked
/// set sizes, and optionally the explicit marked sets (defaults to the lowest
/// `d[i]` locals of each class).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct H0Params {
    pub k: usize,
    pub n: usize,
    pub d: Vec<usize>,
    pub d_choice: Option<Vec<Vec<usize>>>,
}

impl H0Params {
    pub fn new(k: usize, n: usize, d: Vec<usize>) -> Result<Self, HypergraphError> {
        if d.len() != k {
            return Err(HypergraphError::BadParameters(format!(
                "need {k} set sizes, got {}",
                d.len()
            )));
        }
        if let Some(&bad) = d.iter().find(|&&di| di > n) {
            return Err(HypergraphError::BadParameters(format!(
                "set size {bad} exceeds class size {n}"
            )));
        }
        Ok(H0Params {
            k,
            n,
            d,
            d_choice: None,
        })
    }

    /// All marked sets of size `floor(n/2)`.
    pub fn canonical(k: usize, n: usize) -> Self {
        H0Params {
            k,
            n,
            d: vec![n / 2; k],
            d_choice: None,
        }
    }

    pub fn with_sets(k: usize, n: usize, sets: Vec<Vec<usize>>) -> Result<Self, HypergraphError> {
        let d: Vec<usize> = sets.iter().map(|s| s.len()).collect();
        let mut p = Self::new(k, n, d)?;
        for (c, s) in sets.iter().enumerate() {
            let distinct: BTreeSet<usize> = s.iter().copied().collect();
            if distinct.len() != s.len() || s.iter().any(|&l| l >= n) {
                return Err(HypergraphError::BadParameters(format!(
                    "marked set for class {c} invalid"
                )));
            }
        }
        p.d_choice = Some(sets);
        Ok(p)
    }

    /// The explicit marked sets, defaulting to the lowest locals.
    pub fn marked_sets(&self) -> Vec<Vec<usize>> {
        match &self.d_choice {
            Some(sets) => sets.clone(),
            None => self.d.iter().map(|&di| (0..di).collect()).collect(),
        }
    }

    pub fn size_sum(&self) -> usize {
        self.d.iter().sum()
    }
}

/// Build the template graph for `p`: all legal tuples with an even number of
/// marked vertices.
pub fn build_h0(p: &H0Params) -> Result<PartiteHypergraph, HypergraphError> {
    let mut h = PartiteHypergraph::new(p.k, p.n)?;
    let sets = p.marked_sets();
    let masks: Vec<Vec<bool>> = sets
        .iter()
        .map(|s| {
            let mut m = vec![false; p.n];
            for &l in s {
                m[l] = true;
            }
            m
        })
        .collect();
    let mut tuple = vec![0usize; p.k];
    loop {
        let hits = tuple
            .iter()
            .enumerate()
            .filter(|&(c, &l)| masks[c][l])
            .count();
        if hits % 2 == 0 {
            h.add_edge(&tuple)?;
        }
        // odometer over the n^k tuples
        let mut c = p.k;
        loop {
            if c == 0 {
                return Ok(h);
            }
            c -= 1;
            tuple[c] += 1;
            if tuple[c] < p.n {
                break;
            }
            tuple[c] = 0;
        }
    }
}

/// Template with all marked sets of size `floor(n/2)`.
pub fn build_h0_canonical(k: usize, n: usize) -> Result<PartiteHypergraph, HypergraphError> {
    build_h0(&H0Params::canonical(k, n))
}

/// Closed-form edge count of the template: sum over even-size class subsets
/// T of prod_{i in T} d_i * prod_{i not in T} (n - d_i).
pub fn h0_edge_count(n: usize, d: &[usize]) -> usize {
    let k = d.len();
    let mut total = 0usize;
    for subset in 0usize..(1 << k) {
        if (subset.count_ones() & 1) == 1 {
            continue;
        }
        let mut prod = 1usize;
        for (i, &di) in d.iter().enumerate() {
            prod *= if subset >> i & 1 == 1 { di } else { n - di };
        }
        total += prod;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    Exact,
    LocalSearch,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosenessConfig {
    pub epsilon: f64,
    pub search_mode: SearchMode,
    /// Local-search restarts.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for ClosenessConfig {
    fn default() -> Self {
        ClosenessConfig {
            epsilon: 0.01,
            search_mode: SearchMode::Exact,
            max_iters: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosenessResult {
    /// Number of template edges absent from the graph at the best witness.
    pub cost: usize,
    /// Witness parameters carrying the minimizing marked sets.
    pub witness: H0Params,
    /// Whether the result is the exact minimum (local search gives an upper
    /// bound only).
    pub exact: bool,
}

/// Template edges missing from `h` for explicit marked sets: the number of
/// even-parity tuples over alive vertices that are not edges of `h`.
pub fn cost_for_sets(h: &PartiteHypergraph, sets: &[Vec<usize>]) -> usize {
    let masks: Vec<Vec<bool>> = sets
        .iter()
        .map(|s| {
            let mut m = vec![false; h.n()];
            for &l in s {
                m[l] = true;
            }
            m
        })
        .collect();
    let mut cost = 0usize;
    for_each_alive_tuple(h, &mut |tuple, idx| {
        let hits = tuple
            .iter()
            .enumerate()
            .filter(|&(c, &l)| masks[c][l])
            .count();
        if hits % 2 == 0 && !h.has_tuple_index(idx) {
            cost += 1;
        }
    });
    cost
}

fn for_each_alive_tuple(h: &PartiteHypergraph, f: &mut impl FnMut(&[usize], usize)) {
    let locals: Vec<Vec<usize>> = (0..h.k()).map(|c| h.class_locals(c).collect()).collect();
    let mut tuple = vec![0usize; h.k()];
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

/// Minimum missing-edge count over all half-sized marked-set choices
/// (exhaustive in `Exact` mode, hill-climbing with seeded restarts in
/// `LocalSearch` mode), together with the minimizing witness.
pub fn closeness(h: &PartiteHypergraph, cfg: &ClosenessConfig) -> ClosenessResult {
    let m = h
        .equal_class_sizes()
        .expect("closeness needs equal class sizes");
    let half = m / 2;
    let locals: Vec<Vec<usize>> = (0..h.k()).map(|c| h.class_locals(c).collect()).collect();
    match cfg.search_mode {
        SearchMode::Exact => {
            let per_class: Vec<Vec<Vec<usize>>> = locals
                .iter()
                .map(|ls| {
                    ls.iter()
                        .copied()
                        .combinations(half)
                        .collect::<Vec<Vec<usize>>>()
                })
                .collect();
            let mut best: Option<(usize, Vec<Vec<usize>>)> = None;
            let mut choice: Vec<usize> = vec![0; h.k()];
            loop {
                let sets: Vec<Vec<usize>> = choice
                    .iter()
                    .enumerate()
                    .map(|(c, &i)| per_class[c][i].clone())
                    .collect();
                let cost = cost_for_sets(h, &sets);
                if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    best = Some((cost, sets));
                }
                let mut c = h.k();
                let done = loop {
                    if c == 0 {
                        break true;
                    }
                    c -= 1;
                    choice[c] += 1;
                    if choice[c] < per_class[c].len() {
                        break false;
                    }
                    choice[c] = 0;
                };
                if done {
                    break;
                }
            }
            let (cost, sets) = best.expect("at least one witness");
            ClosenessResult {
                cost,
                witness: H0Params::with_sets(h.k(), h.n(), sets).unwrap(),
                exact: true,
            }
        }
        SearchMode::LocalSearch => {
            let restarts = cfg.max_iters.max(1);
            let (cost, sets) = (0..restarts as u64)
                .into_par_iter()
                .map(|r| descend(h, &locals, half, cfg.seed.wrapping_add(r)))
                .min_by_key(|(c, _)| *c)
                .expect("at least one restart");
            ClosenessResult {
                cost,
                witness: H0Params::with_sets(h.k(), h.n(), sets).unwrap(),
                exact: false,
            }
        }
    }
}

/// One steepest-descent run from a random half-split: repeatedly apply the
/// best single in/out swap inside a class until no swap lowers the cost.
fn descend(
    h: &PartiteHypergraph,
    locals: &[Vec<usize>],
    half: usize,
    seed: u64,
) -> (usize, Vec<Vec<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = h.k();
    let mut inside: Vec<BTreeSet<usize>> = Vec::with_capacity(k);
    for ls in locals {
        let mut pool = ls.clone();
        pool.shuffle(&mut rng);
        inside.push(pool.into_iter().take(half).collect());
    }

    // Missing template edges, bucketed by the vertex in each class.
    let mut missing: Vec<(usize, Vec<usize>)> = Vec::new();
    for_each_alive_tuple(h, &mut |tuple, idx| {
        if !h.has_tuple_index(idx) {
            missing.push((idx, tuple.to_vec()));
        }
    });
    let mut buckets: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); h.n()]; k];
    for (slot, (_, tuple)) in missing.iter().enumerate() {
        for (c, &l) in tuple.iter().enumerate() {
            buckets[c][l].push(slot);
        }
    }
    let parity_of = |tuple: &[usize], inside: &[BTreeSet<usize>]| {
        tuple
            .iter()
            .enumerate()
            .filter(|&(c, &l)| inside[c].contains(&l))
            .count()
            % 2
    };
    let mut even: Vec<bool> = missing
        .iter()
        .map(|(_, t)| parity_of(t, &inside) == 0)
        .collect();
    let mut cost: usize = even.iter().filter(|&&e| e).count();

    loop {
        let mut best: Option<(isize, usize, usize, usize)> = None; // delta, class, out, in
        for c in 0..k {
            let outs: Vec<usize> = inside[c].iter().copied().collect();
            let ins: Vec<usize> = locals[c]
                .iter()
                .copied()
                .filter(|l| !inside[c].contains(l))
                .collect();
            for &a in &outs {
                // flipping a's membership toggles parity of its whole bucket
                let delta_a: isize = buckets[c][a]
                    .iter()
                    .map(|&s| if even[s] { -1 } else { 1 })
                    .sum();
                for &b in &ins {
                    let delta_b: isize = buckets[c][b]
                        .iter()
                        .map(|&s| if even[s] { -1 } else { 1 })
                        .sum();
                    let delta = delta_a + delta_b;
                    if delta < 0 && best.is_none_or(|(bd, ..)| delta < bd) {
                        best = Some((delta, c, a, b));
                    }
                }
            }
        }
        match best {
            None => break,
            Some((delta, c, a, b)) => {
                inside[c].remove(&a);
                inside[c].insert(b);
                for &s in buckets[c][a].iter().chain(&buckets[c][b]) {
                    even[s] = !even[s];
                }
                cost = (cost as isize + delta) as usize;
            }
        }
    }
    let sets: Vec<Vec<usize>> = inside
        .into_iter()
        .map(|s| s.into_iter().collect())
        .collect();
    (cost, sets)
}

/// Closeness cost is below `epsilon * m^k` for the equal class size `m`.
pub fn is_eps_close(h: &PartiteHypergraph, cfg: &ClosenessConfig) -> bool {
    let m = h
        .equal_class_sizes()
        .expect("closeness needs equal class sizes");
    let max_edges = (m as f64).powi(h.k() as i32);
    (closeness(h, cfg).cost as f64) < cfg.epsilon * max_edges
}

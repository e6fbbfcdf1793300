//! Deterministic instance generators.
//!
//! Randomness is counter-based: each tuple's fate is a hash of (seed, tuple
//! index), so equal specs produce byte-identical instances regardless of
//! iteration order.

use serde::{Deserialize, Serialize};

use crate::extremal::{build_h0, H0Params};
use crate::hypergraph::{HypergraphError, PartiteHypergraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    Complete,
    Empty,
    H0,
    H0Subgraph,
    RandomP,
    H0Perturbed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub k: usize,
    pub n: usize,
    /// Marked set sizes for the template kinds; defaults to floor(n/2) each.
    pub d: Option<Vec<usize>>,
    /// Keep probability for `H0Subgraph` / `RandomP`.
    pub p: Option<f64>,
    /// Toggle count for `H0Perturbed`.
    pub flips: Option<usize>,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(kind: GenKind, k: usize, n: usize) -> Self {
        GenSpec {
            kind,
            k,
            n,
            d: None,
            p: None,
            flips: None,
            seed: 0,
        }
    }
}

/// splitmix64 finalizer over (seed, counter).
fn mix(seed: u64, counter: u64) -> u64 {
    let mut z = seed ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn keep(seed: u64, counter: u64, p: f64) -> bool {
    // top 53 bits as a uniform double in [0, 1)
    let u = (mix(seed, counter) >> 11) as f64 / (1u64 << 53) as f64;
    u < p
}

pub fn generate(spec: &GenSpec) -> Result<PartiteHypergraph, HypergraphError> {
    let params = || -> Result<H0Params, HypergraphError> {
        match &spec.d {
            Some(d) => H0Params::new(spec.k, spec.n, d.clone()),
            None => Ok(H0Params::canonical(spec.k, spec.n)),
        }
    };
    match spec.kind {
        GenKind::Complete => PartiteHypergraph::complete(spec.k, spec.n),
        GenKind::Empty => PartiteHypergraph::new(spec.k, spec.n),
        GenKind::H0 => build_h0(&params()?),
        GenKind::H0Subgraph => {
            let p = spec.p.ok_or_else(|| {
                HypergraphError::BadParameters("h0_subgraph needs a keep probability".into())
            })?;
            let mut h = build_h0(&params()?)?;
            let doomed: Vec<_> = h
                .edge_list()
                .into_iter()
                .filter(|e| !keep(spec.seed, h.tuple_index(e) as u64, p))
                .collect();
            for e in doomed {
                h.remove_edge(&e)?;
            }
            Ok(h)
        }
        GenKind::RandomP => {
            let p = spec.p.ok_or_else(|| {
                HypergraphError::BadParameters("random_p needs a keep probability".into())
            })?;
            let mut h = PartiteHypergraph::new(spec.k, spec.n)?;
            for idx in 0..h.tuple_space() {
                if keep(spec.seed, idx as u64, p) {
                    h.toggle_tuple(idx);
                }
            }
            Ok(h)
        }
        GenKind::H0Perturbed => {
            let flips = spec.flips.ok_or_else(|| {
                HypergraphError::BadParameters("h0_perturbed needs a flip count".into())
            })?;
            let mut h = build_h0(&params()?)?;
            let space = h.tuple_space() as u64;
            if flips > h.tuple_space() {
                return Err(HypergraphError::BadParameters(format!(
                    "flips {flips} exceeds tuple space {space}"
                )));
            }
            let mut flipped = std::collections::BTreeSet::new();
            let mut counter = 0u64;
            while flipped.len() < flips {
                let idx = (mix(spec.seed, counter) % space) as usize;
                counter += 1;
                if flipped.insert(idx) {
                    h.toggle_tuple(idx);
                }
            }
            Ok(h)
        }
    }
}

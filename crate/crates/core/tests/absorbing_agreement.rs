//! Two-implementation agreement for the absorbing-witness verifier: a
//! from-scratch definitional checker, written against the raw conditions
//! with no shared code, must accept exactly the same witnesses.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpmatch::absorbing::{
    derive_k1_witness, derive_k_witness, verify_absorbing, AbsorbingWitness, WitnessKind,
};
use kpmatch::hypergraph::{Edge, PartiteHypergraph};

fn as_vertex_set(e: &Edge) -> BTreeSet<(usize, usize)> {
    e.iter().enumerate().map(|(c, &l)| (c, l)).collect()
}

fn pairwise_disjoint(edges: &[&Edge]) -> bool {
    let mut seen = BTreeSet::new();
    for e in edges {
        for v in as_vertex_set(e) {
            if !seen.insert(v) {
                return false;
            }
        }
    }
    true
}

fn in_graph(h: &PartiteHypergraph, e: &Edge) -> bool {
    e.len() == h.k() && e.iter().all(|&l| l < h.n()) && h.has_edge(e)
}

/// Literal reading of the matching-kind conditions.
fn definitional_k(h: &PartiteHypergraph, w: &AbsorbingWitness) -> bool {
    let k = h.k();
    if w.s.len() != k || w.edges.len() != k || w.replacement.len() != k + 1 {
        return false;
    }
    let donors: Vec<&Edge> = w.edges.iter().collect();
    if !donors.iter().all(|e| in_graph(h, e)) || !pairwise_disjoint(&donors) {
        return false;
    }
    let swapped = &w.replacement[..k];
    let freed = &w.replacement[k];
    let mut all: Vec<&Edge> = swapped.iter().collect();
    all.push(freed);
    if !all.iter().all(|e| in_graph(h, e)) || !pairwise_disjoint(&all) {
        return false;
    }
    for (i, swap) in swapped.iter().enumerate() {
        // swapped_i minus donor_i must be exactly the probe vertex of class i
        let si = as_vertex_set(swap);
        let di = as_vertex_set(&w.edges[i]);
        let gained: Vec<_> = si.difference(&di).collect();
        let lost: Vec<_> = di.difference(&si).collect();
        if gained != vec![&(i, w.s[i])] {
            return false;
        }
        if lost != vec![&(i, w.edges[i][i])] {
            return false;
        }
        // swapped_i avoids every other donor
        for (j, donor) in w.edges.iter().enumerate() {
            if i != j && !si.is_disjoint(&as_vertex_set(donor)) {
                return false;
            }
        }
    }
    // the freed tuple collects exactly the displaced vertices
    (0..k).all(|i| freed[i] == w.edges[i][i])
}

/// Literal reading of the spare-edge (k+1) kind.
fn definitional_k1(h: &PartiteHypergraph, w: &AbsorbingWitness) -> bool {
    let k = h.k();
    let Some(j) = w.special_class else {
        return false;
    };
    if j >= k || w.s.len() != k || w.edges.len() != k + 1 || w.replacement.len() != k + 2 {
        return false;
    }
    let spare = &w.edges[0];
    let donors: Vec<&Edge> = w.edges.iter().collect();
    if !donors.iter().all(|e| in_graph(h, e)) || !pairwise_disjoint(&donors) {
        return false;
    }
    let swapped = &w.replacement[..k];
    let bridged = &w.replacement[k];
    let closing = &w.replacement[k + 1];
    let mut all: Vec<&Edge> = swapped.iter().collect();
    all.push(bridged);
    all.push(closing);
    if !all.iter().all(|e| in_graph(h, e)) || !pairwise_disjoint(&all) {
        return false;
    }
    for (c, swap) in swapped.iter().enumerate() {
        let sc = as_vertex_set(swap);
        let dc = as_vertex_set(&w.edges[1 + c]);
        let gained: Vec<_> = sc.difference(&dc).collect();
        let lost: Vec<_> = dc.difference(&sc).collect();
        if gained != vec![&(c, w.s[c])] || lost != vec![&(c, w.edges[1 + c][c])] {
            return false;
        }
        for (other, donor) in w.edges.iter().enumerate() {
            if other != 1 + c && !sc.is_disjoint(&as_vertex_set(donor)) {
                return false;
            }
        }
    }
    // bridged = spare with its class-j vertex replaced by the class-j donor's
    // displaced vertex; closing = the displaced spare vertex plus the other
    // displaced vertices
    let y_j = w.edges[1 + j][j];
    let y_0 = spare[j];
    let bs = as_vertex_set(bridged);
    let ss = as_vertex_set(spare);
    let gained: Vec<_> = bs.difference(&ss).collect();
    let lost: Vec<_> = ss.difference(&bs).collect();
    if gained != vec![&(j, y_j)] || lost != vec![&(j, y_0)] {
        return false;
    }
    (0..k).all(|c| closing[c] == if c == j { y_0 } else { w.edges[1 + c][c] })
}

fn definitional(h: &PartiteHypergraph, w: &AbsorbingWitness) -> bool {
    match w.kind {
        WitnessKind::KMatching => definitional_k(h, w),
        WitnessKind::KPlusOneMatching => definitional_k1(h, w),
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> PartiteHypergraph {
    let mut h = PartiteHypergraph::new(3, n).unwrap();
    for idx in 0..h.tuple_space() {
        if rng.gen_bool(p) {
            h.toggle_tuple(idx);
        }
    }
    h
}

#[test]
fn verifier_agrees_with_definitional_checker() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut candidates = 0usize;
    let mut accepted = 0usize;
    let complete = PartiteHypergraph::complete(3, 8).unwrap();
    while candidates < 1000 {
        let h = if rng.gen_bool(0.5) {
            complete.clone()
        } else {
            random_graph(&mut rng, 8, 0.7)
        };
        // random probe and donor slots, intentionally allowed to collide
        let n = 8usize;
        let kind = if rng.gen_bool(0.5) {
            WitnessKind::KMatching
        } else {
            WitnessKind::KPlusOneMatching
        };
        let donors = match kind {
            WitnessKind::KMatching => 3,
            WitnessKind::KPlusOneMatching => 4,
        };
        let s: Edge = (0..3).map(|_| rng.gen_range(0..n)).collect();
        let edges: Vec<Edge> = (0..donors)
            .map(|_| (0..3).map(|_| rng.gen_range(0..n)).collect())
            .collect();
        let derived = match kind {
            WitnessKind::KMatching => derive_k_witness(&h, &s, &edges),
            WitnessKind::KPlusOneMatching => derive_k1_witness(&h, &s, &edges, rng.gen_range(0..3)),
        };
        let Some(mut w) = derived else {
            continue; // derivation refused; nothing to cross-check
        };
        // sometimes tamper with the stored structure
        if rng.gen_bool(0.4) {
            match rng.gen_range(0..3) {
                0 => {
                    let i = rng.gen_range(0..w.replacement.len());
                    let c = rng.gen_range(0..3);
                    w.replacement[i][c] = rng.gen_range(0..n);
                }
                1 => {
                    let i = rng.gen_range(0..w.edges.len());
                    let c = rng.gen_range(0..3);
                    w.edges[i][c] = rng.gen_range(0..n);
                }
                _ => {
                    let c = rng.gen_range(0..3);
                    w.s[c] = rng.gen_range(0..n);
                }
            }
        }
        let library = verify_absorbing(&h, &w);
        let reference = definitional(&h, &w);
        assert_eq!(
            library, reference,
            "verdicts diverge on candidate {candidates}: {w:?}"
        );
        candidates += 1;
        if library {
            accepted += 1;
        }
    }
    // the sample must exercise both outcomes
    assert!(accepted > 100, "only {accepted} accepted candidates");
    assert!(accepted < 1000, "no rejected candidates sampled");
}

//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measurements. Tolerances are pinned in the assertions.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpmatch::absorbing::{
    derive_k1_witness, derive_k_witness, perfect_matching_via_absorption, splice, verify_absorbing,
    AbsorbConfig,
};
use kpmatch::extremal::{build_h0, build_h0_canonical, H0Params};
use kpmatch::generate::{generate, GenKind, GenSpec};
use kpmatch::harness::check_theorem;
use kpmatch::hypergraph::{Edge, LegalSet, Matching, PartiteHypergraph, Vertex};
use kpmatch::matcher::{find_perfect_matching, max_matching, verify_matching, SolverConfig};
use kpmatch::parity::{find_parity_certificate, TheoremCase};
use kpmatch::pipeline::{complete_multipartite_pm, run_pipeline, PipelineConfig, PipelineError};

fn memo_solver() -> SolverConfig {
    SolverConfig {
        timeout: Duration::from_secs(60),
        use_memo: true,
    }
}

/// Criterion 1: Every odd-sum template over k in {3,4,5}, n in {2..6} (20 seeded size
/// vectors each) has no perfect matching. Tolerance: exact.
#[test]
fn criterion_01_extremal_non_matchability() {
    let t0 = Instant::now();
    let mut instances = 0usize;
    for k in [3usize, 4, 5] {
        for n in 2usize..=6 {
            let mut rng = ChaCha8Rng::seed_from_u64((k * 100 + n) as u64);
            for _ in 0..20 {
                let d: Vec<usize> = loop {
                    let cand: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=n)).collect();
                    if cand.iter().sum::<usize>() % 2 == 1 {
                        break cand;
                    }
                };
                let h = build_h0(&H0Params::new(k, n, d.clone()).unwrap()).unwrap();
                let pm = find_perfect_matching(&h, &memo_solver())
                    .completed()
                    .unwrap_or_else(|| panic!("solver timeout on k={k} n={n} d={d:?}"));
                assert!(
                    pm.is_none(),
                    "odd-sum template k={k} n={n} d={d:?} must have no perfect matching"
                );
                instances += 1;
            }
        }
    }
    println!(
        "ACCEPTANCE 01 extremal non-matchability: PASS ({instances} instances, {:?})",
        t0.elapsed()
    );
}

/// Criterion 2: min co-degree of the canonical template is exactly n/2 for odd k and
/// n = 2 mod 4.
#[test]
fn criterion_02_canonical_codegree() {
    let t0 = Instant::now();
    for (k, n) in [(3usize, 2usize), (3, 6), (5, 2)] {
        let h = build_h0_canonical(k, n).unwrap();
        assert_eq!(h.min_codegree(), n / 2, "canonical template ({k},{n})");
    }
    println!(
        "ACCEPTANCE 02 canonical co-degree: PASS (3 cases, {:?})",
        t0.elapsed()
    );
}

/// Criterion 3: The lopsided template (last set one larger): co-degree profile and
/// non-matchability. Exact.
#[test]
fn criterion_03_lopsided_template_profile() {
    let t0 = Instant::now();
    for (k, n) in [(3usize, 4usize), (4, 4)] {
        let mut d = vec![n / 2; k];
        d[k - 1] = n / 2 + 1;
        let h = build_h0(&H0Params::new(k, n, d.clone()).unwrap()).unwrap();
        let sets = H0Params::new(k, n, d.clone()).unwrap().marked_sets();
        let marked: Vec<BTreeSet<usize>> =
            sets.iter().map(|s| s.iter().copied().collect()).collect();

        // walk all legal (k-1)-sets, grouped by their free class
        for free in 0..k {
            let classes: Vec<usize> = (0..k).filter(|&c| c != free).collect();
            let mut pick = vec![0usize; classes.len()];
            loop {
                let verts: Vec<Vertex> = classes
                    .iter()
                    .zip(&pick)
                    .map(|(&c, &l)| Vertex::new(c, l))
                    .collect();
                let set = LegalSet::from_vertices(k, &verts).unwrap();
                let deg = h.degree(&set).unwrap();
                let meets_last = free != k - 1;
                if meets_last {
                    assert!(
                        deg >= n / 2,
                        "({k},{n}) set {verts:?} meets the last class but has degree {deg}"
                    );
                } else {
                    let hits = verts
                        .iter()
                        .filter(|v| marked[v.class].contains(&v.local))
                        .count();
                    if hits % 2 == 0 {
                        assert_eq!(deg, n / 2 - 1, "({k},{n}) even-marked set {verts:?} degree");
                    }
                }
                let mut i = classes.len();
                let done = loop {
                    if i == 0 {
                        break true;
                    }
                    i -= 1;
                    pick[i] += 1;
                    if pick[i] < n {
                        break false;
                    }
                    pick[i] = 0;
                };
                if done {
                    break;
                }
            }
        }
        let pm = find_perfect_matching(&h, &memo_solver())
            .completed()
            .unwrap();
        assert!(pm.is_none(), "lopsided template ({k},{n}) has no matching");
    }
    println!(
        "ACCEPTANCE 03 lopsided template profile: PASS (2 cases, {:?})",
        t0.elapsed()
    );
}

/// Criterion 4: Parity detector agrees with brute force over all 2^9 vertex subsets on
/// 1000 seeded random (3,3) instances. Exact.
#[test]
fn criterion_04_parity_detector_completeness() {
    let t0 = Instant::now();
    let ps = [0.1, 0.3, 0.5, 0.7, 0.9];
    for seed in 0..1000u64 {
        let spec = GenSpec {
            p: Some(ps[(seed % 5) as usize]),
            seed,
            ..GenSpec::new(GenKind::RandomP, 3, 3)
        };
        let h = generate(&spec).unwrap();
        let found = find_parity_certificate(&h);
        let brute = brute_force_certificate_exists(&h);
        assert_eq!(
            found.is_some(),
            brute,
            "seed {seed}: detector and brute force disagree"
        );
        if let Some(cert) = found {
            assert!(cert.verify(&h), "seed {seed}: unsound certificate");
        }
    }
    println!(
        "ACCEPTANCE 04 parity detector completeness: PASS (1000 instances, {:?})",
        t0.elapsed()
    );
}

fn brute_force_certificate_exists(h: &PartiteHypergraph) -> bool {
    let verts: Vec<Vertex> = h.vertices().collect();
    let edges = h.edge_list();
    (1u64..1 << verts.len())
        .filter(|m| m.count_ones() % 2 == 1)
        .any(|mask| {
            edges.iter().all(|e| {
                e.iter()
                    .enumerate()
                    .filter(|&(c, &l)| {
                        verts
                            .iter()
                            .position(|v| v.class == c && v.local == l)
                            .is_some_and(|i| mask >> i & 1 == 1)
                    })
                    .count()
                    % 2
                    == 0
            })
        })
}

/// Criterion 5: 200 seeded odd-size template subgraphs classify as case ii with no
/// perfect matching. Exact.
#[test]
fn criterion_05_obstruction_soundness_at_scale() {
    let t0 = Instant::now();
    let mut rows = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for n in [5usize, 7] {
        for p in [0.7f64, 1.0] {
            for _ in 0..50 {
                let lo = (n - 1) / 2;
                let hi = n.div_ceil(2);
                let d: Vec<usize> = loop {
                    let cand: Vec<usize> = (0..3)
                        .map(|_| if rng.gen_bool(0.5) { lo } else { hi })
                        .collect();
                    if cand.iter().sum::<usize>() % 2 == 1 {
                        break cand;
                    }
                };
                let spec = GenSpec {
                    d: Some(d.clone()),
                    p: Some(p),
                    seed: rng.gen(),
                    ..GenSpec::new(GenKind::H0Subgraph, 3, n)
                };
                let h = generate(&spec).unwrap();
                let v = check_theorem(&h, &memo_solver());
                assert_eq!(
                    v.theorem_case,
                    Some(TheoremCase::CaseII),
                    "n={n} p={p} d={d:?}: expected case ii, got {:?} ({:?})",
                    v.theorem_case,
                    v.case_error
                );
                assert_eq!(v.pm_exists, Some(false), "n={n} p={p} d={d:?}");
                rows += 1;
            }
        }
    }
    assert_eq!(rows, 200);
    println!(
        "ACCEPTANCE 05 obstruction soundness: PASS (200 rows, {:?})",
        t0.elapsed()
    );
}

/// Criterion 6: The auxiliary complete-multipartite matcher agrees with the parity/
/// half-bound predicate and with exhaustive search on every class-size
/// vector with <= 5 classes and sizes <= 6. Exact.
#[test]
fn criterion_06_auxiliary_matcher() {
    let t0 = Instant::now();
    let mut memo: std::collections::HashMap<Vec<usize>, bool> = Default::default();
    fn exists(
        sizes: &mut Vec<usize>,
        memo: &mut std::collections::HashMap<Vec<usize>, bool>,
    ) -> bool {
        let mut key = sizes.clone();
        key.sort_unstable();
        if key.iter().all(|&s| s == 0) {
            return true;
        }
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let mut ok = false;
        'outer: for i in 0..sizes.len() {
            for j in i + 1..sizes.len() {
                if sizes[i] > 0 && sizes[j] > 0 {
                    sizes[i] -= 1;
                    sizes[j] -= 1;
                    let sub = exists(sizes, memo);
                    sizes[i] += 1;
                    sizes[j] += 1;
                    if sub {
                        ok = true;
                        break 'outer;
                    }
                }
            }
        }
        memo.insert(key, ok);
        ok
    }

    let mut vectors = 0usize;
    for classes in 1usize..=5 {
        let mut sizes = vec![0usize; classes];
        loop {
            let total: usize = sizes.iter().sum();
            let max = sizes.iter().copied().max().unwrap();
            let tutte = total.is_multiple_of(2) && 2 * max <= total;
            let greedy = complete_multipartite_pm(&sizes);
            let brute = exists(&mut sizes.clone(), &mut memo);
            assert_eq!(greedy.is_some(), tutte, "sizes {sizes:?} vs predicate");
            assert_eq!(greedy.is_some(), brute, "sizes {sizes:?} vs exhaustive");
            if let Some(pairs) = greedy {
                assert_eq!(pairs.len(), total / 2, "sizes {sizes:?} pairing size");
                let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
                for (a, b) in pairs {
                    assert_ne!(a.0, b.0, "pair within one class for {sizes:?}");
                    assert!(
                        used.insert(a) && used.insert(b),
                        "slot reused for {sizes:?}"
                    );
                }
            }
            vectors += 1;
            let mut i = classes;
            let done = loop {
                if i == 0 {
                    break true;
                }
                i -= 1;
                sizes[i] += 1;
                if sizes[i] <= 6 {
                    break false;
                }
                sizes[i] = 0;
            };
            if done {
                break;
            }
        }
    }
    println!(
        "ACCEPTANCE 06 auxiliary matcher: PASS ({vectors} size vectors, {:?})",
        t0.elapsed()
    );
}

/// Engineered pipeline fixtures: even-sum templates at n in [8,16], some
/// with extra edges, some with a few (pairwise disjoint) deletions.
fn pipeline_fixtures() -> Vec<(String, PartiteHypergraph, PipelineConfig)> {
    let profile = |n: usize| -> Vec<usize> {
        let base = n / 2;
        let mut d = vec![base; 3];
        if (3 * base) % 2 == 1 {
            d[2] = if n % 2 == 1 { base + 1 } else { base - 1 };
        }
        assert_eq!(d.iter().sum::<usize>() % 2, 0);
        d
    };
    let mut out = Vec::new();
    for n in 8usize..=16 {
        let d = profile(n);
        let h = build_h0(&H0Params::new(3, n, d.clone()).unwrap()).unwrap();
        out.push((format!("clean n={n} d={d:?}"), h, PipelineConfig::default()));
    }
    // extra edges on top of the template
    for n in [8usize, 10, 12, 14, 16] {
        let d = profile(n);
        let mut h = build_h0(&H0Params::new(3, n, d.clone()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut added = 0;
        while added < 8 {
            let idx = rng.gen_range(0..h.tuple_space());
            if !h.has_tuple_index(idx) {
                h.toggle_tuple(idx);
                added += 1;
            }
        }
        out.push((
            format!("added-edges n={n} d={d:?}"),
            h,
            PipelineConfig::default(),
        ));
    }
    // a small disjoint set of deletions (keeps every co-degree within 1)
    for n in [9usize, 11, 12, 13, 15, 16] {
        let d = profile(n);
        let mut h = build_h0(&H0Params::new(3, n, d.clone()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + n as u64);
        let edges = h.edge_list();
        let mut removed: Vec<Edge> = Vec::new();
        while removed.len() < 3 {
            let e = edges[rng.gen_range(0..edges.len())].clone();
            let disjoint = removed
                .iter()
                .all(|r| r.iter().zip(&e).all(|(a, b)| a != b));
            if disjoint && h.has_edge(&e) {
                h.remove_edge(&e).unwrap();
                removed.push(e);
            }
        }
        out.push((
            format!("deleted-edges n={n} d={d:?}"),
            h,
            PipelineConfig {
                alpha: 0.2,
                ..Default::default()
            },
        ));
    }
    out
}

/// Criterion 7: On 20 engineered instances the staged matcher either returns a
/// verified perfect matching or a report blaming one stage with a concrete
/// witness; every completed stage's invariants hold.
#[test]
fn criterion_07_pipeline_stage_invariants() {
    let t0 = Instant::now();
    let fixtures = pipeline_fixtures();
    assert_eq!(fixtures.len(), 20);
    let mut matched = 0usize;
    let mut reported = 0usize;
    for (label, h, cfg) in &fixtures {
        match run_pipeline(h, cfg) {
            Ok(report) => {
                let failed_stage = report.failure.as_ref().map(|f| f.stage.clone());
                for check in &report.state.checks {
                    if Some(&check.stage) != failed_stage.as_ref() {
                        assert!(
                            check.passed,
                            "{label}: completed-stage invariant failed: {} / {} ({})",
                            check.stage, check.name, check.detail
                        );
                    }
                }
                match (&report.matching, &report.failure) {
                    (Some(m), None) => {
                        assert!(verify_matching(h, m, true), "{label}: unverified matching");
                        matched += 1;
                    }
                    (None, Some(f)) => {
                        let witness = serde_json::to_string(&f.error).unwrap();
                        assert!(
                            witness.len() > 20,
                            "{label}: failure lacks a concrete witness: {witness}"
                        );
                        reported += 1;
                    }
                    other => panic!("{label}: report is neither matched nor failed: {other:?}"),
                }
            }
            Err(PipelineError::Obstruction(cert)) => {
                // legitimate only if the certificate is real
                assert!(cert.verify(h), "{label}: bogus obstruction");
                panic!("{label}: even-sum fixture reported an obstruction");
            }
            Err(e) => panic!("{label}: precondition error {e}"),
        }
    }
    println!(
        "ACCEPTANCE 07 pipeline stage invariants: PASS ({matched} matched, {reported} reported, {:?})",
        t0.elapsed()
    );
}

/// Criterion 8: 1000 sampled witnesses across complete graphs verify and splice into
/// perfect matchings. Exact.
#[test]
fn criterion_08_absorbing_soundness() {
    let t0 = Instant::now();
    let mut count = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for n in [6usize, 9, 12] {
        let h = PartiteHypergraph::complete(3, n).unwrap();
        for _ in 0..334 {
            // distinct locals per class: the probe, then donor slots
            let pick = |rng: &mut ChaCha8Rng, taken: &mut Vec<usize>| loop {
                let l = rng.gen_range(0..n);
                if !taken.contains(&l) {
                    taken.push(l);
                    return l;
                }
            };
            let use_k1 = rng.gen_bool(0.5) && n >= 5;
            let donors = if use_k1 { 4 } else { 3 };
            let mut cols: Vec<Vec<usize>> = Vec::new();
            for _ in 0..3 {
                let mut taken = Vec::new();
                for _ in 0..donors + 1 {
                    pick(&mut rng, &mut taken);
                }
                cols.push(taken);
            }
            let s: Edge = (0..3).map(|c| cols[c][0]).collect();
            let edges: Vec<Edge> = (0..donors)
                .map(|i| (0..3).map(|c| cols[c][i + 1]).collect())
                .collect();
            let w = if use_k1 {
                derive_k1_witness(&h, &s, &edges, rng.gen_range(0..3))
            } else {
                derive_k_witness(&h, &s, &edges)
            }
            .expect("complete graphs absorb everything");
            assert!(verify_absorbing(&h, &w), "witness failed verification");

            // extend the donors to a matching covering V - s, then splice
            let mut m = Matching::from_edges(edges.clone());
            let mut used: Vec<BTreeSet<usize>> = (0..3)
                .map(|c| {
                    edges
                        .iter()
                        .map(|e| e[c])
                        .chain([s[c]])
                        .collect::<BTreeSet<usize>>()
                })
                .collect();
            loop {
                let free: Vec<Vec<usize>> = (0..3)
                    .map(|c| (0..n).filter(|l| !used[c].contains(l)).collect())
                    .collect();
                if free[0].is_empty() {
                    break;
                }
                let e: Edge = (0..3).map(|c| free[c][0]).collect();
                for (c, &l) in e.iter().enumerate() {
                    used[c].insert(l);
                }
                m.push(e);
            }
            let full = splice(&m, &w);
            assert!(
                verify_matching(&h, &full, true),
                "spliced matching is not perfect"
            );
            count += 1;
        }
    }
    assert!(count >= 1000, "sampled {count} witnesses");
    println!(
        "ACCEPTANCE 08 absorbing soundness: PASS ({count} witnesses, {:?})",
        t0.elapsed()
    );
}

/// Criterion 9: End-to-end absorption on 50 seeded dense random instances: at least
/// 45 verified perfect matchings; every returned matching verifies.
#[test]
fn criterion_09_absorption_end_to_end() {
    let t0 = Instant::now();
    let mut successes = 0usize;
    let mut failures: Vec<u64> = Vec::new();
    let mut seed = 0u64;
    let mut accepted = 0usize;
    while accepted < 50 {
        let spec = GenSpec {
            p: Some(0.9),
            seed,
            ..GenSpec::new(GenKind::RandomP, 3, 10)
        };
        seed += 1;
        let h = generate(&spec).unwrap();
        let floor = (0.5 - 1.0 / (10f64).ln()) * 10.0;
        if (h.min_codegree() as f64) < floor {
            continue;
        }
        accepted += 1;
        let report = perfect_matching_via_absorption(
            &h,
            &AbsorbConfig {
                seed,
                ..Default::default()
            },
        );
        match report.matching {
            Some(m) => {
                assert!(verify_matching(&h, &m, true), "seed {seed}: unverified");
                successes += 1;
            }
            None => failures.push(seed),
        }
    }
    println!(
        "ACCEPTANCE 09 absorption end-to-end: {}/{} matched (failures at seeds {:?}), {:?}",
        successes,
        accepted,
        failures,
        t0.elapsed()
    );
    assert!(successes >= 45, "only {successes}/50 runs matched");
    println!("ACCEPTANCE 09 absorption end-to-end: PASS");
}

/// Criterion 10: Monitored near-perfect statement: over 100 seeded random instances
/// with the co-degree floor, the fraction with max matching >= n-1 must be
/// at least 0.95; counterexamples are listed.
#[test]
fn criterion_10_near_perfect_monitored() {
    let t0 = Instant::now();
    let ps = [0.75, 0.85, 0.95];
    let mut accepted = 0usize;
    let mut hits = 0usize;
    let mut counterexamples: Vec<String> = Vec::new();
    let mut seed = 0u64;
    let mut attempts = 0usize;
    while accepted < 100 && attempts < 10_000 {
        attempts += 1;
        let n = 6 + (seed % 5) as usize; // 6..=10
        let spec = GenSpec {
            p: Some(ps[(seed % 3) as usize]),
            seed: seed.wrapping_mul(7919),
            ..GenSpec::new(GenKind::RandomP, 3, n)
        };
        seed += 1;
        let h = generate(&spec).unwrap();
        if h.min_codegree() < n.div_ceil(3) {
            continue;
        }
        accepted += 1;
        // fast path: a perfect matching settles it
        let pm = find_perfect_matching(&h, &memo_solver())
            .completed()
            .unwrap();
        let size = if pm.is_some() {
            n
        } else {
            max_matching(&h, &memo_solver())
                .completed()
                .map(|(s, _)| s)
                .unwrap_or(0)
        };
        if size >= n - 1 {
            hits += 1;
        } else {
            counterexamples.push(format!(
                "seed {} n={} p={} max={}",
                spec.seed,
                n,
                spec.p.unwrap(),
                size
            ));
        }
    }
    assert_eq!(accepted, 100, "conditioning rejected too many instances");
    let fraction = hits as f64 / accepted as f64;
    println!(
        "ACCEPTANCE 10 near-perfect monitored: fraction {fraction:.3} ({hits}/{accepted}), counterexamples: {counterexamples:?}, {:?}",
        t0.elapsed()
    );
    assert!(fraction >= 0.95, "fraction {fraction} below 0.95");
    println!("ACCEPTANCE 10 near-perfect monitored: PASS");
}

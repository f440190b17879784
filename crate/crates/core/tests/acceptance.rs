//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! Pass criterion ids (`c1` .. `c9`) as arguments to run a subset.

mod common;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use gridscan::dataset::{AttributeKind, OperatingPointSet};
use gridscan::oracles::{full_scan, two_bus_margin, DampingSurrogate, StabilityModel};
use gridscan::relief::{relief_weights, select_features};
use gridscan::scanning::{
    compare_full_vs_fast, fast_scan, fast_scan_with, select_weights, validate_with, Clusterer,
    ScanConfig,
};
use gridscan::swarm_clustering::{
    adaptive_kmeans, kmeans, member_counts, nearest_centroid, plain_kmeans, run_pso,
    sum_squared_error, AdaptiveParams, DistanceWeights, Points, PsoParams,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn property<S>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

// c1 ---------------------------------------------------------------------

fn best_of_all_inits(values: &[f64]) -> Option<(Vec<usize>, f64)> {
    let pts = Points::new(values, 1).unwrap();
    let w = DistanceWeights::uniform(1);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i + 1..] {
            if a == b {
                continue;
            }
            for init in [[a, b], [b, a]] {
                let run = kmeans(pts, &[vec![init[0]], vec![init[1]]], &w).unwrap();
                if member_counts(&run.assignment, 2).contains(&0) {
                    continue;
                }
                let sse = sum_squared_error(pts, &run.centroids, &run.assignment, &w);
                if best.as_ref().is_none_or(|b| sse < b.1) {
                    best = Some((run.assignment, sse));
                }
            }
        }
    }
    best
}

fn c1() -> Verdict {
    let cases = 3000;
    let strategy = prop::collection::vec(-12i32..12, 2..=10);
    let result = property(cases, strategy, |raw| {
        let values: Vec<f64> = raw.into_iter().map(|v| v as f64 / 3.0).collect();
        let exhaustive = common::all_two_partitions(&values);
        let optimum = exhaustive.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let tol = 1e-9 * optimum.max(1.0);
        match best_of_all_inits(&values) {
            None => prop_assert!(values.iter().all(|&v| v == values[0])),
            Some((labels, sse)) => {
                prop_assert!((sse - optimum).abs() <= tol, "sse {} vs {}", sse, optimum);
                let labels = common::canonical(&labels);
                prop_assert!(exhaustive
                    .iter()
                    .any(|p| (p.1 - optimum).abs() <= tol && p.0 == labels));
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => verdict(true, format!("{cases} random 1-D sets, n <= 10: partitions identical")),
        Err(e) => verdict(false, e),
    }
}

// c2 ---------------------------------------------------------------------

fn c2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let e = rng.random_range(0.9..=1.1);
        let x = rng.random_range(0.1..=1.0);
        let p0 = rng.random_range(0.0..=e * e / (2.0 * x));
        let closed = two_bus_margin(e, x, p0);
        worst = worst.max((closed - common::bisect_margin(e, x, p0)).abs());
    }
    verdict(worst <= 1e-6, format!("1000 cases, max |diff| = {worst:.3e}"))
}

// c3 ---------------------------------------------------------------------

fn c3() -> Verdict {
    let mut hits = 0;
    let mut unconverged = 0;
    for seed in 0..100u64 {
        let year = common::year(seed);
        let cfg = ScanConfig::default();
        let oracle = cfg.oracle.build(&year.set, Some(&year.informative)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sel = select_features(&year.set, &oracle, &cfg.relief, None, &mut rng).unwrap();
        let mut top = sel.report.top_adjusted(3);
        top.sort_unstable();
        hits += (top == year.informative) as usize;
        unconverged += (!sel.report.converged) as usize;
    }
    verdict(
        hits >= 95,
        format!("top-3 recovered in {hits}/100 seeds ({unconverged} unconverged)"),
    )
}

// c4, c5, c6 -------------------------------------------------------------

struct Paired {
    final_pso: Vec<f64>,
    final_plain: Vec<f64>,
    first_wins: usize,
    max_ape_wins: usize,
    seconds: f64,
}

fn paired_runs() -> Paired {
    let start = Instant::now();
    let year = common::year(1);
    let data = &year.set;
    let cfg = ScanConfig::default();
    let oracle = cfg.oracle.build(data, Some(&year.informative)).unwrap();
    let truth = full_scan(data, &oracle);
    let known: HashMap<usize, f64> = truth.hours.iter().copied().zip(truth.lambda.iter().copied()).collect();
    let selected = select_weights(data, &oracle, &cfg).unwrap();
    let points = Points::from(data);

    let mut out = Paired {
        final_pso: Vec::new(),
        final_plain: Vec::new(),
        first_wins: 0,
        max_ape_wins: 0,
        seconds: 0.0,
    };
    for seed in 0..20u64 {
        let mut c = cfg.clone();
        c.pso.seed = seed;
        let (pso, outcome) =
            fast_scan_with(data, &oracle, &c, &selected, Clusterer::SelfAdaptivePso).unwrap();
        let (plain, _) = fast_scan_with(
            data,
            &oracle,
            &c,
            &selected,
            Clusterer::PlainKMeans { k: pso.k_final },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = plain_kmeans(points, outcome.k_init, &selected.weights, &mut rng).unwrap();
        if outcome.first_run_history[1] < first.smse_history[1] {
            out.first_wins += 1;
        }
        let vp = validate_with(&pso, data, &oracle, &known, 500, seed).unwrap();
        let vq = validate_with(&plain, data, &oracle, &known, 500, seed).unwrap();
        if vp.max_ape < vq.max_ape {
            out.max_ape_wins += 1;
        }
        out.final_pso.push(pso.smse);
        out.final_plain.push(plain.smse);
    }
    out.seconds = start.elapsed().as_secs_f64();
    out
}

fn c4(p: &Paired) -> Verdict {
    let (mp, mq) = (common::median(&p.final_pso), common::median(&p.final_plain));
    verdict(
        mp <= mq && p.first_wins >= 16,
        format!(
            "median final SMSE {mp:.5} vs plain {mq:.5}; first iteration lower in {}/20",
            p.first_wins
        ),
    )
}

fn default_run() -> (gridscan::scanning::ScanReport, f64) {
    let start = Instant::now();
    let year = common::year(1);
    let cfg = ScanConfig::default();
    let oracle = cfg.oracle.build(&year.set, Some(&year.informative)).unwrap();
    let (report, _) = compare_full_vs_fast(&year.set, &oracle, &cfg, None).unwrap();
    (report, start.elapsed().as_secs_f64())
}

fn c5(report: &gridscan::scanning::ScanReport) -> Verdict {
    let limit = report.hours.len() / 10;
    verdict(
        report.k_final <= limit,
        format!(
            "k_final {} of {} hours (limit {limit}, reduction {:.1}%)",
            report.k_final,
            report.hours.len(),
            100.0 * report.reduction
        ),
    )
}

fn c6(report: &gridscan::scanning::ScanReport, p: &Paired) -> Verdict {
    let v = report.validation.as_ref().unwrap();
    let pass = v.samples.len() == 500 && v.mape <= 0.05 && v.max_ape <= 0.15 && p.max_ape_wins >= 16;
    verdict(
        pass,
        format!(
            "{} samples: MAPE {:.2}%, max APE {:.2}%; PSO max APE lower in {}/20 pairs",
            v.samples.len(),
            100.0 * v.mape,
            100.0 * v.max_ape,
            p.max_ape_wins
        ),
    )
}

// c7 ---------------------------------------------------------------------

fn c7() -> Verdict {
    let year = common::year(1);
    let mut cfg = ScanConfig::default();
    cfg.oracle.delay_ms = 50.0;
    let oracle = cfg.oracle.build(&year.set, Some(&year.informative)).unwrap();
    let (report, trace) = compare_full_vs_fast(&year.set, &oracle, &cfg, None).unwrap();
    let s = report.speedup.unwrap();
    verdict(
        s >= 5.0,
        format!(
            "|R| = {}: full {:.0} s, fast {:.1} s ({} evaluations), speed-up {s:.1}x",
            trace.hours.len(),
            trace.elapsed_s,
            report.timing.fast_total_s(),
            report.oracle_evals
        ),
    )
}

// c8 ---------------------------------------------------------------------

fn c8() -> Verdict {
    let year = common::year(1);
    let data = &year.set;
    let mut cfg = ScanConfig::default();
    cfg.adapt.eps_d = 1e-12;
    cfg.adapt.eps_c = 1e-13;
    let oracle = cfg.oracle.build(data, Some(&year.informative)).unwrap();
    let report = fast_scan(data, &oracle, &cfg).unwrap();
    let truth = full_scan(data, &oracle);
    let equal = report
        .lambda_hat
        .iter()
        .zip(&truth.lambda)
        .filter(|(a, b)| a.to_bits() == b.to_bits())
        .count();
    verdict(
        report.k_final == data.len() && equal == data.len(),
        format!(
            "k_final {} of {}; bitwise equal at {equal} hours",
            report.k_final,
            data.len()
        ),
    )
}

// c9 ---------------------------------------------------------------------

fn rows(seed: u64, n: usize, d: usize, spread: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * d).map(|_| rng.random_range(-spread..spread)).collect()
}

fn positive_weights(seed: u64, d: usize) -> DistanceWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    DistanceWeights::new((0..d).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap()
}

fn suite_distance_axioms() -> Result<(), String> {
    let strategy = (any::<u64>(), 1usize..8);
    property(400, strategy, |(seed, d)| {
        let v = rows(seed, 3, d, 1.0);
        let (x, y, z) = (&v[..d], &v[d..2 * d], &v[2 * d..]);
        let w = positive_weights(seed, d);
        let dxy = w.distance(x, y);
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(w.distance(x, x), 0.0);
        prop_assert_eq!(dxy, w.distance(y, x));
        prop_assert!(w.distance(x, z) <= dxy + w.distance(y, z) + 1e-12);
        if x != y {
            prop_assert!(dxy > 0.0);
        }
        Ok(())
    })
}

fn suite_lloyd_descent() -> Result<(), String> {
    property(300, (any::<u64>(), 2usize..6), |(seed, k)| {
        let data = rows(seed, 60, 3, 1.0);
        let pts = Points::new(&data, 3).unwrap();
        let w = positive_weights(seed, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = plain_kmeans(pts, k, &w, &mut rng).unwrap();
        for pair in run.sse_history.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-15);
        }
        Ok(())
    })
}

fn suite_g_best_monotone() -> Result<(), String> {
    property(150, (any::<u64>(), 2usize..5), |(seed, k)| {
        let data = rows(seed, 50, 2, 1.0);
        let pts = Points::new(&data, 2).unwrap();
        let params = PsoParams {
            seed,
            n_iter: 15,
            p0: 1.0,
            sigma_t2: 1.0,
            ..PsoParams::default()
        };
        let run = run_pso(pts, k, &DistanceWeights::uniform(2), &params).unwrap();
        for pair in run.g_best_history.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
        Ok(())
    })
}

fn suite_adaptive_postconditions() -> Result<(), String> {
    property(250, (any::<u64>(), 1usize..6, 0.1f64..0.6), |(seed, k, eps_d)| {
        let data = rows(seed, 80, 2, 1.0);
        let pts = Points::new(&data, 2).unwrap();
        let w = positive_weights(seed, 2);
        let adapt = AdaptiveParams {
            k_init: None,
            eps_d,
            eps_c: eps_d / 4.0,
            max_outer: 200,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = gridscan::swarm_clustering::random_centroids(pts, k, &mut rng).unwrap();
        let out = adaptive_kmeans(pts, &init, &w, &adapt).unwrap();
        let m = &out.model;
        prop_assert!(m.converged);
        let mut counts = vec![0usize; m.k];
        for (i, &a) in m.assignment.iter().enumerate() {
            let row = pts.row(i);
            // Assignment audit: strict argmin, ties to the lowest index.
            let d: Vec<f64> = m.centroids.iter().map(|c| w.sq_distance(row, c)).collect();
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(d.iter().position(|&v| v == min), Some(a));
            prop_assert_eq!(nearest_centroid(row, &m.centroids, &w).0, a);
            prop_assert!(d[a].sqrt() <= eps_d);
            counts[a] += 1;
        }
        prop_assert!(counts.iter().all(|&c| c > 0));
        for i in 0..m.k {
            for j in i + 1..m.k {
                prop_assert!(w.distance(&m.centroids[i], &m.centroids[j]) >= adapt.eps_c);
            }
        }
        Ok(())
    })
}

fn suite_normalization() -> Result<(), String> {
    property(200, (any::<u64>(), 1usize..40, 1usize..6), |(seed, n, d)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1e4..1e4)).collect())
            .collect();
        let columns = (0..d).map(|j| (format!("a{j}"), AttributeKind::Other)).collect();
        let set = OperatingPointSet::normalize(&raw, columns).unwrap();
        prop_assert!(set.values().iter().all(|v| (-1.0..=1.0).contains(v)));
        for (i, row) in raw.iter().enumerate() {
            for (j, &r) in row.iter().enumerate() {
                let a = &set.attributes()[j];
                if a.raw_max > a.raw_min {
                    let back = a.to_raw(set.row(i)[j]);
                    prop_assert!((back - r).abs() <= 1e-9 * r.abs().max(1.0));
                }
            }
        }
        Ok(())
    })
}

fn suite_oracles() -> Result<(), String> {
    property(50, any::<u64>(), |seed| {
        let informative = [1usize, 4, 6];
        let s = DampingSurrogate::for_attributes(&informative);
        let p = rows(seed, 1, 8, 1.0);
        let first = s.index(&p).unwrap();
        for _ in 0..1000 {
            prop_assert_eq!(s.index(&p).unwrap().to_bits(), first.to_bits());
        }
        let mut q = rows(seed ^ 1, 1, 8, 1.0);
        for &a in &informative {
            q[a] = p[a];
        }
        prop_assert_eq!(s.index(&q).unwrap().to_bits(), first.to_bits());
        prop_assert!(first > 0.0);
        Ok(())
    })
}

fn suite_relief_bounds() -> Result<(), String> {
    property(60, (any::<u64>(), 15usize..50, 1usize..8), |(seed, n, k)| {
        let data = rows(seed, n, 4, 1.0);
        let points: Vec<&[f64]> = data.chunks(4).collect();
        let lambda: Vec<f64> = points.iter().map(|p| p[0] * p[1] + p[3]).collect();
        let samples: Vec<usize> = (0..n).collect();
        let w = relief_weights(&points, &lambda, &samples, k, 3.0).unwrap();
        prop_assert!(w.iter().all(|v| (-1.0..=1.0).contains(v)));
        Ok(())
    })
}

fn c9() -> Verdict {
    let suites: [(&str, fn() -> Result<(), String>); 7] = [
        ("weighted distance axioms", suite_distance_axioms),
        ("Lloyd descent", suite_lloyd_descent),
        ("g_best monotone", suite_g_best_monotone),
        ("argmin audit + split/merge", suite_adaptive_postconditions),
        ("normalization round trip", suite_normalization),
        ("oracle purity", suite_oracles),
        ("relief weight bounds", suite_relief_bounds),
    ];
    let mut failed = Vec::new();
    let mut passed = 0;
    for (name, suite) in suites {
        match suite() {
            Ok(()) => passed += 1,
            Err(e) => failed.push(format!("{name}: {e}")),
        }
    }
    if failed.is_empty() {
        verdict(true, format!("{passed} property suites passed"))
    } else {
        verdict(false, failed.join("; "))
    }
}

// driver -----------------------------------------------------------------

fn main() {
    let wanted: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let enabled = |id: &str| wanted.is_empty() || wanted.iter().any(|w| w == id);

    let mut results: Vec<(Verdict, bool)> = Vec::new();
    // `carried` is time spent up front on runs shared between criteria.
    let mut timed = |id: &str, name: &str, limit_s: u64, carried: f64, f: &mut dyn FnMut() -> Verdict| {
        if !enabled(id) {
            return;
        }
        let start = Instant::now();
        let v = f();
        let secs = carried + start.elapsed().as_secs_f64();
        let in_time = secs <= limit_s as f64;
        print_line(id, name, limit_s, &v, secs);
        results.push((v, in_time));
    };

    timed("c1", "clustering oracle equivalence", 1, 0.0, &mut c1);
    timed("c2", "two-bus oracle equivalence", 5, 0.0, &mut c2);
    timed("c3", "RReliefF recovery", 300, 0.0, &mut c3);

    let shared = (enabled("c4") || enabled("c6")).then(paired_runs);
    let default = (enabled("c5") || enabled("c6")).then(default_run);
    if let Some(p) = &shared {
        timed("c4", "PSO-k-means dominance", 600, p.seconds, &mut || c4(p));
    }
    if let Some((report, secs)) = &default {
        timed("c5", "dimensionality reduction", 600, *secs, &mut || c5(report));
    }
    if let (Some(p), Some((report, secs))) = (&shared, &default) {
        timed("c6", "accuracy", 900, p.seconds + secs, &mut || c6(report, p));
    }
    timed("c7", "speed-up with injected oracle cost", 1800, 0.0, &mut c7);
    timed("c8", "exactness limit", 120, 0.0, &mut c8);
    timed("c9", "invariant suites", 300, 0.0, &mut c9);

    let failed = results.iter().filter(|(v, in_time)| !(v.pass && *in_time)).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn print_line(id: &str, name: &str, limit_s: u64, v: &Verdict, secs: f64) {
    let in_time = secs <= limit_s as f64;
    let status = if v.pass && in_time { "PASS" } else { "FAIL" };
    let time = Duration::from_secs_f64(secs);
    println!(
        "{status} {id} {name}: {}; {:.2?} (limit {limit_s} s){}",
        v.detail,
        time,
        if in_time { "" } else { " over time" }
    );
}

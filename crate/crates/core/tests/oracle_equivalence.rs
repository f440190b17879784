mod common;

use gridscan::dataset::OperatingPointSet;
use gridscan::oracles::{two_bus_margin, StabilityOracle, TwoBusMargin};
use gridscan::swarm_clustering::{kmeans, member_counts, sum_squared_error, DistanceWeights, Points};
use proptest::prelude::*;

/// Best Lloyd result over every ordered pair of distinct starting values.
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

proptest! {
    #[test]
    fn lloyd_best_of_inits_matches_enumeration(
        values in prop::collection::vec(-20i32..20, 2..=10)
    ) {
        let values: Vec<f64> = values.into_iter().map(|v| v as f64 / 4.0).collect();
        let exhaustive = common::all_two_partitions(&values);
        let optimum = exhaustive.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        match best_of_all_inits(&values) {
            None => prop_assert!(values.iter().all(|&v| v == values[0])),
            Some((labels, sse)) => {
                prop_assert!((sse - optimum).abs() <= 1e-9 * optimum.max(1.0));
                let labels = common::canonical(&labels);
                let optimal: Vec<&Vec<usize>> = exhaustive
                    .iter()
                    .filter(|p| (p.1 - optimum).abs() <= 1e-9 * optimum.max(1.0))
                    .map(|p| &p.0)
                    .collect();
                prop_assert!(optimal.contains(&&labels));
            }
        }
    }

    #[test]
    fn closed_form_margin_matches_bisection(
        e in 0.9f64..1.1,
        x in 0.1f64..1.0,
        frac in 0.0f64..1.0,
    ) {
        let p0 = frac * e * e / (2.0 * x);
        let closed = two_bus_margin(e, x, p0);
        let bisected = common::bisect_margin(e, x, p0);
        prop_assert!((closed - bisected).abs() <= 1e-6, "{closed} vs {bisected}");
    }
}

#[test]
fn two_bus_oracle_agrees_with_bisection_on_dataset_rows() {
    let year = common::small_year(5, 200);
    let data: &OperatingPointSet = &year.set;
    let model = TwoBusMargin::for_dataset(data, 1.05, 0.4).unwrap();
    let oracle = StabilityOracle::new(model.clone());
    for row in data.rows() {
        let expected = common::bisect_margin(model.e, model.x, model.base_load(row));
        let got = oracle.evaluate(row).unwrap();
        assert!((got - expected).abs() <= 1e-6);
        assert!(got > 0.0);
    }
}

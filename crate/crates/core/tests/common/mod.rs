//! Independent reference implementations shared by the integration tests and
//! the acceptance harness.

#![allow(dead_code)]

use gridscan::dataset::{generate_synthetic_year, SyntheticYear, SyntheticYearConfig};

/// Largest transferable load of a lossless two-bus system, found by bisection
/// on solvability of the receiving-end voltage equation
/// `V^4 - E^2 V^2 + P^2 X^2 = 0` (a real `V^2 >= 0` root must exist).
pub fn bisect_max_transfer(e: f64, x: f64) -> f64 {
    let solvable = |p: f64| {
        let b = e * e;
        let c = p * p * x * x;
        let disc = b * b - 4.0 * c;
        disc >= 0.0 && (b + disc.sqrt()) / 2.0 >= 0.0
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while solvable(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if solvable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    lo
}

pub fn bisect_margin(e: f64, x: f64, base_load: f64) -> f64 {
    bisect_max_transfer(e, x) - base_load
}

/// Sum of squared distances to the member means for a 1-D two-way split
/// given by `labels`; `None` when either side is empty.
pub fn split_sse(values: &[f64], labels: &[usize]) -> Option<f64> {
    let mut total = 0.0;
    for side in 0..2 {
        let members: Vec<f64> = values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == side)
            .map(|(&v, _)| v)
            .collect();
        if members.is_empty() {
            return None;
        }
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        total += members.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    }
    Some(total)
}

/// Every 2-partition of `values` (point 0 pinned to side 0) with its SSE.
pub fn all_two_partitions(values: &[f64]) -> Vec<(Vec<usize>, f64)> {
    let n = values.len();
    (0u32..1 << (n - 1))
        .filter_map(|mask| {
            let labels: Vec<usize> = (0..n)
                .map(|i| if i == 0 { 0 } else { (mask >> (i - 1) & 1) as usize })
                .collect();
            split_sse(values, &labels).map(|s| (labels, s))
        })
        .collect()
}

/// Relabel so that point 0 is in cluster 0.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    if labels.first() == Some(&1) {
        labels.iter().map(|&l| 1 - l).collect()
    } else {
        labels.to_vec()
    }
}

pub fn year(seed: u64) -> SyntheticYear {
    generate_synthetic_year(&SyntheticYearConfig {
        seed,
        ..Default::default()
    })
    .expect("default synthetic year")
}

pub fn small_year(seed: u64, n_hours: usize) -> SyntheticYear {
    generate_synthetic_year(&SyntheticYearConfig {
        seed,
        n_hours,
        ..Default::default()
    })
    .expect("small synthetic year")
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

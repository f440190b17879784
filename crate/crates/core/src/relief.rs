//! RReliefF attribute estimation for a continuous stability index, the
//! rank/variance weight adjustment, and the loop that grows the training set
//! until ranks and weights settle.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::OperatingPointSet;
use crate::error::{Error, Result};
use crate::oracles::StabilityOracle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReliefParams {
    /// Instances sampled per pass (capped at the training-set size).
    pub m: usize,
    /// Nearest neighbors per sampled instance.
    pub k: usize,
    /// Decay of neighbor influence with rank.
    pub sigma: f64,
    /// Instances added to the training set per pass.
    pub batch: usize,
    /// Minimum Spearman correlation between successive adjusted-rank vectors.
    pub rho_threshold: f64,
    /// Maximum change of any adjusted weight between successive passes.
    pub epsilon_f: f64,
    /// Consecutive passes that must satisfy both criteria.
    pub window: usize,
}

impl Default for ReliefParams {
    fn default() -> Self {
        Self {
            m: 1000,
            k: 10,
            sigma: 4.0,
            batch: 50,
            rho_threshold: 0.8,
            epsilon_f: 0.1,
            window: 2,
        }
    }
}

impl ReliefParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("relief: {m}")));
        if self.m == 0 || self.k == 0 || self.batch == 0 || self.window == 0 {
            return bad("m, k, batch and window must be at least 1");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(0.0..=1.0).contains(&self.rho_threshold) {
            return bad("rho_threshold must lie in [0, 1]");
        }
        if !(self.epsilon_f >= 0.0) {
            return bad("epsilon_f must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub name: String,
    pub weight: f64,
    /// 1 = largest weight.
    pub rank: usize,
    pub adjusted_weight: f64,
    pub adjusted_rank: usize,
    /// Variance of the normalized attribute over the training set.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub features: Vec<FeatureEntry>,
    pub training_size: usize,
    pub converged: bool,
}

impl FeatureReport {
    pub fn weights(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.weight).collect()
    }

    pub fn adjusted_weights(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.adjusted_weight).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.rank).collect()
    }

    pub fn adjusted_ranks(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.adjusted_rank).collect()
    }

    /// Attribute indices of the `n` best adjusted ranks, best first.
    pub fn top_adjusted(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by_key(|&i| self.features[i].adjusted_rank);
        idx.truncate(n);
        idx
    }

    /// Table layout: one row per feature ordered by adjusted rank.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("feature,initial_weight,initial_rank,adjusted_weight,adjusted_rank\n");
        for i in self.top_adjusted(self.features.len()) {
            let f = &self.features[i];
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                f.name, f.weight, f.rank, f.adjusted_weight, f.adjusted_rank
            );
        }
        out
    }
}

/// Difference of attribute `attribute` between two normalized points.
pub fn diff(attribute: usize, r1: &[f64], r2: &[f64]) -> f64 {
    (r1[attribute] - r2[attribute]).abs() / 2.0
}

/// Difference of two stability indices relative to the training-set range.
pub fn prediction_diff(l1: f64, l2: f64, range: f64) -> f64 {
    if range > 0.0 {
        (l1 - l2).abs() / range
    } else {
        0.0
    }
}

/// Unnormalized influence of the neighbor at `rank` (1-based).
pub fn neighbor_influence(rank: usize, sigma: f64) -> f64 {
    let r = rank as f64 / sigma;
    (-(r * r)).exp()
}

/// Influences of ranks `1..=k`, normalized to sum to one.
pub fn neighbor_influences(k: usize, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=k).map(|r| neighbor_influence(r, sigma)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|d| d / total).collect()
}

fn sq_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest other rows to `rows[i]`, nearest first (ties by index).
fn nearest(rows: &[&[f64]], i: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, r)| (sq_euclid(rows[i], r), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// RReliefF weights for the instances listed in `samples` (positions into
/// `rows`), in that order.
pub fn relief_weights(
    rows: &[&[f64]],
    lambda: &[f64],
    samples: &[usize],
    k: usize,
    sigma: f64,
) -> Result<Vec<f64>> {
    let n = rows.len();
    if lambda.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: lambda.len(),
        });
    }
    if n <= k {
        return Err(Error::TrainingTooSmall { size: n, k });
    }
    let dim = rows.first().map_or(0, |r| r.len());
    let (lo, hi) = lambda
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
            (lo.min(l), hi.max(l))
        });
    let range = hi - lo;
    let influence = neighbor_influences(k, sigma);

    let neighbors: Vec<Vec<usize>> = samples
        .par_iter()
        .map(|&i| nearest(rows, i, k))
        .collect();

    let mut n_dc = 0.0;
    let mut n_da = vec![0.0; dim];
    let mut n_dca = vec![0.0; dim];
    for (&i, near) in samples.iter().zip(&neighbors) {
        for (&j, &d) in near.iter().zip(&influence) {
            let dc = prediction_diff(lambda[i], lambda[j], range);
            n_dc += dc * d;
            for l in 0..dim {
                let da = diff(l, rows[i], rows[j]);
                n_da[l] += da * d;
                n_dca[l] += dc * da * d;
            }
        }
    }

    let m = samples.len() as f64;
    if n_dc <= 0.0 {
        return Err(Error::DegeneratePrediction(
            "all sampled stability indices are identical".into(),
        ));
    }
    if m - n_dc <= f64::EPSILON * m {
        return Err(Error::DegeneratePrediction(
            "every neighbor pair differs maximally in the stability index".into(),
        ));
    }
    Ok((0..dim)
        .map(|l| n_dca[l] / n_dc - (n_da[l] - n_dca[l]) / (m - n_dc))
        .collect())
}

/// Ranks with 1 for the largest value, ties broken by lower index.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

/// One RReliefF pass over a training set.
pub fn rrelieff_pass(
    training: &OperatingPointSet,
    lambda: &[f64],
    params: &ReliefParams,
    rng: &mut impl Rng,
) -> Result<FeatureReport> {
    let n = training.len();
    let m = params.m.min(n);
    let samples = index::sample(rng, n, m).into_vec();
    let rows: Vec<&[f64]> = training.rows().collect();
    let weights = relief_weights(&rows, lambda, &samples, params.k, params.sigma)?;
    let ranks = rank_descending(&weights);
    let variances = training.column_variances();
    let features = training
        .attributes()
        .iter()
        .enumerate()
        .map(|(i, a)| FeatureEntry {
            name: a.name.clone(),
            weight: weights[i],
            rank: ranks[i],
            adjusted_weight: weights[i],
            adjusted_rank: ranks[i],
            variance: variances[i],
        })
        .collect();
    Ok(FeatureReport {
        features,
        training_size: n,
        converged: false,
    })
}

fn unscaled_adjustment(f: &FeatureEntry) -> f64 {
    f.weight * f.variance / (2.0 * f.rank as f64).ln()
}

/// Scale that makes the largest adjusted weight equal to one.
pub fn default_scale(report: &FeatureReport) -> f64 {
    let max = report
        .features
        .iter()
        .map(unscaled_adjustment)
        .fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 && max.is_finite() {
        1.0 / max
    } else {
        1.0
    }
}

/// `w̃ = C · w · var / ln(2 · rank)`, then re-rank on `w̃`.
pub fn adjust_weights(report: &FeatureReport, scale: f64) -> FeatureReport {
    let mut out = report.clone();
    for f in &mut out.features {
        f.adjusted_weight = scale * unscaled_adjustment(f);
    }
    let ranks = rank_descending(&out.adjusted_weights());
    for (f, r) in out.features.iter_mut().zip(ranks) {
        f.adjusted_rank = r;
    }
    out
}

/// Spearman correlation of two rank vectors without ties.
pub fn spearman(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    if a.len() < 2 {
        return 1.0;
    }
    let d2: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub training_size: usize,
    pub rho: Option<f64>,
    pub drift: Option<f64>,
}

/// Outcome of adaptive feature selection.
#[derive(Debug, Clone)]
pub struct Selection {
    pub report: FeatureReport,
    /// Row positions consumed, in sampling order.
    pub training: Vec<usize>,
    /// Stability index for each entry of `training`.
    pub lambda: Vec<f64>,
    /// Row positions whose oracle evaluation failed.
    pub failed: Vec<usize>,
    pub history: Vec<PassRecord>,
}

/// Grow a random training set `batch` points at a time, re-estimating the
/// adjusted weights after each growth step, until the adjusted ranks and
/// weights have been stable for `window` consecutive passes.
///
/// `scale` is the adjustment constant; `None` picks the one that makes the
/// largest adjusted weight equal to one on every pass.
pub fn select_features(
    data: &OperatingPointSet,
    oracle: &StabilityOracle,
    params: &ReliefParams,
    scale: Option<f64>,
    rng: &mut impl Rng,
) -> Result<Selection> {
    params.validate()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);

    let mut training = Vec::new();
    let mut lambda = Vec::new();
    let mut failed = Vec::new();
    let mut history = Vec::new();
    let mut previous: Option<FeatureReport> = None;
    let mut streak = 0;
    let mut converged = false;

    for chunk in order.chunks(params.batch) {
        let results: Vec<(usize, Result<f64>)> = chunk
            .par_iter()
            .map(|&p| (p, oracle.evaluate(data.row(p))))
            .collect();
        for (p, r) in results {
            match r {
                Ok(l) => {
                    training.push(p);
                    lambda.push(l);
                }
                Err(_) => failed.push(p),
            }
        }
        if training.len() <= params.k {
            continue;
        }

        let subset = data.select_rows(&training);
        let raw = rrelieff_pass(&subset, &lambda, params, rng)?;
        let c = scale.unwrap_or_else(|| default_scale(&raw));
        let report = adjust_weights(&raw, c);

        let mut record = PassRecord {
            training_size: training.len(),
            rho: None,
            drift: None,
        };
        if let Some(prev) = &previous {
            let rho = spearman(&prev.adjusted_ranks(), &report.adjusted_ranks());
            let drift = prev
                .features
                .iter()
                .zip(&report.features)
                .map(|(a, b)| (a.adjusted_weight - b.adjusted_weight).abs())
                .fold(0.0, f64::max);
            record.rho = Some(rho);
            record.drift = Some(drift);
            if rho >= params.rho_threshold && drift <= params.epsilon_f {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        history.push(record);
        previous = Some(report);
        if streak >= params.window {
            converged = true;
            break;
        }
    }

    let mut report = previous.ok_or(Error::TrainingTooSmall {
        size: training.len(),
        k: params.k,
    })?;
    report.converged = converged;
    report.training_size = training.len();
    Ok(Selection {
        report,
        training,
        lambda,
        failed,
        history,
    })
}

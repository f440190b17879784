//! End-to-end fast scan: feature selection, weighted clustering, oracle
//! evaluation at the centroids only, and accuracy/speed-up accounting against
//! the exhaustive scan.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::OperatingPointSet;
use crate::error::{Error, Result};
use crate::oracles::{
    full_scan, DampingSurrogate, OracleKind, StabilityOracle, StabilityTrace, Tabulated,
    TwoBusMargin,
};
use crate::relief::{select_features, FeatureReport, ReliefParams, Selection};
use crate::swarm_clustering::{
    member_counts, plain_kmeans, self_adaptive_pso_kmeans, AdaptiveOutcome, AdaptiveParams,
    ClusterModel, DistanceWeights, Points, PsoParams,
};

/// Hours with `|λ|` below this use the absolute error instead of the
/// percentage error.
pub const NEAR_ZERO_LAMBDA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    DampingSurrogate {
        /// Attributes the default coefficients use; falls back to the
        /// dataset metadata.
        #[serde(default)]
        informative: Option<Vec<usize>>,
        #[serde(default)]
        coefficients: Option<DampingSurrogate>,
    },
    TwoBusMargin {
        e: f64,
        x: f64,
        /// Defaults to every `load_p` column.
        #[serde(default)]
        load_columns: Option<Vec<usize>>,
    },
    Tabulated {
        /// `hour,lambda` CSV.
        trace: PathBuf,
    },
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec::DampingSurrogate {
            informative: None,
            coefficients: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub model: OracleSpec,
    /// Artificial cost added to every evaluation.
    pub delay_ms: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            model: OracleSpec::default(),
            delay_ms: 0.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delay_ms >= 0.0 && self.delay_ms.is_finite()) {
            return Err(Error::InvalidConfig("oracle.delay_ms must be non-negative".into()));
        }
        if let OracleSpec::TwoBusMargin { e, x, .. } = &self.model {
            if !(*e > 0.0 && *x > 0.0) {
                return Err(Error::InvalidConfig("oracle: need e > 0 and x > 0".into()));
            }
        }
        Ok(())
    }

    /// `informative` is used when the spec does not name the attributes.
    pub fn build(&self, data: &OperatingPointSet, informative: Option<&[usize]>) -> Result<StabilityOracle> {
        self.validate()?;
        let oracle = match &self.model {
            OracleSpec::DampingSurrogate {
                informative: listed,
                coefficients,
            } => {
                let model = match (coefficients, listed.as_deref().or(informative)) {
                    (Some(c), _) => c.clone(),
                    (None, Some(attrs)) => DampingSurrogate::for_attributes(attrs),
                    (None, None) => {
                        return Err(Error::InvalidConfig(
                            "damping surrogate needs `informative` or `coefficients`".into(),
                        ))
                    }
                };
                if let Some(a) = model.max_attribute() {
                    if a >= data.n_attributes() {
                        return Err(Error::InvalidConfig(format!(
                            "damping surrogate uses attribute {a} but the dataset has {}",
                            data.n_attributes()
                        )));
                    }
                }
                StabilityOracle::new(model)
            }
            OracleSpec::TwoBusMargin { e, x, load_columns } => {
                let model = match load_columns {
                    Some(cols) => TwoBusMargin::new(*e, *x, cols.clone())?,
                    None => TwoBusMargin::for_dataset(data, *e, *x)?,
                };
                StabilityOracle::new(model)
            }
            OracleSpec::Tabulated { trace } => {
                let text = std::fs::read_to_string(trace).map_err(|e| Error::io(trace, e))?;
                let trace = StabilityTrace::from_csv(&text, OracleKind::Tabulated)?;
                StabilityOracle::new(Tabulated::from_trace(data, &trace)?)
            }
        };
        Ok(oracle.with_delay(Duration::from_secs_f64(self.delay_ms / 1000.0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub relief: ReliefParams,
    /// Weight-adjustment constant; `None` scales the largest adjusted weight
    /// to one.
    pub scale: Option<f64>,
    pub pso: PsoParams,
    pub adapt: AdaptiveParams,
    pub oracle: OracleConfig,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            relief: ReliefParams::default(),
            scale: None,
            pso: PsoParams::default(),
            adapt: AdaptiveParams::default(),
            oracle: OracleConfig::default(),
            sample_size: 500,
            seed: 1,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        self.relief.validate()?;
        self.pso.validate()?;
        self.adapt.validate()?;
        self.oracle.validate()?;
        if let Some(c) = self.scale {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidConfig("scale must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn validate_for(&self, data: &OperatingPointSet) -> Result<()> {
        self.validate()?;
        if self.sample_size > data.len() {
            return Err(Error::InvalidConfig(format!(
                "sample_size {} exceeds the {} available hours",
                self.sample_size,
                data.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub feature_selection_s: f64,
    pub clustering_s: f64,
    pub centroid_eval_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub full_scan_s: Option<f64>,
}

impl Timing {
    pub fn fast_total_s(&self) -> f64 {
        self.feature_selection_s + self.clustering_s + self.centroid_eval_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSample {
    pub hour: usize,
    pub lambda: f64,
    pub lambda_hat: f64,
    /// Fractional error, or the absolute error when `absolute` is set.
    pub ape: f64,
    pub absolute: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Percent.
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub samples: Vec<ValidationSample>,
    /// Mean of `ape` over all samples (fraction).
    pub mape: f64,
    pub max_ape: f64,
    pub histogram: Vec<HistogramBin>,
    pub failed_hours: Vec<usize>,
    /// Samples whose λ came from feature selection or a full-scan trace.
    pub reused: usize,
}

impl Validation {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for b in &self.histogram {
            out.push_str(&format!("{},{},{}\n", b.low, b.high, b.count));
        }
        out
    }
}

/// One-percentage-point bins from 0 up to the bin holding the largest error.
pub fn error_histogram(apes: &[f64]) -> Vec<HistogramBin> {
    let bin = |a: f64| (a * 100.0).floor().max(0.0) as usize;
    let top = apes.iter().copied().map(bin).max().unwrap_or(0);
    let mut counts = vec![0usize; top + 1];
    for &a in apes {
        counts[bin(a)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            low: i as f64,
            high: (i + 1) as f64,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub oracle_kind: OracleKind,
    pub hours: Vec<usize>,
    pub lambda_hat: Vec<f64>,
    pub cluster_id: Vec<usize>,
    pub centroid_lambda: Vec<f64>,
    pub k_init: usize,
    pub k_final: usize,
    pub reduction: f64,
    pub smse: f64,
    pub eps_d: f64,
    pub eps_c: f64,
    pub training_size: usize,
    pub training_hours: Vec<usize>,
    pub feature_selection_converged: bool,
    pub clustering_converged: bool,
    pub outer_passes: usize,
    /// Oracle calls made by feature selection and centroid evaluation.
    pub oracle_evals: u64,
    pub features: FeatureReport,
    pub timing: Timing,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub validation: Option<Validation>,
    /// Exhaustive-scan λ per hour, when available.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub speedup: Option<f64>,
}

impl ScanReport {
    pub fn converged(&self) -> bool {
        self.feature_selection_converged && self.clustering_converged
    }

    /// `hour,lambda,lambda_hat`; `lambda` is blank without a full scan.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("hour,lambda,lambda_hat\n");
        for (i, (h, lh)) in self.hours.iter().zip(&self.lambda_hat).enumerate() {
            match &self.lambda {
                Some(l) => out.push_str(&format!("{h},{},{lh}\n", l[i])),
                None => out.push_str(&format!("{h},,{lh}\n")),
            }
        }
        out
    }

    /// Known λ values keyed by hour: training points plus the full trace.
    fn known_lambda(&self, selection_lambda: &[f64]) -> HashMap<usize, f64> {
        let mut known: HashMap<usize, f64> = self
            .training_hours
            .iter()
            .copied()
            .zip(selection_lambda.iter().copied())
            .collect();
        if let Some(l) = &self.lambda {
            known.extend(self.hours.iter().copied().zip(l.iter().copied()));
        }
        known
    }
}

/// Which clustering turns the weights into representatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clusterer {
    SelfAdaptivePso,
    /// Conventional k-means from random data points with a fixed `k`.
    PlainKMeans { k: usize },
}

/// Feature selection plus the distance weights derived from it.
#[derive(Debug, Clone)]
pub struct WeightedSelection {
    pub selection: Selection,
    pub weights: DistanceWeights,
    pub seconds: f64,
}

pub fn select_weights(
    data: &OperatingPointSet,
    oracle: &StabilityOracle,
    config: &ScanConfig,
) -> Result<WeightedSelection> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let selection = select_features(data, oracle, &config.relief, config.scale, &mut rng)?;
    let weights = DistanceWeights::from_adjusted(&selection.report.adjusted_weights())?;
    Ok(WeightedSelection {
        selection,
        weights,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn plain_model(
    points: Points<'_>,
    k: usize,
    w: &DistanceWeights,
    seed: u64,
) -> Result<AdaptiveOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = plain_kmeans(points, k, w, &mut rng)?;
    let counts = member_counts(&run.assignment, run.centroids.len());
    let mut map = vec![usize::MAX; counts.len()];
    let mut centroids = Vec::new();
    for (j, c) in run.centroids.into_iter().enumerate() {
        if counts[j] > 0 {
            map[j] = centroids.len();
            centroids.push(c);
        }
    }
    let assignment = run.assignment.iter().map(|&j| map[j]).collect();
    let model = ClusterModel::new(points, centroids, assignment, w.clone(), run.converged)?;
    Ok(AdaptiveOutcome {
        model,
        k_init: k,
        pso_history: Vec::new(),
        first_run_history: run.smse_history,
        outer_passes: 1,
        removed_empty: counts.iter().filter(|&&c| c == 0).count(),
        splits: 0,
        merges: 0,
    })
}

/// Cluster with the selected weights and evaluate the oracle at the
/// centroids only.
pub fn fast_scan_with(
    data: &OperatingPointSet,
    oracle: &StabilityOracle,
    config: &ScanConfig,
    selected: &WeightedSelection,
    clusterer: Clusterer,
) -> Result<(ScanReport, AdaptiveOutcome)> {
    config.validate()?;
    let evals_before = oracle.eval_count();
    let points = Points::from(data);

    let start = Instant::now();
    let outcome = match clusterer {
        Clusterer::SelfAdaptivePso => {
            self_adaptive_pso_kmeans(points, &selected.weights, &config.pso, &config.adapt)?
        }
        Clusterer::PlainKMeans { k } => plain_model(points, k, &selected.weights, config.pso.seed)?,
    };
    let clustering_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let centroid_lambda = outcome
        .model
        .centroids
        .par_iter()
        .map(|c| oracle.evaluate(c))
        .collect::<Result<Vec<f64>>>()?;
    let centroid_eval_s = start.elapsed().as_secs_f64();

    let model = &outcome.model;
    let lambda_hat = model.assignment.iter().map(|&j| centroid_lambda[j]).collect();
    let sel = &selected.selection;
    let selection_evals = (sel.training.len() + sel.failed.len()) as u64;
    let report = ScanReport {
        oracle_kind: oracle.kind(),
        hours: data.hours().to_vec(),
        lambda_hat,
        cluster_id: model.assignment.clone(),
        centroid_lambda,
        k_init: outcome.k_init,
        k_final: model.k,
        reduction: 1.0 - model.k as f64 / data.len() as f64,
        smse: model.smse,
        eps_d: config.adapt.eps_d,
        eps_c: config.adapt.eps_c,
        training_size: sel.training.len(),
        training_hours: sel.training.iter().map(|&p| data.hours()[p]).collect(),
        feature_selection_converged: sel.report.converged,
        clustering_converged: model.converged,
        outer_passes: outcome.outer_passes,
        oracle_evals: selection_evals + (oracle.eval_count() - evals_before),
        features: sel.report.clone(),
        timing: Timing {
            feature_selection_s: selected.seconds,
            clustering_s,
            centroid_eval_s,
            full_scan_s: None,
        },
        validation: None,
        lambda: None,
        speedup: None,
    };
    Ok((report, outcome))
}

/// Feature selection, self-adaptive clustering and centroid evaluation.
pub fn fast_scan(
    data: &OperatingPointSet,
    oracle: &StabilityOracle,
    config: &ScanConfig,
) -> Result<ScanReport> {
    config.validate_for(data)?;
    let selected = select_weights(data, oracle, config)?;
    Ok(fast_scan_with(data, oracle, config, &selected, Clusterer::SelfAdaptivePso)?.0)
}

/// Compare `λ̂` with the oracle on `sample_size` random hours, preferring
/// hours not used for feature selection. `known` supplies λ values that need
/// no new evaluation.
pub fn validate_with(
    report: &ScanReport,
    data: &OperatingPointSet,
    oracle: &StabilityOracle,
    known: &HashMap<usize, f64>,
    sample_size: usize,
    seed: u64,
) -> Result<Validation> {
    if sample_size > data.len() {
        return Err(Error::InvalidConfig(format!(
            "sample_size {sample_size} exceeds the {} available hours",
            data.len()
        )));
    }
    let training: std::collections::HashSet<usize> = report.training_hours.iter().copied().collect();
    let (fresh, used): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&p| !training.contains(&data.hours()[p]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = if fresh.len() >= sample_size {
        index::sample(&mut rng, fresh.len(), sample_size)
            .into_iter()
            .map(|i| fresh[i])
            .collect()
    } else {
        let extra = sample_size - fresh.len();
        let mut all = fresh.clone();
        all.extend(
            index::sample(&mut rng, used.len(), extra)
                .into_iter()
                .map(|i| used[i]),
        );
        all
    };
    picked.sort_unstable();

    let evaluated: Vec<(usize, Option<f64>, bool)> = picked
        .par_iter()
        .map(|&p| {
            let hour = data.hours()[p];
            match known.get(&hour) {
                Some(&l) => (p, Some(l), true),
                None => (p, oracle.evaluate(data.row(p)).ok(), false),
            }
        })
        .collect();

    let mut samples = Vec::with_capacity(picked.len());
    let mut failed_hours = Vec::new();
    let mut reused = 0;
    for (p, l, was_known) in evaluated {
        let hour = data.hours()[p];
        let Some(lambda) = l else {
            failed_hours.push(hour);
            continue;
        };
        reused += was_known as usize;
        let lambda_hat = report.lambda_hat[p];
        let err = (lambda - lambda_hat).abs();
        let absolute = lambda.abs() < NEAR_ZERO_LAMBDA;
        samples.push(ValidationSample {
            hour,
            lambda,
            lambda_hat,
            ape: if absolute { err } else { err / lambda.abs() },
            absolute,
        });
    }
    let apes: Vec<f64> = samples.iter().map(|s| s.ape).collect();
    let mape = if apes.is_empty() {
        0.0
    } else {
        apes.iter().sum::<f64>() / apes.len() as f64
    };
    Ok(Validation {
        mape,
        max_ape: apes.iter().copied().fold(0.0, f64::max),
        histogram: error_histogram(&apes),
        samples,
        failed_hours,
        reused,
    })
}

/// [`validate_with`] reusing the λ values gathered during feature selection.
pub fn validate(
    report: &ScanReport,
    data: &OperatingPointSet,
    oracle: &StabilityOracle,
    selection_lambda: &[f64],
    sample_size: usize,
    seed: u64,
) -> Result<Validation> {
    let known = report.known_lambda(selection_lambda);
    validate_with(report, data, oracle, &known, sample_size, seed)
}

/// Run the exhaustive scan (or reuse `cached`) and the fast scan, validate
/// against the exhaustive trace and report the wall-clock speed-up.
pub fn compare_full_vs_fast(
    data: &OperatingPointSet,
    oracle: &StabilityOracle,
    config: &ScanConfig,
    cached: Option<StabilityTrace>,
) -> Result<(ScanReport, StabilityTrace)> {
    config.validate_for(data)?;
    let trace = match cached {
        Some(t) if t.hours == data.hours() && !t.is_partial() => t,
        _ => full_scan(data, oracle),
    };
    if trace.is_partial() {
        return Err(Error::Oracle(format!(
            "full scan failed at {} hours",
            trace.failed_hours.len()
        )));
    }
    let selected = select_weights(data, oracle, config)?;
    let (mut report, _) = fast_scan_with(data, oracle, config, &selected, Clusterer::SelfAdaptivePso)?;
    report.lambda = Some(trace.lambda.clone());
    report.timing.full_scan_s = Some(trace.elapsed_s);
    let fast = report.timing.fast_total_s();
    report.speedup = Some(if fast > 0.0 { trace.elapsed_s / fast } else { f64::INFINITY });
    let known = report.known_lambda(&selected.selection.lambda);
    report.validation = Some(validate_with(
        &report,
        data,
        oracle,
        &known,
        config.sample_size,
        config.seed ^ 0x5eed,
    )?);
    Ok((report, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub min_lambda_hour: usize,
    pub min_lambda: f64,
    pub max_demand_hour: usize,
    pub max_demand: f64,
    pub correlation: f64,
    /// The least stable hour is not the peak-demand hour.
    pub shifted: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Does the least stable hour coincide with peak demand? `demand` is aligned
/// with `trace.hours`.
pub fn worst_case_analysis(trace: &StabilityTrace, demand: &[f64]) -> Result<WorstCase> {
    if trace.lambda.len() != demand.len() || demand.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: trace.lambda.len(),
            actual: demand.len(),
        });
    }
    let argmin = (0..demand.len())
        .min_by(|&a, &b| trace.lambda[a].total_cmp(&trace.lambda[b]).then(a.cmp(&b)))
        .expect("non-empty");
    let argmax = (0..demand.len())
        .max_by(|&a, &b| demand[a].total_cmp(&demand[b]).then(b.cmp(&a)))
        .expect("non-empty");
    Ok(WorstCase {
        min_lambda_hour: trace.hours[argmin],
        min_lambda: trace.lambda[argmin],
        max_demand_hour: trace.hours[argmax],
        max_demand: demand[argmax],
        correlation: pearson(&trace.lambda, demand),
        shifted: argmin != argmax,
    })
}

//! Stability-index evaluators.
//!
//! The analytic models here are cheap, pure stand-ins for modal analysis and
//! continuation load flow. [`StabilityOracle`] wraps any model with an
//! evaluation counter and an optional artificial per-call cost.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, OperatingPointSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    DampingSurrogate,
    TwoBusMargin,
    Tabulated,
    /// Supplied by the embedding application.
    External,
}

/// A deterministic map from a normalized operating point to a stability index.
pub trait StabilityModel: Send + Sync {
    fn kind(&self) -> OracleKind;
    fn index(&self, point: &[f64]) -> Result<f64>;
}

/// Quadratic surrogate for the damping ratio of a critical mode:
/// `b0 + Σ b_i x_i + Σ b_ij x_i x_j` over a sparse set of attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSurrogate {
    pub intercept: f64,
    pub linear: Vec<(usize, f64)>,
    pub pairwise: Vec<(usize, usize, f64)>,
}

impl DampingSurrogate {
    /// Coefficients used with synthetic years: a 12 % base damping ratio,
    /// alternating-sign linear terms and interactions between neighbours in
    /// `informative`. Stays positive for any point in `[-1, 1]^n` with up to
    /// three informative attributes.
    pub fn for_attributes(informative: &[usize]) -> Self {
        let linear = informative
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                (a, sign * 0.02 * 0.8f64.powi(i as i32))
            })
            .collect();
        let mut pairwise = Vec::new();
        if informative.len() >= 2 {
            for i in 0..informative.len() {
                let j = (i + 1) % informative.len();
                if j == i || (informative.len() == 2 && i == 1) {
                    continue;
                }
                pairwise.push((informative[i], informative[j], 0.01));
            }
        }
        Self {
            intercept: 0.12,
            linear,
            pairwise,
        }
    }

    pub fn max_attribute(&self) -> Option<usize> {
        self.linear
            .iter()
            .map(|&(a, _)| a)
            .chain(self.pairwise.iter().flat_map(|&(a, b, _)| [a, b]))
            .max()
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        let mut l = self.intercept;
        for &(a, b) in &self.linear {
            l += b * point[a];
        }
        for &(a, c, b) in &self.pairwise {
            l += b * point[a] * point[c];
        }
        l
    }
}

impl StabilityModel for DampingSurrogate {
    fn kind(&self) -> OracleKind {
        OracleKind::DampingSurrogate
    }

    fn index(&self, point: &[f64]) -> Result<f64> {
        match self.max_attribute() {
            Some(a) if a >= point.len() => Err(Error::DimensionMismatch {
                expected: a + 1,
                actual: point.len(),
            }),
            _ => Ok(self.evaluate(point)),
        }
    }
}

/// Loading margin of a lossless line feeding a unity-power-factor load.
pub fn two_bus_margin(e: f64, x: f64, base_load: f64) -> f64 {
    e * e / (2.0 * x) - base_load
}

/// Two-bus voltage-stability stand-in. The base load is an affine map of the
/// mean of the designated normalized load columns onto
/// `[0, load_fraction · E²/(2X)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoBusMargin {
    pub e: f64,
    pub x: f64,
    pub load_columns: Vec<usize>,
    pub load_fraction: f64,
}

impl TwoBusMargin {
    pub fn new(e: f64, x: f64, load_columns: Vec<usize>) -> Result<Self> {
        if !(e > 0.0 && x > 0.0) {
            return Err(Error::InvalidConfig(
                "two-bus margin needs E > 0 and X > 0".into(),
            ));
        }
        if load_columns.is_empty() {
            return Err(Error::InvalidConfig(
                "two-bus margin needs at least one load column".into(),
            ));
        }
        Ok(Self {
            e,
            x,
            load_columns,
            load_fraction: 0.9,
        })
    }

    /// Uses every `load_p` column of `data`.
    pub fn for_dataset(data: &OperatingPointSet, e: f64, x: f64) -> Result<Self> {
        Self::new(e, x, data.columns_of_kind(AttributeKind::LoadP))
    }

    pub fn max_transfer(&self) -> f64 {
        self.e * self.e / (2.0 * self.x)
    }

    pub fn base_load(&self, point: &[f64]) -> f64 {
        let mean = self.load_columns.iter().map(|&j| point[j]).sum::<f64>()
            / self.load_columns.len() as f64;
        (mean + 1.0) / 2.0 * self.load_fraction * self.max_transfer()
    }
}

impl StabilityModel for TwoBusMargin {
    fn kind(&self) -> OracleKind {
        OracleKind::TwoBusMargin
    }

    fn index(&self, point: &[f64]) -> Result<f64> {
        if let Some(&j) = self.load_columns.iter().find(|&&j| j >= point.len()) {
            return Err(Error::DimensionMismatch {
                expected: j + 1,
                actual: point.len(),
            });
        }
        Ok(two_bus_margin(self.e, self.x, self.base_load(point)))
    }
}

/// Precomputed indices for known operating points. A query returns the
/// index of the nearest stored point (unweighted Euclidean, ties to the
/// lowest row).
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    dim: usize,
    points: Vec<f64>,
    lambda: Vec<f64>,
}

impl Tabulated {
    pub fn new(data: &OperatingPointSet, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != data.len() || data.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                actual: lambda.len(),
            });
        }
        if let Some(i) = lambda.iter().position(|l| !l.is_finite()) {
            return Err(Error::InvalidData(format!(
                "tabulated index at row {i} is not finite"
            )));
        }
        Ok(Self {
            dim: data.n_attributes(),
            points: data.values().to_vec(),
            lambda,
        })
    }

    /// Look up indices by hour from a `hour,lambda` trace.
    pub fn from_trace(data: &OperatingPointSet, trace: &StabilityTrace) -> Result<Self> {
        let by_hour: std::collections::HashMap<usize, f64> = trace
            .hours
            .iter()
            .copied()
            .zip(trace.lambda.iter().copied())
            .collect();
        let lambda = data
            .hours()
            .iter()
            .map(|h| {
                by_hour
                    .get(h)
                    .copied()
                    .ok_or_else(|| Error::InvalidData(format!("trace has no value for hour {h}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(data, lambda)
    }
}

impl StabilityModel for Tabulated {
    fn kind(&self) -> OracleKind {
        OracleKind::Tabulated
    }

    fn index(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: point.len(),
            });
        }
        let mut best = (f64::INFINITY, 0);
        for (i, row) in self.points.chunks_exact(self.dim).enumerate() {
            let d: f64 = row.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(self.lambda[best.1])
    }
}

/// A stability model plus call accounting and an injectable per-call cost.
pub struct StabilityOracle {
    model: Box<dyn StabilityModel>,
    delay: Option<Duration>,
    evals: AtomicU64,
}

impl std::fmt::Debug for StabilityOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StabilityOracle")
            .field("kind", &self.kind())
            .field("delay", &self.delay)
            .field("evals", &self.eval_count())
            .finish()
    }
}

impl StabilityOracle {
    pub fn new(model: impl StabilityModel + 'static) -> Self {
        Self::from_box(Box::new(model))
    }

    pub fn from_box(model: Box<dyn StabilityModel>) -> Self {
        Self {
            model,
            delay: None,
            evals: AtomicU64::new(0),
        }
    }

    /// Sleep for `delay` on every evaluation.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = (!delay.is_zero()).then_some(delay);
        self
    }

    pub fn kind(&self) -> OracleKind {
        self.model.kind()
    }

    pub fn delay(&self) -> Option<Duration> {
        self.delay
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        let l = self.model.index(point)?;
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::Oracle(format!("non-finite stability index {l}")))
        }
    }
}

/// Stability index for every hour that evaluated successfully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTrace {
    pub kind: OracleKind,
    pub hours: Vec<usize>,
    pub lambda: Vec<f64>,
    /// Hours whose evaluation failed; absent from `hours`/`lambda`.
    #[serde(default)]
    pub failed_hours: Vec<usize>,
    #[serde(default)]
    pub elapsed_s: f64,
}

impl StabilityTrace {
    pub fn is_partial(&self) -> bool {
        !self.failed_hours.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("hour,lambda\n");
        for (h, l) in self.hours.iter().zip(&self.lambda) {
            out.push_str(&format!("{h},{l}\n"));
        }
        out
    }

    pub fn from_csv(text: &str, kind: OracleKind) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut hours = Vec::new();
        let mut lambda = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |m: String| Error::Parse {
                path: "trace".into(),
                row: i + 1,
                line: i + 2,
                message: m,
            };
            if rec.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", rec.len())));
            }
            hours.push(rec[0].parse().map_err(|_| bad(format!("invalid hour `{}`", &rec[0])))?);
            let l: f64 = rec[1]
                .parse()
                .map_err(|_| bad(format!("invalid lambda `{}`", &rec[1])))?;
            if !l.is_finite() {
                return Err(bad("non-finite lambda".into()));
            }
            lambda.push(l);
        }
        Ok(Self {
            kind,
            hours,
            lambda,
            failed_hours: Vec::new(),
            elapsed_s: 0.0,
        })
    }

    /// Value for a given hour, if present.
    pub fn get(&self, hour: usize) -> Option<f64> {
        self.hours.iter().position(|&h| h == hour).map(|i| self.lambda[i])
    }
}

/// Evaluate the oracle at every hour.
pub fn full_scan(data: &OperatingPointSet, oracle: &StabilityOracle) -> StabilityTrace {
    let start = Instant::now();
    let results: Vec<Result<f64>> = (0..data.len())
        .into_par_iter()
        .map(|i| oracle.evaluate(data.row(i)))
        .collect();
    let mut trace = StabilityTrace {
        kind: oracle.kind(),
        hours: Vec::with_capacity(data.len()),
        lambda: Vec::with_capacity(data.len()),
        failed_hours: Vec::new(),
        elapsed_s: 0.0,
    };
    for (&h, r) in data.hours().iter().zip(results) {
        match r {
            Ok(l) => {
                trace.hours.push(h);
                trace.lambda.push(l);
            }
            Err(_) => trace.failed_hours.push(h),
        }
    }
    trace.elapsed_s = start.elapsed().as_secs_f64();
    trace
}

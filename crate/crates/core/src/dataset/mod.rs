//! Operating points: one normalized feature vector per hour of the study year.
//!
//! Every attribute column is mapped affinely onto `[-1, 1]` using the column's
//! own minimum and maximum. The raw bounds stay on the [`Attribute`] so values
//! can be mapped back to native units.

mod csv_io;
mod synthetic;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, read_sidecar, sidecar_path, write_csv, NormalizationSidecar};
pub use synthetic::{generate_synthetic_year, SyntheticYear, SyntheticYearConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    GeneratorP,
    GeneratorQ,
    LoadP,
    LoadQ,
    InterconnectorP,
    InterconnectorQ,
    HvdcP,
    HvdcQ,
    Other,
}

impl AttributeKind {
    /// Guess the kind from a column name such as `load3_P` or `WF04_Q`.
    pub fn infer(name: &str) -> Self {
        let lower = name.to_ascii_lowercase();
        let reactive = lower.ends_with("_q") || lower.ends_with(".q");
        let active = lower.ends_with("_p") || lower.ends_with(".p");
        let pick = |p: AttributeKind, q: AttributeKind| {
            if reactive {
                q
            } else if active {
                p
            } else {
                AttributeKind::Other
            }
        };
        if lower.starts_with("load") {
            pick(AttributeKind::LoadP, AttributeKind::LoadQ)
        } else if lower.starts_with("hvdc") {
            pick(AttributeKind::HvdcP, AttributeKind::HvdcQ)
        } else if lower.starts_with("inter") {
            pick(AttributeKind::InterconnectorP, AttributeKind::InterconnectorQ)
        } else if ["gen", "sync", "wf", "pv", "csp"]
            .iter()
            .any(|p| lower.starts_with(p))
        {
            pick(AttributeKind::GeneratorP, AttributeKind::GeneratorQ)
        } else {
            AttributeKind::Other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    pub raw_min: f64,
    pub raw_max: f64,
}

impl Attribute {
    pub fn to_normalized(&self, raw: f64) -> f64 {
        let span = self.raw_max - self.raw_min;
        if span > 0.0 {
            (2.0 * (raw - self.raw_min) / span - 1.0).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn to_raw(&self, normalized: f64) -> f64 {
        self.raw_min + (normalized + 1.0) * 0.5 * (self.raw_max - self.raw_min)
    }
}

/// Immutable table of normalized operating points, one row per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointSet {
    attributes: Vec<Attribute>,
    hours: Vec<usize>,
    values: Vec<f64>,
}

impl OperatingPointSet {
    /// Normalize a raw row-major matrix whose rows are hours `0..rows.len()`.
    pub fn normalize(raw: &[Vec<f64>], columns: Vec<(String, AttributeKind)>) -> Result<Self> {
        let hours = (0..raw.len()).collect();
        Self::normalize_with_hours(hours, raw, columns)
    }

    pub fn normalize_with_hours(
        hours: Vec<usize>,
        raw: &[Vec<f64>],
        columns: Vec<(String, AttributeKind)>,
    ) -> Result<Self> {
        let n_cols = columns.len();
        if hours.len() != raw.len() {
            return Err(Error::InvalidData(format!(
                "{} hour indices for {} rows",
                hours.len(),
                raw.len()
            )));
        }
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); n_cols];
        for (row, values) in raw.iter().enumerate() {
            if values.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    actual: values.len(),
                });
            }
            for (column, (&v, b)) in values.iter().zip(bounds.iter_mut()).enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, column });
                }
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        let attributes = columns
            .into_iter()
            .zip(bounds)
            .map(|((name, kind), (lo, hi))| {
                // An empty table has no bounds; collapse them to a point.
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (0.0, 0.0) };
                Attribute {
                    name,
                    kind,
                    raw_min: lo,
                    raw_max: hi,
                }
            })
            .collect::<Vec<_>>();
        let mut values = Vec::with_capacity(raw.len() * n_cols);
        for row in raw {
            values.extend(row.iter().zip(&attributes).map(|(&v, a)| a.to_normalized(v)));
        }
        Self::from_normalized(attributes, hours, values)
    }

    /// Build a set from values that are already normalized.
    pub fn from_normalized(
        attributes: Vec<Attribute>,
        hours: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n_cols = attributes.len();
        if n_cols == 0 {
            return Err(Error::InvalidData("no attributes".into()));
        }
        if values.len() != hours.len() * n_cols {
            return Err(Error::DimensionMismatch {
                expected: hours.len() * n_cols,
                actual: values.len(),
            });
        }
        let mut names = HashSet::new();
        for a in &attributes {
            if !names.insert(a.name.as_str()) {
                return Err(Error::InvalidData(format!(
                    "duplicate attribute name `{}`",
                    a.name
                )));
            }
            if !(a.raw_min <= a.raw_max) {
                return Err(Error::InvalidData(format!(
                    "attribute `{}` has raw_min > raw_max",
                    a.name
                )));
            }
        }
        let mut seen = HashSet::new();
        for &h in &hours {
            if !seen.insert(h) {
                return Err(Error::InvalidData(format!("duplicate hour {h}")));
            }
        }
        for (i, &v) in values.iter().enumerate() {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::InvalidData(format!(
                    "value {v} at row {}, column {} is outside [-1, 1]",
                    i / n_cols,
                    i % n_cols
                )));
            }
        }
        Ok(Self {
            attributes,
            hours,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn hours(&self) -> &[usize] {
        &self.hours
    }

    /// Row-major normalized values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.attributes.len();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.attributes.len())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Map row `i` back to native units.
    pub fn raw_row(&self, i: usize) -> Vec<f64> {
        self.row(i)
            .iter()
            .zip(&self.attributes)
            .map(|(&v, a)| a.to_raw(v))
            .collect()
    }

    /// A new set holding the given rows (by position), keeping the original
    /// normalization.
    pub fn select_rows(&self, positions: &[usize]) -> Self {
        let mut values = Vec::with_capacity(positions.len() * self.n_attributes());
        for &p in positions {
            values.extend_from_slice(self.row(p));
        }
        Self {
            attributes: self.attributes.clone(),
            hours: positions.iter().map(|&p| self.hours[p]).collect(),
            values,
        }
    }

    /// Population variance of every normalized column.
    pub fn column_variances(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.n_attributes())
            .map(|j| {
                if self.is_empty() {
                    return 0.0;
                }
                let mean = self.column(j).sum::<f64>() / n;
                self.column(j).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
            })
            .collect()
    }

    /// Per-dimension bounding box of the normalized data.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.n_attributes();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in self.rows() {
            for j in 0..d {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        (lo, hi)
    }

    pub fn columns_of_kind(&self, kind: AttributeKind) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == kind)
            .map(|(j, _)| j)
            .collect()
    }

    /// Total active demand per hour in native units (sum of `load_P` columns).
    pub fn total_demand(&self) -> Result<Vec<f64>> {
        let loads = self.columns_of_kind(AttributeKind::LoadP);
        if loads.is_empty() {
            return Err(Error::InvalidData("dataset has no load_p attribute".into()));
        }
        Ok(self
            .rows()
            .map(|r| loads.iter().map(|&j| self.attributes[j].to_raw(r[j])).sum())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn col(name: &str) -> (String, AttributeKind) {
        (name.to_string(), AttributeKind::Other)
    }

    #[test]
    fn endpoints_map_to_unit_interval() {
        let raw = vec![vec![10.0], vec![20.0], vec![30.0]];
        let set = OperatingPointSet::normalize(&raw, vec![col("a")]).unwrap();
        assert_eq!(set.values(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let raw = vec![vec![5.0], vec![5.0], vec![5.0]];
        let set = OperatingPointSet::normalize(&raw, vec![col("a")]).unwrap();
        assert_eq!(set.values(), &[0.0, 0.0, 0.0]);
        assert_eq!(set.raw_row(1), vec![5.0]);
    }

    #[test]
    fn interior_values_follow_affine_map() {
        let raw = vec![vec![0.0], vec![1.0], vec![4.0]];
        let set = OperatingPointSet::normalize(&raw, vec![col("a")]).unwrap();
        let expected = [-1.0, -0.5, 1.0];
        for (v, e) in set.values().iter().zip(expected) {
            assert_relative_eq!(*v, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn non_finite_input_names_location() {
        let raw = vec![vec![0.0, 1.0], vec![2.0, f64::NAN]];
        let err = OperatingPointSet::normalize(&raw, vec![col("a"), col("b")]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, column: 1 }));
    }

    #[test]
    fn duplicate_names_and_hours_are_rejected() {
        let raw = vec![vec![0.0, 1.0]];
        assert!(OperatingPointSet::normalize(&raw, vec![col("a"), col("a")]).is_err());
        let raw = vec![vec![0.0], vec![1.0]];
        assert!(OperatingPointSet::normalize_with_hours(vec![3, 3], &raw, vec![col("a")]).is_err());
    }

    #[test]
    fn kind_inference() {
        assert_eq!(AttributeKind::infer("load12_P"), AttributeKind::LoadP);
        assert_eq!(AttributeKind::infer("WF04_Q"), AttributeKind::GeneratorQ);
        assert_eq!(AttributeKind::infer("HVDC3S_Q"), AttributeKind::HvdcQ);
        assert_eq!(AttributeKind::infer("Inter-P3"), AttributeKind::Other);
        assert_eq!(AttributeKind::infer("inter2_P"), AttributeKind::InterconnectorP);
    }

    proptest! {
        #[test]
        fn normalization_round_trips(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..40)
        ) {
            let cols = vec![col("a"), col("b"), col("c")];
            let set = OperatingPointSet::normalize(&rows, cols).unwrap();
            for v in set.values() {
                prop_assert!((-1.0..=1.0).contains(v));
            }
            for (i, raw) in rows.iter().enumerate() {
                for (j, (&back, &orig)) in set.raw_row(i).iter().zip(raw).enumerate() {
                    let a = &set.attributes()[j];
                    let scale = orig.abs().max(a.raw_max.abs()).max(a.raw_min.abs()).max(1.0);
                    prop_assert!((back - orig).abs() <= 1e-9 * scale,
                        "row {i} col {j}: {back} vs {orig}");
                }
            }
        }
    }
}

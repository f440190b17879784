use serde::{Deserialize, Serialize};

use crate::dataset::OperatingPointSet;
use crate::error::{Error, Result};

/// Borrowed row-major matrix of points.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    values: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(values: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1),
                actual: values.len(),
            });
        }
        Ok(Self { values, dim })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &'a [f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Per-dimension minimum and maximum.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for row in self.rows() {
            for d in 0..self.dim {
                lo[d] = lo[d].min(row[d]);
                hi[d] = hi[d].max(row[d]);
            }
        }
        (lo, hi)
    }
}

impl<'a> From<&'a OperatingPointSet> for Points<'a> {
    fn from(set: &'a OperatingPointSet) -> Self {
        Self {
            values: set.values(),
            dim: set.n_attributes().max(1),
        }
    }
}

/// Non-negative per-attribute weights of the clustering distance.
///
/// Every distance in this module sums `w_d · (x_d − y_d)²` over the positive
/// weights in descending-weight order, so all callers agree bitwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DistanceWeights {
    w: Vec<f64>,
    order: Vec<usize>,
}

impl DistanceWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(d) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "distance weight {d} is {} (must be finite and non-negative)",
                w[d]
            )));
        }
        let mut order: Vec<usize> = (0..w.len()).filter(|&d| w[d] > 0.0).collect();
        if order.is_empty() {
            return Err(Error::NoPositiveWeight);
        }
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        Ok(Self { w, order })
    }

    pub fn uniform(dim: usize) -> Self {
        Self::new(vec![1.0; dim]).expect("uniform weights are valid")
    }

    /// Clamp adjusted feature weights at zero.
    pub fn from_adjusted(adjusted: &[f64]) -> Result<Self> {
        Self::new(
            adjusted
                .iter()
                .map(|&v| if v > 0.0 { v } else { 0.0 })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Attributes with positive weight, heaviest first.
    pub fn active(&self) -> &[usize] {
        &self.order
    }

    pub fn sq_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for &d in &self.order {
            let t = x[d] - y[d];
            s += self.w[d] * (t * t);
        }
        s
    }

    /// Like [`sq_distance`](Self::sq_distance) but may stop early once the
    /// partial sum exceeds `bound`. The result is exact whenever it is
    /// `<= bound`.
    pub fn sq_distance_bounded(&self, x: &[f64], y: &[f64], bound: f64) -> f64 {
        let mut s = 0.0;
        for chunk in self.order.chunks(4) {
            for &d in chunk {
                let t = x[d] - y[d];
                s += self.w[d] * (t * t);
            }
            if s > bound {
                return s;
            }
        }
        s
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.sq_distance(x, y).sqrt()
    }
}

impl TryFrom<Vec<f64>> for DistanceWeights {
    type Error = Error;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<DistanceWeights> for Vec<f64> {
    fn from(w: DistanceWeights) -> Self {
        w.w
    }
}

/// `sqrt(Σ_d w_d (x_d − y_d)²)`
pub fn weighted_distance(x: &[f64], y: &[f64], w: &DistanceWeights) -> Result<f64> {
    if x.len() != w.dim() || y.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            actual: if x.len() != w.dim() { x.len() } else { y.len() },
        });
    }
    Ok(w.distance(x, y))
}

/// Per-dimension arithmetic mean, accumulated as a running mean.
pub fn centroid_of(points: &[&[f64]]) -> Result<Vec<f64>> {
    let first = points.first().ok_or(Error::EmptyPoints)?;
    let mut c = vec![0.0; first.len()];
    for (i, p) in points.iter().enumerate() {
        if p.len() != c.len() {
            return Err(Error::DimensionMismatch {
                expected: c.len(),
                actual: p.len(),
            });
        }
        let n = (i + 1) as f64;
        for (m, v) in c.iter_mut().zip(*p) {
            *m += (v - *m) / n;
        }
    }
    Ok(c)
}

/// Index of the nearest centroid (ties to the lowest index) and its squared
/// weighted distance.
pub fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>], w: &DistanceWeights) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = w.sq_distance_bounded(x, c, best.1);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn cluster_distance_sums(
    points: Points<'_>,
    centroids: &[Vec<f64>],
    assignment: &[usize],
    w: &DistanceWeights,
) -> (Vec<f64>, Vec<usize>) {
    let mut sums = vec![0.0; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (x, &j) in points.rows().zip(assignment) {
        sums[j] += w.distance(x, &centroids[j]);
        counts[j] += 1;
    }
    (sums, counts)
}

/// Clustering fitness: the mean over clusters of each cluster's mean
/// weighted distance to its centroid. Fails on an empty cluster.
pub fn smse(
    points: Points<'_>,
    centroids: &[Vec<f64>],
    assignment: &[usize],
    w: &DistanceWeights,
) -> Result<f64> {
    let (sums, counts) = cluster_distance_sums(points, centroids, assignment, w);
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCluster(j));
    }
    let k = centroids.len() as f64;
    Ok(sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).sum::<f64>() / k)
}

/// [`smse`] over the non-empty clusters only.
pub fn partition_smse(
    points: Points<'_>,
    centroids: &[Vec<f64>],
    assignment: &[usize],
    w: &DistanceWeights,
) -> f64 {
    let (sums, counts) = cluster_distance_sums(points, centroids, assignment, w);
    let mut total = 0.0;
    let mut k = 0usize;
    for (s, &c) in sums.iter().zip(&counts) {
        if c > 0 {
            total += s / c as f64;
            k += 1;
        }
    }
    if k == 0 {
        0.0
    } else {
        total / k as f64
    }
}

/// Sum of squared weighted distances to assigned centroids (the Lloyd
/// objective).
pub fn sum_squared_error(
    points: Points<'_>,
    centroids: &[Vec<f64>],
    assignment: &[usize],
    w: &DistanceWeights,
) -> f64 {
    points
        .rows()
        .zip(assignment)
        .map(|(x, &j)| w.sq_distance(x, &centroids[j]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(v: &[f64]) -> DistanceWeights {
        DistanceWeights::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let u = w(&[1.0, 1.0]);
        assert_eq!(weighted_distance(&[0.3, 0.1], &[0.3, 0.1], &u).unwrap(), 0.0);
        assert_eq!(weighted_distance(&[0.0, 0.0], &[3.0, 4.0], &u).unwrap(), 5.0);
        let d = weighted_distance(&[0.0, 0.0], &[1.0, 1.0], &w(&[4.0, 1.0])).unwrap();
        assert!((d - 5f64.sqrt()).abs() < 1e-15);
        assert!(weighted_distance(&[0.0], &[1.0, 1.0], &u).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(DistanceWeights::new(vec![0.0, 0.0]).is_err());
        assert!(DistanceWeights::new(vec![1.0, -0.1]).is_err());
        assert!(DistanceWeights::new(vec![f64::NAN]).is_err());
        let w = DistanceWeights::from_adjusted(&[-0.4, 0.2, 0.9]).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 0.2, 0.9]);
        assert_eq!(w.active(), &[2, 1]);
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid_of(&[&[0.4, -0.2]]).unwrap(), vec![0.4, -0.2]);
        assert_eq!(centroid_of(&[&[0.0, 0.0], &[2.0, 2.0]]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(
            centroid_of(&[&[-1.0, 0.0], &[0.0, 1.0], &[1.0, -1.0]]).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(matches!(centroid_of(&[]), Err(Error::EmptyPoints)));
    }

    #[test]
    fn smse_examples() {
        let u = w(&[1.0]);
        let data = [0.0, 2.0, 10.0];
        let pts = Points::new(&data, 1).unwrap();
        assert_eq!(smse(pts, &[vec![0.0], vec![2.0], vec![10.0]], &[0, 1, 2], &u).unwrap(), 0.0);
        let one = Points::new(&data[..2], 1).unwrap();
        assert_eq!(smse(one, &[vec![1.0]], &[0, 0], &u).unwrap(), 1.0);
        assert_eq!(smse(pts, &[vec![1.0], vec![10.0]], &[0, 0, 1], &u).unwrap(), 0.5);
        assert!(matches!(
            smse(pts, &[vec![1.0], vec![10.0], vec![5.0]], &[0, 0, 1], &u),
            Err(Error::EmptyCluster(2))
        ));
        assert_eq!(
            partition_smse(pts, &[vec![1.0], vec![10.0], vec![5.0]], &[0, 0, 1], &u),
            0.5
        );
    }

    #[test]
    fn nearest_prefers_lowest_index_on_ties() {
        let u = w(&[1.0, 1.0]);
        let cs = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(nearest_centroid(&[0.0, 0.0], &cs, &u).0, 0);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 3)
    }

    proptest! {
        #[test]
        fn metric_axioms(x in vec3(), y in vec3(), z in vec3(),
                         wv in prop::collection::vec(0.01f64..5.0, 3)) {
            let w = DistanceWeights::new(wv).unwrap();
            let dxy = w.distance(&x, &y);
            prop_assert!(dxy >= 0.0);
            prop_assert_eq!(w.distance(&x, &x), 0.0);
            prop_assert_eq!(dxy, w.distance(&y, &x));
            prop_assert!(dxy <= w.distance(&x, &z) + w.distance(&z, &y) + 1e-12);
            if x != y {
                prop_assert!(dxy > 0.0);
            }
        }

        #[test]
        fn bounded_distance_is_exact_below_bound(x in vec3(), y in vec3(), bound in 0.0f64..3.0,
                                                 wv in prop::collection::vec(0.0f64..2.0, 3)) {
            prop_assume!(wv.iter().any(|&v| v > 0.0));
            let w = DistanceWeights::new(wv).unwrap();
            let full = w.sq_distance(&x, &y);
            let b = w.sq_distance_bounded(&x, &y, bound);
            if full <= bound {
                prop_assert_eq!(b.to_bits(), full.to_bits());
            } else {
                prop_assert!(b > bound);
            }
        }
    }
}

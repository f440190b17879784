use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::distance::{nearest_centroid, partition_smse, sum_squared_error, DistanceWeights, Points};
use crate::error::{Error, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Clusters without members in the final assignment.
    pub empty: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Fitness after each iteration; entry 0 is the initial centroids.
    pub smse_history: Vec<f64>,
    /// Lloyd objective after each iteration; entry 0 is the initial centroids.
    pub sse_history: Vec<f64>,
}

/// Nearest-centroid index for every point.
pub fn assign(points: Points<'_>, centroids: &[Vec<f64>], w: &DistanceWeights) -> Vec<usize> {
    (0..points.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| nearest_centroid(points.row(i), centroids, w).0)
        .collect()
}

pub fn member_counts(assignment: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &j in assignment {
        counts[j] += 1;
    }
    counts
}

/// Member means; clusters without members keep their previous centroid.
/// The running mean is exact for singletons and identical members.
fn update_centroids(points: Points<'_>, assignment: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points.dim();
    let k = centroids.len();
    let mut means = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (x, &j) in points.rows().zip(assignment) {
        counts[j] += 1;
        let n = counts[j] as f64;
        for (m, v) in means[j * dim..(j + 1) * dim].iter_mut().zip(x) {
            *m += (v - *m) / n;
        }
    }
    for (j, c) in centroids.iter_mut().enumerate() {
        if counts[j] > 0 {
            c.copy_from_slice(&means[j * dim..(j + 1) * dim]);
        }
    }
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing or [`MAX_LLOYD_ITERATIONS`] is reached.
pub fn kmeans(points: Points<'_>, initial: &[Vec<f64>], w: &DistanceWeights) -> Result<KMeansRun> {
    let k = initial.len();
    if k == 0 {
        return Err(Error::InvalidConfig("k-means needs at least one centroid".into()));
    }
    if k > points.len() {
        return Err(Error::TooManyClusters { k, n: points.len() });
    }
    if let Some(c) = initial.iter().find(|c| c.len() != points.dim()) {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            actual: c.len(),
        });
    }
    if w.dim() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            actual: w.dim(),
        });
    }

    let mut centroids = initial.to_vec();
    let mut assignment = assign(points, &centroids, w);
    let mut smse_history = vec![partition_smse(points, &centroids, &assignment, w)];
    let mut sse_history = vec![sum_squared_error(points, &centroids, &assignment, w)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        update_centroids(points, &assignment, &mut centroids);
        let next = assign(points, &centroids, w);
        let same = next == assignment;
        assignment = next;
        smse_history.push(partition_smse(points, &centroids, &assignment, w));
        sse_history.push(sum_squared_error(points, &centroids, &assignment, w));
        if same {
            converged = true;
            break;
        }
    }
    let empty = member_counts(&assignment, k)
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(j, _)| j)
        .collect();
    Ok(KMeansRun {
        centroids,
        assignment,
        empty,
        iterations,
        converged,
        smse_history,
        sse_history,
    })
}

/// `k` distinct data points chosen uniformly at random.
pub fn random_centroids<R: Rng + ?Sized>(points: Points<'_>, k: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if k == 0 || k > points.len() {
        return Err(Error::TooManyClusters { k, n: points.len() });
    }
    Ok(index::sample(rng, points.len(), k)
        .into_iter()
        .map(|i| points.row(i).to_vec())
        .collect())
}

/// Conventional k-means from random data points.
pub fn plain_kmeans<R: Rng + ?Sized>(
    points: Points<'_>,
    k: usize,
    w: &DistanceWeights,
    rng: &mut R,
) -> Result<KMeansRun> {
    let init = random_centroids(points, k, rng)?;
    kmeans(points, &init, w)
}

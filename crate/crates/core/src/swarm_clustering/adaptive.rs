use serde::{Deserialize, Serialize};

use super::distance::{smse, DistanceWeights, Points};
use super::kmeans::{kmeans, member_counts, KMeansRun};
use super::pso::{run_pso, PsoParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveParams {
    /// Cluster count of the swarm stage; `None` means `ceil(sqrt(|R|/2))`.
    pub k_init: Option<usize>,
    /// Largest allowed point-to-centroid distance.
    pub eps_d: f64,
    /// Smallest allowed centroid-to-centroid distance.
    pub eps_c: f64,
    pub max_outer: usize,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            k_init: None,
            eps_d: 0.15,
            eps_c: 0.0375,
            max_outer: 200,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_c > 0.0 && self.eps_d > self.eps_c && self.eps_d.is_finite()) {
            return Err(Error::InvalidConfig(
                "adapt: need eps_d > eps_c > 0".into(),
            ));
        }
        if self.k_init == Some(0) {
            return Err(Error::InvalidConfig("adapt: k_init must be at least 1".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig("adapt: max_outer must be at least 1".into()));
        }
        Ok(())
    }

    pub fn k_init_for(&self, n: usize) -> usize {
        self.k_init.unwrap_or_else(|| default_k_init(n)).min(n).max(1)
    }
}

pub fn default_k_init(n: usize) -> usize {
    ((n as f64 / 2.0).sqrt().ceil() as usize).max(1)
}

/// Centroids, memberships and the distance weights that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub weights: DistanceWeights,
    pub smse: f64,
    pub k: usize,
    pub converged: bool,
}

impl ClusterModel {
    /// Build from a partition without empty clusters.
    pub fn new(
        points: Points<'_>,
        centroids: Vec<Vec<f64>>,
        assignment: Vec<usize>,
        weights: DistanceWeights,
        converged: bool,
    ) -> Result<Self> {
        let smse = smse(points, &centroids, &assignment, &weights)?;
        Ok(Self {
            k: centroids.len(),
            centroids,
            assignment,
            weights,
            smse,
            converged,
        })
    }

    /// `hour,cluster_id`
    pub fn assignment_csv(&self, hours: &[usize]) -> String {
        let mut out = String::from("hour,cluster_id\n");
        for (h, c) in hours.iter().zip(&self.assignment) {
            out.push_str(&format!("{h},{c}\n"));
        }
        out
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &j) in self.assignment.iter().enumerate() {
            m[j].push(i);
        }
        m
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub model: ClusterModel,
    pub k_init: usize,
    /// Swarm-stage `g_best` fitness per iteration (empty without a swarm stage).
    pub pso_history: Vec<f64>,
    /// Fitness history of the first k-means run of the second stage.
    pub first_run_history: Vec<f64>,
    pub outer_passes: usize,
    pub removed_empty: usize,
    pub splits: usize,
    pub merges: usize,
}

/// Drop clusters without members and renumber the assignment.
fn remove_empty(run: &mut KMeansRun) -> usize {
    if run.empty.is_empty() {
        return 0;
    }
    let k = run.centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut kept = Vec::with_capacity(k - run.empty.len());
    let counts = member_counts(&run.assignment, k);
    for (j, c) in run.centroids.drain(..).enumerate() {
        if counts[j] > 0 {
            map[j] = kept.len();
            kept.push(c);
        }
    }
    run.centroids = kept;
    for a in run.assignment.iter_mut() {
        *a = map[*a];
    }
    let removed = run.empty.len();
    run.empty.clear();
    removed
}

/// For every cluster with a member farther than `eps_d`, its farthest such
/// member (ties to the lowest point index).
fn split_candidates(
    points: Points<'_>,
    centroids: &[Vec<f64>],
    assignment: &[usize],
    w: &DistanceWeights,
    eps_d: f64,
) -> Vec<usize> {
    let mut far: Vec<Option<(f64, usize)>> = vec![None; centroids.len()];
    for (i, (x, &j)) in points.rows().zip(assignment).enumerate() {
        let d = w.distance(x, &centroids[j]);
        if d > eps_d && far[j].is_none_or(|(best, _)| d > best) {
            far[j] = Some((d, i));
        }
    }
    far.into_iter().flatten().map(|(_, i)| i).collect()
}

/// Merge the closest centroid pair below `eps_c` into its member-weighted
/// mean, repeatedly. Returns the number of merges.
fn merge_close(centroids: &mut Vec<Vec<f64>>, counts: &mut Vec<usize>, w: &DistanceWeights, eps_c: f64) -> usize {
    let mut merges = 0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..centroids.len() {
            for b in a + 1..centroids.len() {
                let d = w.distance(&centroids[a], &centroids[b]);
                if d < eps_c && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else {
            return merges;
        };
        let (na, nb) = (counts[a] as f64, counts[b] as f64);
        let total = na + nb;
        let cb = centroids.remove(b);
        let ca = &mut centroids[a];
        for (x, y) in ca.iter_mut().zip(&cb) {
            *x = if total > 0.0 {
                (na * *x + nb * y) / total
            } else {
                0.5 * (*x + y)
            };
        }
        counts[a] += counts.remove(b);
        merges += 1;
    }
}

/// Second stage: repeated k-means with empty-cluster removal, splitting of
/// distant points and merging of close centroids.
pub fn adaptive_kmeans(
    points: Points<'_>,
    initial: &[Vec<f64>],
    w: &DistanceWeights,
    adapt: &AdaptiveParams,
) -> Result<AdaptiveOutcome> {
    adapt.validate()?;
    let mut centroids = initial.to_vec();
    let mut first_run_history = Vec::new();
    let (mut removed_empty, mut splits, mut merges) = (0, 0, 0);
    let mut last: Option<(KMeansRun, bool)> = None;
    let mut outer_passes = 0;

    while outer_passes < adapt.max_outer {
        outer_passes += 1;
        let mut run = kmeans(points, &centroids, w)?;
        if first_run_history.is_empty() {
            first_run_history = run.smse_history.clone();
        }
        let removed = remove_empty(&mut run);
        removed_empty += removed;

        let spawn = split_candidates(points, &run.centroids, &run.assignment, w, adapt.eps_d);
        let mut next = run.centroids.clone();
        let mut counts = member_counts(&run.assignment, next.len());
        for &i in &spawn {
            next.push(points.row(i).to_vec());
            counts.push(1);
        }
        splits += spawn.len();
        let merged = merge_close(&mut next, &mut counts, w, adapt.eps_c);
        merges += merged;

        let settled = removed == 0 && spawn.is_empty() && merged == 0 && run.converged;
        last = Some((run, settled));
        if settled {
            break;
        }
        if next.len() > points.len() {
            break;
        }
        centroids = next;
    }

    let (run, converged) = last.expect("at least one outer pass");
    let model = ClusterModel::new(points, run.centroids, run.assignment, w.clone(), converged)?;
    Ok(AdaptiveOutcome {
        model,
        k_init: initial.len(),
        pso_history: Vec::new(),
        first_run_history,
        outer_passes,
        removed_empty,
        splits,
        merges,
    })
}

/// Swarm search for `k_init` centroids followed by [`adaptive_kmeans`]
/// seeded with the best particle.
pub fn self_adaptive_pso_kmeans(
    points: Points<'_>,
    w: &DistanceWeights,
    pso: &PsoParams,
    adapt: &AdaptiveParams,
) -> Result<AdaptiveOutcome> {
    adapt.validate()?;
    pso.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyPoints);
    }
    let k_init = adapt.k_init_for(points.len());
    if let Some(k) = adapt.k_init {
        if k > points.len() {
            return Err(Error::TooManyClusters { k, n: points.len() });
        }
    }
    let swarm = run_pso(points, k_init, w, pso)?;
    let mut out = adaptive_kmeans(points, &swarm.swarm.g_best, w, adapt)?;
    out.pso_history = swarm.g_best_history;
    out.k_init = k_init;
    Ok(out)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::{partition_smse, DistanceWeights, Points};
use super::kmeans::{assign, random_centroids};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub n_iter: usize,
    pub c1: f64,
    pub c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// Normalized fitness variance below which mutation may fire.
    pub sigma_t2: f64,
    /// Mutation probability once triggered.
    pub p0: f64,
    pub seed: u64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            swarm_size: 8,
            n_iter: 30,
            c1: 1.5,
            c2: 1.5,
            w_max: 0.9,
            w_min: 0.4,
            sigma_t2: 1e-3,
            p0: 0.3,
            seed: 7,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("pso: {m}")));
        if self.swarm_size < 2 {
            return bad("swarm_size must be at least 2");
        }
        if !(self.w_min > 0.0 && self.w_max >= self.w_min && self.w_max.is_finite()) {
            return bad("need w_max >= w_min > 0");
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return bad("c1 and c2 must be positive");
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return bad("p0 must lie in [0, 1]");
        }
        if !(self.sigma_t2 >= 0.0 && self.sigma_t2.is_finite()) {
            return bad("sigma_t2 must be non-negative");
        }
        Ok(())
    }

    /// Linearly decreasing inertia weight.
    pub fn inertia(&self, iter: usize) -> f64 {
        if self.n_iter == 0 {
            return self.w_max;
        }
        self.w_max - iter as f64 * (self.w_max - self.w_min) / self.n_iter as f64
    }
}

/// One candidate set of `k` centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
    pub fitness: f64,
    pub best_position: Vec<Vec<f64>>,
    pub best_fitness: f64,
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub g_best: Vec<Vec<f64>>,
    pub g_best_fitness: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Fitness of a centroid set: the clustering fitness of the partition it
/// induces, skipping clusters that attract no points.
pub fn fitness(points: Points<'_>, centroids: &[Vec<f64>], w: &DistanceWeights) -> f64 {
    let a = assign(points, centroids, w);
    partition_smse(points, centroids, &a, w)
}

fn clamp_into(c: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in c.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Velocity and position update for one particle with the given random
/// factors, followed by clamping into `[lower, upper]`.
#[allow(clippy::too_many_arguments)]
pub fn update_velocity_position(
    position: &mut [Vec<f64>],
    velocity: &mut [Vec<f64>],
    p_best: &[Vec<f64>],
    g_best: &[Vec<f64>],
    inertia: f64,
    (c1, r1): (f64, f64),
    (c2, r2): (f64, f64),
    lower: &[f64],
    upper: &[f64],
) {
    for j in 0..position.len() {
        let (p, v) = (&mut position[j], &mut velocity[j]);
        for d in 0..p.len() {
            v[d] = inertia * v[d] + c1 * r1 * (p_best[j][d] - p[d]) + c2 * r2 * (g_best[j][d] - p[d]);
            p[d] += v[d];
        }
        clamp_into(p, lower, upper);
    }
}

/// Particles start on `k` distinct random data points with a small random
/// velocity.
pub fn init_swarm<R: Rng + ?Sized>(
    points: Points<'_>,
    k: usize,
    w: &DistanceWeights,
    params: &PsoParams,
    rng: &mut R,
) -> Result<Swarm> {
    params.validate()?;
    let (lower, upper) = points.bounds();
    let mut particles = Vec::with_capacity(params.swarm_size);
    for _ in 0..params.swarm_size {
        let position = random_centroids(points, k, rng)?;
        let velocity = (0..k)
            .map(|_| {
                lower
                    .iter()
                    .zip(&upper)
                    .map(|(lo, hi)| 0.1 * (hi - lo) * rng.random_range(-1.0..=1.0))
                    .collect()
            })
            .collect();
        particles.push(Particle {
            best_position: position.clone(),
            position,
            velocity,
            fitness: f64::INFINITY,
            best_fitness: f64::INFINITY,
        });
    }
    particles.par_iter_mut().for_each(|p| {
        p.fitness = fitness(points, &p.position, w);
        p.best_fitness = p.fitness;
    });
    let best = best_particle(&particles);
    Ok(Swarm {
        g_best: particles[best].best_position.clone(),
        g_best_fitness: particles[best].best_fitness,
        particles,
        lower,
        upper,
    })
}

fn best_particle(particles: &[Particle]) -> usize {
    let mut best = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.best_fitness < particles[best].best_fitness {
            best = i;
        }
    }
    best
}

/// One synchronous swarm iteration: move every particle, evaluate, then
/// update personal and global bests.
pub fn pso_step<R: Rng + ?Sized>(
    swarm: &mut Swarm,
    points: Points<'_>,
    w: &DistanceWeights,
    params: &PsoParams,
    iter: usize,
    rng: &mut R,
) {
    let inertia = params.inertia(iter);
    let g_best = swarm.g_best.clone();
    for p in swarm.particles.iter_mut() {
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        update_velocity_position(
            &mut p.position,
            &mut p.velocity,
            &p.best_position,
            &g_best,
            inertia,
            (params.c1, r1),
            (params.c2, r2),
            &swarm.lower,
            &swarm.upper,
        );
    }
    swarm
        .particles
        .par_iter_mut()
        .for_each(|p| p.fitness = fitness(points, &p.position, w));
    for p in swarm.particles.iter_mut() {
        if p.fitness < p.best_fitness {
            p.best_fitness = p.fitness;
            p.best_position = p.position.clone();
        }
    }
    let best = best_particle(&swarm.particles);
    if swarm.particles[best].best_fitness < swarm.g_best_fitness {
        swarm.g_best_fitness = swarm.particles[best].best_fitness;
        swarm.g_best = swarm.particles[best].best_position.clone();
    }
}

/// Normalized variance of the current particle fitnesses.
pub fn fitness_variance(fitnesses: &[f64]) -> f64 {
    if fitnesses.is_empty() {
        return 0.0;
    }
    let n = fitnesses.len() as f64;
    let mean = fitnesses.iter().sum::<f64>() / n;
    let f = fitnesses
        .iter()
        .map(|j| (j - mean).abs())
        .fold(1.0f64, f64::max);
    fitnesses
        .iter()
        .map(|j| ((j - mean) / f).powi(2))
        .sum::<f64>()
        / n
}

pub fn mutation_probability(sigma_f2: f64, params: &PsoParams) -> f64 {
    if sigma_f2 < params.sigma_t2 {
        params.p0
    } else {
        0.0
    }
}

/// `g · (1 + η/2)` per coordinate, clamped into `[lower, upper]`.
pub fn mutate(g_best: &[Vec<f64>], eta: &[Vec<f64>], lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    g_best
        .iter()
        .zip(eta)
        .map(|(c, e)| {
            let mut m: Vec<f64> = c.iter().zip(e).map(|(v, n)| v * (1.0 + n / 2.0)).collect();
            clamp_into(&mut m, lower, upper);
            m
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationOutcome {
    pub sigma_f2: f64,
    pub p_m: f64,
    pub attempted: bool,
    pub accepted: bool,
}

/// Premature-convergence check; may replace `g_best` with a mutant that is
/// at least as fit.
pub fn mutation_check<R: Rng + ?Sized>(
    swarm: &mut Swarm,
    points: Points<'_>,
    w: &DistanceWeights,
    params: &PsoParams,
    rng: &mut R,
) -> MutationOutcome {
    let fitnesses: Vec<f64> = swarm.particles.iter().map(|p| p.fitness).collect();
    let sigma_f2 = fitness_variance(&fitnesses);
    let p_m = mutation_probability(sigma_f2, params);
    let u: f64 = rng.random();
    let mut out = MutationOutcome {
        sigma_f2,
        p_m,
        attempted: false,
        accepted: false,
    };
    if p_m > u {
        out.attempted = true;
        let eta: Vec<Vec<f64>> = swarm
            .g_best
            .iter()
            .map(|c| c.iter().map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let mutant = mutate(&swarm.g_best, &eta, &swarm.lower, &swarm.upper);
        let f = fitness(points, &mutant, w);
        if f <= swarm.g_best_fitness {
            swarm.g_best = mutant;
            swarm.g_best_fitness = f;
            out.accepted = true;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PsoRun {
    pub swarm: Swarm,
    /// `g_best` fitness after initialization and after every iteration.
    pub g_best_history: Vec<f64>,
    pub mutations: Vec<MutationOutcome>,
}

/// The full swarm search for `k` centroids, seeded from `params.seed`.
pub fn run_pso(points: Points<'_>, k: usize, w: &DistanceWeights, params: &PsoParams) -> Result<PsoRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut swarm = init_swarm(points, k, w, params, &mut rng)?;
    let mut g_best_history = vec![swarm.g_best_fitness];
    let mut mutations = Vec::with_capacity(params.n_iter);
    for iter in 0..params.n_iter {
        pso_step(&mut swarm, points, w, params, iter, &mut rng);
        mutations.push(mutation_check(&mut swarm, points, w, params, &mut rng));
        g_best_history.push(swarm.g_best_fitness);
    }
    Ok(PsoRun {
        swarm,
        g_best_history,
        mutations,
    })
}

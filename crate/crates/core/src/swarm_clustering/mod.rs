//! Feature-weighted clustering: Lloyd k-means, a particle swarm over
//! centroid sets, and the adaptive split/merge procedure that picks the
//! cluster count.

mod adaptive;
mod distance;
mod kmeans;
mod pso;

pub use adaptive::{
    adaptive_kmeans, default_k_init, self_adaptive_pso_kmeans, AdaptiveOutcome, AdaptiveParams,
    ClusterModel,
};
pub use distance::{
    centroid_of, nearest_centroid, partition_smse, smse, sum_squared_error, weighted_distance,
    DistanceWeights, Points,
};
pub use kmeans::{assign, kmeans, member_counts, plain_kmeans, random_centroids, KMeansRun, MAX_LLOYD_ITERATIONS};
pub use pso::{
    fitness, fitness_variance, init_swarm, mutate, mutation_check, mutation_probability, pso_step,
    run_pso, update_velocity_position, MutationOutcome, Particle, PsoParams, PsoRun, Swarm,
};

//! Fast stability scanning of a year of power-system operating points.
//!
//! The pipeline weights attributes with RReliefF, clusters the hours with a
//! feature-weighted, self-adaptive PSO-k-means procedure, and evaluates a
//! stability index only at the cluster centroids.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod oracles;
pub mod relief;
pub mod scanning;
pub mod swarm_clustering;

pub use error::{Error, Result};

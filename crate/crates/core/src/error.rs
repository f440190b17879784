use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("{path}: row {row} (line {line}): {message}")]
    Parse {
        path: String,
        row: usize,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cannot take the centroid of an empty point list")]
    EmptyPoints,

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("requested {k} clusters but only {n} points are available")]
    TooManyClusters { k: usize, n: usize },

    #[error("degenerate prediction diversity: {0}")]
    DegeneratePrediction(String),

    #[error("training set of {size} instances cannot supply k = {k} neighbors")]
    TrainingTooSmall { size: usize, k: usize },

    #[error("no attribute carries a positive distance weight")]
    NoPositiveWeight,

    #[error("oracle failed: {0}")]
    Oracle(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("thresholds not strictly increasing at position {position}: {left} >= {right}")]
    Ordering { position: usize, left: f64, right: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constraint violated in block `{block}`: {reason}")]
    Constraint { block: String, reason: String },

    #[error("infeasible moment targets: {0}")]
    Infeasible(String),

    #[error("invalid model specification: {0}")]
    Model(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Data { path: PathBuf, row: usize, column: String, message: String },

    #[error("sampler failed: {0}")]
    Sampler(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

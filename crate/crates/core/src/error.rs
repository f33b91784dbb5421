use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("network has no active agents")]
    EmptyNetwork,

    #[error("agent {0} is not active")]
    InactiveAgent(usize),

    #[error("radius {radius} outside [{min}, {max}]")]
    RadiusOutOfRange { radius: f64, min: f64, max: f64 },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("weights file {path}: {reason}")]
    WeightsFormat { path: PathBuf, reason: String },

    #[error("weights file {path}: layer shape mismatch, expected {expected}, found {found}")]
    ShapeMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("weights file {path}: unsupported version {found:?}")]
    VersionMismatch { path: PathBuf, found: String },

    #[error("missing weights file {0}")]
    MissingWeights(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("non-finite ensemble state at t = {time:.3} s while running {behavior}")]
    NonFiniteState { time: f64, behavior: &'static str },

    #[error("parameters (theta = {theta}, phi = ({phi_x}, {phi_y})) lie outside the behavior's parameter space")]
    InfeasibleParams { theta: f64, phi_x: f64, phi_y: f64 },

    #[error("robot count mismatch: expected {expected}, got {got}")]
    RobotCountMismatch { expected: usize, got: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("need at least {min} robots, got {got}")]
    TooFewRobots { min: usize, got: usize },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("malformed Q-table file {path}: {reason}")]
    MalformedQTable { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

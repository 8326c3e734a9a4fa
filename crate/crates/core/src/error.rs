use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown parameter key `{0}`")]
    UnknownParameter(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("{electrode} stoichiometry {value} outside [0, 1]")]
    Domain { electrode: &'static str, value: f64 },

    #[error("kinetics undefined: {0}")]
    Kinetics(String),

    #[error("Newton iteration failed to converge (residual {residual:.3e})")]
    StepFailure { residual: f64 },

    #[error("simulation failed at t = {time:.3} s: {reason}")]
    Simulation { time: f64, reason: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("normalization undefined for `{metric}`: baseline prediction {prediction:.3e}")]
    Normalization { metric: String, prediction: f64 },

    #[error("{path}: {source}")]
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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// A configuration value that violates a model invariant or cannot be parsed.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("config error at `{key}`: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("invalid reference input: {0}")]
    InvalidInput(String),
    #[error("reference solve did not converge (best scaled residual {residual:e})")]
    NoConvergence { residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("QP is malformed: {0}")]
    Malformed(String),
    #[error("QP numerical breakdown: {0}")]
    Internal(String),
}

/// Top-level error for simulation and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("vehicle {0} does not appear in the trace")]
    UnknownVehicle(u64),
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

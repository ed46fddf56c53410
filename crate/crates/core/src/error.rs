use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("constraint violated: {what} (max residual {residual:.3e}, tolerance {tolerance:.3e})")]
    ConstraintViolation {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("coupling iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    CouplingDiverged { iterations: usize, residual: f64 },

    #[error("CFL violation: advective CFL {cfl:.3} exceeds limit {limit:.3} at t = {time:.6}")]
    CflViolation { cfl: f64, limit: f64, time: f64 },

    #[error("contact: minimum interface height {min_height:.3e} at x-index {node} reached tolerance at t = {time:.6}")]
    ContactHalt {
        time: f64,
        node: usize,
        min_height: f64,
    },

    #[error("envelope construction failed: {0}")]
    Envelope(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

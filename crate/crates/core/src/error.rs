use thiserror::Error;

/// Errors raised by the simulator and the closed-form evaluators.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent configuration, detected before any work runs.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument outside the domain of an operation (bad cell index, missing policy entry).
    #[error("domain error: {0}")]
    Domain(String),
    /// A parameter set that drives a denominator or signal strength to zero.
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    /// Environment construction could not satisfy its guarantees.
    #[error("construction error: {0}")]
    Construction(String),
    /// Importance-weighted estimation with an unusable propensity.
    #[error("estimator error: {0}")]
    Estimator(String),
    /// A finite-difference probe would leave the valid parameter region.
    #[error("parameter at domain boundary: {0}")]
    Boundary(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// Process exit code for a CLI that surfaces this error: 1 for runtime
    /// (I/O) failures, 2 for everything detectable from the inputs alone.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension {dim} exceeds the dense diagonalization cap {cap}; use the Krylov propagator")]
    Capacity { dim: usize, cap: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("Krylov propagation did not converge: achieved {achieved:e}, requested {tol:e}")]
    NonConvergence { achieved: f64, tol: f64 },

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("malformed data file {path}: {msg}")]
    Data { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

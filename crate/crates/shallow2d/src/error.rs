use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("SVD did not converge on a {0} matrix")]
    SvdNoConvergence(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A size guard tripped (statevector cap, enumeration cap, patch lightcone cap).
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    /// Every outcome of a measurement has numerically zero probability.
    #[error("state has vanishing norm: {0}")]
    ZeroNorm(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("bisection failed: {0}")]
    Bracketing(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

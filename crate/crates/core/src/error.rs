use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A copula description violates a family invariant.
    #[error("invalid copula: {0}")]
    InvalidSpec(String),
    /// The absolutely continuous density cannot be evaluated for this copula.
    #[error("density unavailable: {0}")]
    DensityUnavailable(String),
    /// The requested operation has no implementation for this copula.
    #[error("unsupported copula: {0}")]
    Unsupported(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("resolution mismatch: grid {grid} vs decomposition {decomposition}")]
    ResolutionMismatch { grid: usize, decomposition: usize },
    #[error("root finding failed: {0}")]
    Root(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

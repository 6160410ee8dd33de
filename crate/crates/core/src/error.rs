use thiserror::Error;

/// Crate-wide error type. Variants are grouped by failure class so callers
/// (notably the CLI) can map them to exit codes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (query, fit, or grid parameters).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Model invariant violations, as reported by `validate_model`.
    #[error("model validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// Malformed input files: bad JSON, wrong version, non-rectangular arrays.
    #[error("parse error: {0}")]
    Parse(String),

    /// A buffer length disagrees with the shape that describes it.
    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    /// Two fields that must share a grid do not.
    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),

    /// An operation needs a nonconstant field (e.g. PSNR range).
    #[error("degenerate field: {0}")]
    DegenerateRange(String),

    /// Cholesky failed even after jitter escalation.
    #[error("factorization failed: {0}")]
    FactorizationFailure(String),

    /// A computed quantity left its numerically tolerable range
    /// (e.g. posterior variance below -1e-8 sigma^2).
    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

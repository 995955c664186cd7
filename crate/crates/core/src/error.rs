use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration (site count, sizes, schedules, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("weights are not normalised (sum = {0})")]
    Unnormalised(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("common support of the targets is empty")]
    EmptySupport,

    /// The requested trunk width is below the minimal representable width.
    #[error("trunk width {width} cannot represent the targets: r_both = {r_both} requires width >= {}", r_both - 1)]
    Representability { width: usize, r_both: usize },

    #[error("all amplitudes underflow")]
    Underflow,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

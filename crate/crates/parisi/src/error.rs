use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the numerical layers.
///
/// Variants carry enough context to be actionable from the CLI; none of them
/// are recoverable mid-computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires D >= 2, model has D = 1")]
    ScalarModelRejected,

    #[error("operation requires a diagonal interaction function")]
    NotDiagonal,

    #[error("formal interaction functions are not sampleable; operation rejected")]
    FormalSpecRejected,

    #[error("path value at level {level} is not permutation-invariant (deviation {deviation:.3e})")]
    NotPermutationInvariant { level: usize, deviation: f64 },

    #[error("path is not nondecreasing at level {level} (minimum increment eigenvalue {min_eig:.3e})")]
    NonMonotonePath { level: usize, min_eig: f64 },

    #[error("conjugate supremum pinned at the truncation radius {radius:.6e}; sup may be unattained")]
    TruncationHit { radius: f64 },

    #[error("matrix argument is not positive semi-definite (minimum eigenvalue {min_eig:.3e})")]
    NonPsdInput { min_eig: f64 },

    #[error("enumeration budget exceeded: {detail}")]
    BudgetExceeded { detail: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signed input requires an even total degree (got {degree})")]
    OddDegreeSignedInput { degree: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the admissible thermodynamic or kinematic window.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solve failed to reach its tolerance.
    #[error("solver did not converge: {context} (residual history: {history:?})")]
    NotConverged { context: String, history: Vec<f64> },

    /// Requested operation needs a higher jet order than supplied.
    #[error("jet order too low: {identity} needs order >= {required}, got {got}")]
    OrderTooLow {
        identity: String,
        required: usize,
        got: usize,
    },

    /// Feature deliberately outside the supported envelope.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Grid/shape mismatch between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A simulation aborted because the state left the admissible set.
    #[error("admissibility breach at t={t}: {reason}")]
    Inadmissible { t: f64, reason: String },

    #[error("eigenvalue solve failed: {0}")]
    Eigen(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

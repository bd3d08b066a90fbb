//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, PmlError>;

/// Failure modes of the oracle, the solver and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmlError {
    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Adaptive quadrature exhausted its node budget before reaching the tolerance.
    #[error(
        "quadrature did not converge: estimate {estimate_re:e}{estimate_im:+e}i, error {error:e} > target {target:e}"
    )]
    Quadrature { estimate_re: f64, estimate_im: f64, error: f64, target: f64 },

    /// A linear system that has to be solved is numerically singular.
    #[error("singular system in {context}: {hint}")]
    Singular { context: String, hint: String },

    /// The PML damps too weakly for the lateral termination (doubling depth or ρ(ℛ) ≥ 1).
    #[error("insufficient PML absorption: {0}")]
    Absorption(String),

    /// A decay fit could not be made conclusive.
    #[error("inconclusive fit: {0}")]
    Inconclusive(String),

    /// Invalid configuration value or file.
    #[error("configuration error: {0}")]
    Config(String),

    /// File-system failure, message surfaced verbatim.
    #[error("{0}")]
    Io(String),
}

impl PmlError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        PmlError::Contract(msg.into())
    }

    pub(crate) fn singular(context: impl Into<String>, hint: impl Into<String>) -> Self {
        PmlError::Singular { context: context.into(), hint: hint.into() }
    }
}

impl From<std::io::Error> for PmlError {
    fn from(e: std::io::Error) -> Self {
        PmlError::Io(e.to_string())
    }
}

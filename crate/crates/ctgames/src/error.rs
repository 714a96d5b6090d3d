//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by state space construction, solvers, and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A requested state space exceeds the configured size budget.
    #[error("state space too large: {0}")]
    Sizing(String),

    /// Input data is malformed (ordering, ranges, missing fields).
    #[error("data error: {0}")]
    Data(String),

    /// Two operands have incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An off-diagonal intensity cannot be attributed to a unique mover.
    #[error("attribution error: {0}")]
    Attribution(String),

    /// A fixed-point or root-finding loop hit its iteration cap.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A logarithm was requested of a non-positive quantity.
    #[error("log-domain error: {0}")]
    LogDomain(String),

    /// The model structure violates a rank or sparsity requirement.
    #[error("model structure error: {0}")]
    Structure(String),

    /// Restrictions are mutually inconsistent with the hazard system.
    #[error("inconsistent restrictions: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    Inconsistent { residual: f64, tol: f64 },

    /// The static pricing game failed to converge.
    #[error("pricing solver failed: {0}")]
    Pricing(String),

    /// Every optimizer start failed; details carried per start.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A linear system that must be nonsingular was singular.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

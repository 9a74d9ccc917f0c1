use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A branch slope of 1 leaves the fixed-point equation without a solution.
    #[error("no fixed point: branch slope is 1")]
    NoFixedPoint,

    /// An intermediate iterate violated the half-plane conditions the
    /// construction relies on.
    #[error("validity error: {0}")]
    Validity(String),

    /// Root finding did not converge within the iteration budget.
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    /// Structural precondition of the operation not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The cycle fixed-point system is singular (composed matrix has an
    /// eigenvalue 1); the cycle is degenerate and no solution is returned.
    #[error("degenerate cycle: composed Jacobian has eigenvalue 1")]
    DegenerateCycle,

    /// Malformed scan or slice configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

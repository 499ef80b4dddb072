use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two fields or a field and a potential live on different grids.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A parameter is outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A NaN or infinity appeared in the time integration.
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("lambda too small for contraction (lambda = {lambda}): {reason}")]
    NoContraction { lambda: f64, reason: String },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("no dichotomy in range: both endpoints resolve to {0}")]
    NoDichotomy(String),

    #[error("singular tridiagonal system at row {0}")]
    Singular(usize),
}

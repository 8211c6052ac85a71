use thiserror::Error;

/// Failure modes shared by every module in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("trainer failed after {iterations} iterations (gradient norm {grad_norm:.3e}): {reason}")]
    Trainer {
        iterations: usize,
        grad_norm: f64,
        reason: String,
    },

    #[error("iteration diverged (weight norm {norm:.3e}); try stronger damping")]
    Instability { norm: f64 },

    #[error("large-alpha scaling does not hold when eps_t = tau = 0")]
    ScalingViolation,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

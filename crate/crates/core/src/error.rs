use thiserror::Error;

/// Errors raised by the solvers, modules and imaging pipeline.
#[derive(Debug, Error)]
pub enum FimaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lipschitz estimation failed: {0}")]
    EstimationFailure(String),

    #[error("module `{module}` failed at iteration {iteration}: {reason}")]
    ModuleFailure {
        module: String,
        iteration: usize,
        reason: String,
    },

    #[error("subproblem failed: {0}")]
    SubproblemFailure(String),

    #[error("config violates solver constraints: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FimaError>;

pub(crate) fn ensure_finite<'a>(mut values: impl Iterator<Item = &'a f64>, what: &str) -> Result<()> {
    if values.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FimaError::InvalidArgument(format!("{what} contains non-finite values")))
    }
}

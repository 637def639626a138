//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two fields (or a field and an operator) live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The requested operation is not defined for this configuration.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A fixed-point iteration stopped before reaching its tolerance.
    /// Carries the residual that was actually achieved.
    #[error(
        "fixed-point iteration did not converge after {iterations} sweeps \
         (achieved residual {residual:e}, tolerance {tolerance:e})"
    )]
    ConvergenceFailure {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    /// A stepper failure inside a trajectory, tagged with the step index.
    #[error("step {step}: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// A numerical guard tripped (e.g. a direct solve left an unexpectedly
    /// large residual).
    #[error("numerical guard failed: {0}")]
    Numerical(String),

    /// Configuration file / run spec problems, with the offending key path.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::StepFailed {
            step,
            source: Box::new(self),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

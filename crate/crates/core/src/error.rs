use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("resolution mismatch: expected {expected} samples per axis, got {got}")]
    ResolutionMismatch { expected: usize, got: usize },

    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),

    #[error("fixed-point iteration did not converge at step {step} after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("not enough usable points for a rate fit: {usable} (need at least 3)")]
    InsufficientPoints { usable: usize },

    #[error("level {level}: {invalid} of {total} replicates invalid")]
    LevelAborted {
        level: usize,
        invalid: usize,
        total: usize,
    },

    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

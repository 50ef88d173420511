use thiserror::Error;

use crate::simplex::LpSolution;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, Error)]
pub enum PtcError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("matrix is not positive semidefinite (max jitter {jitter:e} reached)")]
    NotPsd { jitter: f64 },

    #[error("problem is infeasible")]
    Infeasible,

    #[error("problem is unbounded")]
    Unbounded,

    #[error("conditional gradient did not converge (gap {gap:e} after {iterations} iterations)")]
    NotConverged {
        best: Box<LpSolution>,
        gap: f64,
        iterations: usize,
    },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("too few samples: need at least {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },

    #[error("empty score list")]
    EmptyScores,

    #[error("no sample receives positive kernel weight at the query point")]
    NoNeighbors,

    #[error("argument outside domain: {0}")]
    DomainError(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PtcError {
    fn from(e: std::io::Error) -> Self {
        PtcError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PtcError>;

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(PtcError::DimensionMismatch(format!(
            "{what}: expected {expected}, got {got}"
        )));
    }
    Ok(())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PtcError::ConfigInvalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

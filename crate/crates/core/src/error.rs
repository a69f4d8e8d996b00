use thiserror::Error;

use crate::oracle::OracleSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {0} outside [0, 1]")]
    Domain(f64),

    #[error("weight out of range for this solver: {0}")]
    WeightDomain(String),

    #[error("no structural solution found (best residual {best_residual:.3e}): {reason}")]
    NoStructuralSolution { best_residual: f64, reason: String },

    #[error("oracle did not converge after {iterations} iterations (kkt residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Box<OracleSolution>,
    },

    #[error("terminal state unreachable: least-squares terminal gap {gap:.3e}")]
    Infeasible { gap: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

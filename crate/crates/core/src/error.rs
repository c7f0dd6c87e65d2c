use thiserror::Error;

/// Errors produced by estimators, solvers and calibration routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MindError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("problem is infeasible: constraint slack {slack:.3e} after {iterations} iterations")]
    Infeasible { slack: f64, iterations: usize },
    #[error("solver did not converge within {iterations} iterations (slack {slack:.3e}, residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        slack: f64,
        residual: f64,
    },
    #[error("no segmentation satisfies the multiscale constraint at q = {q}")]
    NoFeasibleSegmentation { q: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, MindError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(MindError::Dimension {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MindError::InvalidInput(msg.into()))
}

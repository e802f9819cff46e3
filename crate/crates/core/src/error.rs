use thiserror::Error;

use crate::grid::Axis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("axis mismatch: expected {expected:?}, got {found:?}")]
    AxisMismatch { expected: Axis, found: Axis },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A phase pair left the open Gibbs triangle. The scheme keeps every
    /// accepted iterate interior, so this signals a solver defect.
    #[error("Gibbs triangle violated at cell ({i}, {j}): phi1 = {phi1:e}, phi2 = {phi2:e}")]
    GibbsViolation {
        i: usize,
        j: usize,
        phi1: f64,
        phi2: f64,
    },

    #[error("value {value:e} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("nonzero mean {mean:e} where a mean-zero field is required")]
    NonzeroMean { mean: f64 },

    #[error("{what} did not converge; residual history {history:?}")]
    ConvergenceFailure { what: String, history: Vec<f64> },

    #[error("energy increased from {before:.17e} to {after:.17e}")]
    EnergyIncrease { before: f64, after: f64 },

    #[error("convergence study failed at dt = {dt:e}: {source}")]
    StudyFailed { dt: f64, source: Box<Error> },
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sampling, estimation and recovery routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("dense eigendecomposition refused: N = {n} exceeds guard {guard}")]
    TooLarge { n: usize, guard: usize },

    #[error("iterative method did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("zero marginal probability at node {0}")]
    ZeroMarginal(usize),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("sampling set has no weights")]
    MissingWeights,

    #[error("solver diverged: relative residual {residual:e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised while building operators or advancing a discretization in time.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GsbpError {
    #[error("polynomial degree {0} outside supported range 1..=16")]
    DegreeOutOfRange(usize),

    #[error("invalid interval ({x_a}, {x_b}): need x_a < x_b")]
    InvalidInterval { x_a: f64, x_b: f64 },

    #[error("mesh needs at least 2 cells, got {0}")]
    TooFewCells(usize),

    #[error("cell width {width} at index {index} is not positive and finite")]
    InvalidCellWidth { index: usize, width: f64 },

    #[error("flux parameter theta = {0} outside [-1/2, 1/2]")]
    ThetaOutOfRange(f64),

    #[error("operation requires {expected} topology")]
    TopologyMismatch { expected: &'static str },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("implicit stage matrix is not symmetric under the norm (asymmetry {0:.3e})")]
    NonSymmetricStage(f64),

    #[error("stage solver did not converge in {iterations} iterations (residual {residual:.3e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value in state at t = {0}")]
    NonFinite(f64),
}

pub type Result<T> = std::result::Result<T, GsbpError>;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("bisection direction is degenerate for this ellipsoid")]
    DegenerateDirection,

    #[error("ellipsoid collapsed to a numerically degenerate set")]
    DegenerateEllipsoid,

    #[error("constraint {index} has a vanishing gradient on its boundary")]
    ConstraintDegeneracy { index: usize },

    #[error("ball-constrained subproblem failed: {0}")]
    SubproblemFailure(String),

    #[error("starting point is infeasible (max violation {violation:e})")]
    InvalidStart { violation: f64 },

    #[error("feasibility is ambiguous at constraint {level}: only boundary contact found")]
    AmbiguousFeasibility { level: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

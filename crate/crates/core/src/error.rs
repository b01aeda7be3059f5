use thiserror::Error;

/// Errors produced by the stabilization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A state or parameter lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// A transition matrix row does not sum to one (or has negative entries).
    #[error("matrix {matrix}: row {row} is not stochastic (sum = {sum})")]
    NotStochastic { matrix: usize, row: usize, sum: f64 },

    /// Input data failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Dimensions of assembled objects disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation was called on data that does not meet its precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// No action carries positive mass on a cell that must be controlled.
    #[error("policy extraction failed: cell {cell} has no supported action")]
    Extraction { cell: usize },

    /// A linear system needed for certification is singular or ill posed.
    #[error("certificate failure: {0}")]
    Certificate(String),

    /// An iterative method did not reach its tolerance.
    #[error("not converged after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    /// Malformed text input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

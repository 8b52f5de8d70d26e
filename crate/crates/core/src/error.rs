use thiserror::Error;

/// Errors produced by the grid, sampling, transform and algebra layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operands live on different time grids")]
    GridMismatch,

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("functionals are defined over different orthogonal families")]
    FamilyMismatch,

    #[error("weight fails the membership condition: {0}")]
    Membership(String),

    #[error("complex Gaussian integral diverges: Re(a + 1/v) = {0:e} is not positive")]
    Divergent(f64),

    #[error("unsupported functional form: {0}")]
    Unsupported(&'static str),

    #[error("regularized quadrature did not converge: last L2 difference {last:e} > tol {tol:e}")]
    NotConverged { last: f64, tol: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the numerical pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters violate `N >= 2`, `0 < alpha < N - 1` or `gamma > 0`.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature did not converge: last two refinements differ by {diff:e} (tolerance {tol:e})")]
    NonConvergence { diff: f64, tol: f64 },

    #[error("balls {first} and {second} overlap")]
    Overlap { first: usize, second: usize },

    #[error("degree search exceeded cap {cap}")]
    CapExceeded { cap: usize },

    #[error("grid resolution insufficient: {0}")]
    GridResolution(String),

    #[error("breakpoint bracket not found below m = {m_max}")]
    BracketNotFound { m_max: f64 },

    /// Some rows of a sweep could not be computed; the others were written.
    #[error("{failed} of {total} sweep rows failed")]
    RowsFailed { failed: usize, total: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

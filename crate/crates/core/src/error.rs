use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid network: {0}")]
    Network(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("edge index {index} out of range for a network of {len} edges")]
    EdgeOutOfRange { index: usize, len: usize },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("invariance condition fails: {0}")]
    NoInvariantLaw(String),

    #[error("the mark distribution has no finite mean")]
    InfiniteMean,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;

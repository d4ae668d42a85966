use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LerchError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: series term exceeded 1e300 at n = {term}")]
    Overflow { term: u64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LerchError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LerchError::Domain(msg.into()))
}

use thiserror::Error;

/// Errors raised by sequence evaluation, certification and the solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("index {k} outside the table window [{start}, {end}]")]
    Range { k: i64, start: i64, end: i64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("input contract violated: {0}")]
    InputContract(String),

    #[error("convergence precondition failed: {0}")]
    Convergence(String),

    #[error("forcing is not bounded on the probe window: {0}")]
    Boundedness(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::fmt;

use thiserror::Error;

/// Location-tagged diagnostic from the kernel file parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("constant term is singular (modulus {modulus:.3e})")]
    SingularConstant { modulus: f64 },
    #[error("constant-term matrix is singular (condition estimate {condition:.3e})")]
    SingularMatrix { condition: f64 },
    #[error("branch violation: {0}")]
    Branch(String),
    #[error("derivative of order {requested} exceeds truncation order {available}")]
    Truncation { requested: usize, available: usize },
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("point is not on the submanifold: coordinate {index} has modulus {modulus:.3e}")]
    OffSubmanifold { index: usize, modulus: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoxError {
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("invalid box: {0}")]
    Invalid(String),
    #[error("incompatible boxes: {0}")]
    Incompatible(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("linear program {0}")]
    Solver(String),
}

pub type Result<T, E = BoxError> = std::result::Result<T, E>;

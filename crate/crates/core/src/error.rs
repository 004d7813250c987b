use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The noise law cannot be combined with the requested replicate count
    /// or operation.
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// Parameters fall outside the region where an analysis is defined.
    /// The message names the violated bound.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),
}

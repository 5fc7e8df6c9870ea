use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability vector must have at least one label")]
    EmptyVector,
    #[error("entry {index} = {value} is not a probability in [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("label vector entry {index} = {value} is not 0 or 1")]
    InvalidLabel { index: usize, value: u8 },
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("length mismatch: expected {expected} labels, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("brute-force enumeration supports at most {max} labels, got {labels}")]
    Capacity { labels: usize, max: usize },
    #[error("x = {0} lies outside the support [0, 1]")]
    Domain(f64),
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("insufficient data: need at least {needed} usable points, found {found}")]
    InsufficientData { needed: usize, found: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

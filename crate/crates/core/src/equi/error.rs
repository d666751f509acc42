use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquiError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{what} ({count}) is not divisible by {by}")]
    Divisibility {
        what: &'static str,
        count: usize,
        by: usize,
    },
    #[error("rotary embedding needs an even channel count, got {0}")]
    OddChannels(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub(crate) fn shape_err(msg: impl Into<String>) -> EquiError {
    EquiError::Shape(msg.into())
}

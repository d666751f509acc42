use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("invalid grade {0}; expected 0..=4")]
    InvalidGrade(usize),
    #[error("versor is not invertible (<u ~u>_0 = {0:e})")]
    NonInvertible(f64),
    #[error("point at infinity: |e123| = {0:e} is below tolerance")]
    PointAtInfinity(f64),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("versor parity does not match its grades")]
    ParityMismatch,
}

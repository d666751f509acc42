use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("unregistered op `{0}`")]
    UnregisteredOp(String),
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("value of node {0} requested before forward")]
    NotEvaluated(usize),
    #[error("{op}: {msg}")]
    Shape { op: &'static str, msg: String },
    #[error("backward needs a scalar output, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("non-finite gradient in parameter `{name}` (step {step})")]
    NonFiniteGradient { name: String, step: u64 },
    #[error("gradient list has {got} entries, expected {expected}")]
    GradientCount { got: usize, expected: usize },
    #[error("node {0} is not a leaf")]
    NotALeaf(usize),
}

pub(crate) fn shape_err(op: &'static str, msg: impl Into<String>) -> AutodiffError {
    AutodiffError::Shape { op, msg: msg.into() }
}

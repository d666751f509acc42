//! Reverse-mode automatic differentiation over a closed set of tensor ops.
//!
//! A [`Tape`] is built once by recording ops on leaf tensors, then evaluated
//! with [`Tape::forward`] and differentiated with [`Tape::backward`]. Leaves
//! can be overwritten with [`Tape::set_leaf`] and the graph replayed, which is
//! how training reuses one graph across batches.

mod error;
mod op;
mod optim;
mod params;
mod tape;

pub use error::AutodiffError;
pub use op::{Op, OpKind, Unary};
pub use optim::{global_norm, Adam, AdamConfig, LrSchedule};
pub use params::{Param, ParamStore};
pub use tape::{Tape, Var};

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

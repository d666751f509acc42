//! Projective geometric algebra G(3,0,1) and the building blocks of an
//! E(3)-equivariant transformer over it.
//!
//! The crate is organised bottom-up:
//!
//! - [`ga`]: the algebra itself (Cayley tables, products, duals, join,
//!   versors and the sandwich action, and the object embedding dictionary).
//! - [`equi`]: equivariant network layers acting on batches of multivectors.
//! - [`autodiff`]: a tape-based reverse-mode engine over those layers, plus
//!   Adam with an exponential learning-rate schedule.
//! - [`model`]: the assembled transformer and its checkpoint format.
//! - [`nbody`]: the gravitational n-body benchmark with baselines.
//! - [`verify`]: executable property suites shared by the CLI and tests.
//! - [`cli`]: the `gatr` command-line front end.

pub mod autodiff;
pub mod cli;
pub mod equi;
pub mod ga;
pub mod model;
pub mod nbody;
mod real;
pub mod verify;

pub use ga::{Multivector, Versor};
pub use real::Real;

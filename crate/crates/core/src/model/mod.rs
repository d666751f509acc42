//! The assembled transformer over multivector and scalar streams.

mod checkpoint;
mod config;
pub mod layers;
mod network;
mod params;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ConfigError, GatrConfig};
pub use network::{gatr_block, gatr_forward, join_reference, GatrGraph, ModelError};
pub use params::{init_params, mixed_from_store, mixed_into_store, param_breakdown, GatrParams};

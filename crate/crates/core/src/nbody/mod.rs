//! Gravitational n-body benchmark: data generation, embeddings, baselines,
//! training and evaluation.

mod data;
mod embed;
mod models;
mod sim;
mod train;

use thiserror::Error;

pub use data::{
    generate_dataset, generate_sample, read_dataset, sample_seed, write_dataset, write_dataset_csv, Dataset,
    DatasetHeader, NBodySample, SampleConfig, DATASET_MAGIC, DATASET_VERSION, MAX_DISPLACEMENT, REJECTION_WINDOW,
};
pub use embed::{embed_nbody, extract_prediction, POSITION_CHANNEL};
pub use models::{MlpConfig, ModelKind, ModelSpec, NetGraph, TransformerConfig, BODY_FEATURES};
pub use sim::{euler_integrate, Vec3, MIN_SEPARATION};
pub use train::{
    evaluate, metamorphic_deviation, predict, train, CurvePoint, EvalReport, Precision, TrainConfig, TrainResult,
};

use crate::autodiff::AutodiffError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum NBodyError {
    #[error("bodies {i} and {j} coincide (distance {distance:e})")]
    Coincident { i: usize, j: usize, distance: f64 },
    #[error("rejected {rejected} of {attempts} attempts; the displacement rule discards almost every sample")]
    Rejection { rejected: usize, attempts: usize },
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("malformed dataset: {0}")]
    Format(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("loss became {loss} at step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, NBodySample};
use super::models::{ModelSpec, NetGraph};
use super::sim::Vec3;
use super::NBodyError;
use crate::autodiff::{Adam, AdamConfig, LrSchedule, ParamStore};
use crate::verify::rel_error;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 3000,
            batch_size: 64,
            lr_start: 3e-4,
            lr_end: 3e-6,
            clip_norm: None,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub spec: ModelSpec,
    pub params: ParamStore<f64>,
    pub curve: Vec<CurvePoint>,
}

/// Minimizes the mean squared distance between predicted and true final
/// positions with Adam, drawing batches from reshuffled passes over `data`.
pub fn train(spec: &ModelSpec, data: &Dataset, config: &TrainConfig) -> Result<TrainResult, NBodyError> {
    match config.precision {
        Precision::F32 => train_as::<f32>(spec, data, config),
        Precision::F64 => train_as::<f64>(spec, data, config),
    }
}

fn train_as<T: Real>(spec: &ModelSpec, data: &Dataset, config: &TrainConfig) -> Result<TrainResult, NBodyError> {
    if data.is_empty() {
        return Err(NBodyError::Invalid("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(NBodyError::Config("batch_size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params: ParamStore<T> = spec.init_params(&mut rng).cast();
    let batch = config.batch_size.min(data.len());
    let mut graph = NetGraph::build(spec, &params, batch, data.n_bodies())?;
    let adam_config = AdamConfig {
        clip_norm: config.clip_norm,
        ..AdamConfig::default()
    };
    let schedule = LrSchedule {
        lr_start: config.lr_start,
        lr_end: config.lr_end,
        total_steps: config.steps as u64,
    };
    let mut adam = Adam::new(&params, adam_config, schedule);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut curve = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut picked: Vec<&NBodySample> = Vec::with_capacity(batch);
        while picked.len() < batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            picked.push(&data.samples[order[cursor]]);
            cursor += 1;
        }
        graph.set_params(&params)?;
        graph.set_batch(&picked)?;
        let loss = graph.forward()?;
        if !loss.is_finite() {
            return Err(NBodyError::NonFiniteLoss { step, loss });
        }
        graph.tape.backward(graph.loss)?;
        let lr = adam.lr();
        let grads = params.grads(&graph.tape, &graph.param_vars);
        adam.step(&mut params, &grads)?;
        curve.push(CurvePoint { step, loss, lr });
        if step % 500 == 0 {
            log::debug!("{} step {step} loss {loss:.6e} lr {lr:.3e}", spec.kind());
        }
    }
    Ok(TrainResult {
        spec: spec.clone(),
        params: params.cast(),
        curve,
    })
}

/// Mean over samples of the per-body mean squared distance, with its
/// standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub mse: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Bodies whose predicted point was at infinity and fell back to the
    /// initial position.
    pub fallbacks: usize,
}

const EVAL_CHUNK: usize = 64;

/// Predicted final positions for every sample, in dataset order.
pub fn predict(
    spec: &ModelSpec,
    params: &ParamStore<f64>,
    samples: &[NBodySample],
    precision: Precision,
    parallel: bool,
) -> Result<(Vec<Vec<Vec3>>, usize), NBodyError> {
    match precision {
        Precision::F32 => predict_as::<f32>(spec, params, samples, parallel),
        Precision::F64 => predict_as::<f64>(spec, params, samples, parallel),
    }
}

fn predict_as<T: Real>(
    spec: &ModelSpec,
    params: &ParamStore<f64>,
    samples: &[NBodySample],
    parallel: bool,
) -> Result<(Vec<Vec<Vec3>>, usize), NBodyError> {
    let params: ParamStore<T> = params.cast();
    let n = samples.first().map(|s| s.n_bodies()).unwrap_or(0);
    let chunk = |c: &[NBodySample]| -> Result<(Vec<Vec<Vec3>>, usize), NBodyError> {
        let refs: Vec<&NBodySample> = c.iter().collect();
        let mut graph = NetGraph::build(spec, &params, c.len(), n)?;
        graph.set_batch(&refs)?;
        graph.forward()?;
        graph.predictions(&refs)
    };
    let parts: Vec<_> = if parallel {
        samples.par_chunks(EVAL_CHUNK).map(chunk).collect()
    } else {
        samples.chunks(EVAL_CHUNK).map(chunk).collect()
    };
    let mut preds = Vec::with_capacity(samples.len());
    let mut misses = 0;
    for part in parts {
        let (p, m) = part?;
        preds.extend(p);
        misses += m;
    }
    Ok((preds, misses))
}

fn sample_error(pred: &[Vec3], truth: &[Vec3]) -> f64 {
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (0..3).map(|k| (p[k] - t[k]).powi(2)).sum::<f64>())
        .sum();
    sum / truth.len() as f64
}

pub fn evaluate(
    spec: &ModelSpec,
    params: &ParamStore<f64>,
    data: &Dataset,
    precision: Precision,
    parallel: bool,
) -> Result<EvalReport, NBodyError> {
    if data.is_empty() {
        return Err(NBodyError::Invalid("evaluation set is empty".into()));
    }
    spec.check_bodies(data.n_bodies())?;
    let (preds, fallbacks) = predict(spec, params, &data.samples, precision, parallel)?;
    let errors: Vec<f64> = preds
        .iter()
        .zip(&data.samples)
        .map(|(p, s)| sample_error(p, &s.pos1))
        .collect();
    let n = errors.len() as f64;
    let mse = errors.iter().sum::<f64>() / n;
    let var = if errors.len() > 1 {
        errors.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(EvalReport {
        mse,
        stderr: (var / n).sqrt(),
        n_samples: errors.len(),
        fallbacks,
    })
}

/// Metamorphic translation check on a translated split: predictions for each
/// sample are compared with the predictions for the same system moved back by
/// the split's translation mean, shifted forward again. Returns the relative
/// deviation `max |a - b| / max(|a|, |b|)` over all coordinates.
pub fn metamorphic_deviation(
    spec: &ModelSpec,
    params: &ParamStore<f64>,
    data: &Dataset,
    precision: Precision,
    parallel: bool,
) -> Result<f64, NBodyError> {
    let t = data.header.translation_mean;
    let back: Vec<NBodySample> = data.samples.iter().map(|s| s.translated([-t[0], -t[1], -t[2]])).collect();
    let (moved, _) = predict(spec, params, &data.samples, precision, parallel)?;
    let (base, _) = predict(spec, params, &back, precision, parallel)?;
    let flat = |p: &[Vec<Vec3>], shift: Vec3| -> Vec<f64> {
        p.iter()
            .flatten()
            .flat_map(|x| [x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]])
            .collect()
    };
    Ok(rel_error(&flat(&moved, [0.0; 3]), &flat(&base, t)))
}

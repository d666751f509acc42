use serde::{Deserialize, Serialize};

use super::error::AutodiffError;
use super::params::ParamStore;
use crate::Real;

/// Exponential decay from `lr_start` at step 0 to `lr_end` at `total_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_start: f64,
    pub lr_end: f64,
    pub total_steps: u64,
}

impl LrSchedule {
    pub fn lr_at(&self, step: u64) -> f64 {
        if self.total_steps == 0 {
            return self.lr_start;
        }
        let frac = step as f64 / self.total_steps as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(frac)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
        }
    }
}

/// Adam with bias correction; moments are kept in f64.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    pub schedule: LrSchedule,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

pub fn global_norm<T: Real>(grads: &[Vec<T>]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x.as_f64() * x.as_f64())
        .sum::<f64>()
        .sqrt()
}

impl Adam {
    pub fn new<T: Real>(params: &ParamStore<T>, config: AdamConfig, schedule: LrSchedule) -> Self {
        let zeros: Vec<Vec<f64>> = params.params.iter().map(|p| vec![0.0; p.data.len()]).collect();
        Self {
            config,
            schedule,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn lr(&self) -> f64 {
        self.schedule.lr_at(self.step)
    }

    /// Applies one update and advances the step counter.
    pub fn step<T: Real>(&mut self, params: &mut ParamStore<T>, grads: &[Vec<T>]) -> Result<(), AutodiffError> {
        if grads.len() != params.len() {
            return Err(AutodiffError::GradientCount {
                got: grads.len(),
                expected: params.len(),
            });
        }
        for (p, g) in params.params.iter().zip(grads) {
            if g.len() != p.data.len() {
                return Err(AutodiffError::GradientCount {
                    got: g.len(),
                    expected: p.data.len(),
                });
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(AutodiffError::NonFiniteGradient {
                    name: p.name.clone(),
                    step: self.step,
                });
            }
        }
        let clip = match self.config.clip_norm {
            Some(max) => {
                let norm = global_norm(grads);
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let lr = self.lr();
        self.step += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((x, gx), mi), vi) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                let gx = gx.as_f64() * clip;
                *mi = beta1 * *mi + (1.0 - beta1) * gx;
                *vi = beta2 * *vi + (1.0 - beta2) * gx * gx;
                let update = lr * (*mi / bc1) / ((*vi / bc2).sqrt() + eps);
                *x = T::from_f64(x.as_f64() - update);
            }
        }
        Ok(())
    }
}

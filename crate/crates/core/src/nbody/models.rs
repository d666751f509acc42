use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::NBodySample;
use super::embed::{embed_nbody, extract_prediction, POSITION_CHANNEL};
use super::sim::Vec3;
use super::NBodyError;
use crate::autodiff::{Op, ParamStore, Tape, Var};
use crate::ga::N_BLADES;
use crate::model::layers::{merge_heads, split_heads};
use crate::model::{init_params, join_reference, GatrConfig, GatrGraph};
use crate::Real;

/// Per-body features of the baselines: mass, position, velocity.
pub const BODY_FEATURES: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gatr,
    Transformer,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gatr, ModelKind::Transformer, ModelKind::Mlp];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gatr => "gatr",
            ModelKind::Transformer => "transformer",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected gatr, transformer or mlp)"))
    }
}

/// Pre-norm transformer over per-body feature tokens. The desk default width
/// equals the real-valued width of the desk GATr (8 x 16 + 32).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformerConfig {
    pub n_blocks: usize,
    pub width: usize,
    pub n_heads: usize,
    pub mlp_expansion: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            n_blocks: 3,
            width: 160,
            n_heads: 8,
            mlp_expansion: 2,
        }
    }
}

/// Fully connected network on the concatenated features of all bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub n_layers: usize,
    pub width: usize,
    pub n_bodies: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            n_layers: 3,
            width: 160,
            n_bodies: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSpec {
    Gatr(GatrConfig),
    Transformer(TransformerConfig),
    Mlp(MlpConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Gatr(_) => ModelKind::Gatr,
            ModelSpec::Transformer(_) => ModelKind::Transformer,
            ModelSpec::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Desk-scale defaults for `kind` on systems of `n_bodies`.
    pub fn desk(kind: ModelKind, n_bodies: usize) -> Self {
        match kind {
            ModelKind::Gatr => ModelSpec::Gatr(GatrConfig::desk()),
            ModelKind::Transformer => ModelSpec::Transformer(TransformerConfig::default()),
            ModelKind::Mlp => ModelSpec::Mlp(MlpConfig {
                n_bodies,
                ..MlpConfig::default()
            }),
        }
    }

    pub fn validate(&self) -> Result<(), NBodyError> {
        match self {
            ModelSpec::Gatr(c) => c.validate().map_err(|e| NBodyError::Config(e.to_string())),
            ModelSpec::Transformer(c) => {
                if c.n_blocks == 0 || c.width == 0 || c.n_heads == 0 || c.mlp_expansion == 0 {
                    return Err(NBodyError::Config("transformer sizes must be at least 1".into()));
                }
                if c.width % c.n_heads != 0 {
                    return Err(NBodyError::Config(format!(
                        "transformer width {} is not divisible by {} heads",
                        c.width, c.n_heads
                    )));
                }
                Ok(())
            }
            ModelSpec::Mlp(c) => {
                if c.n_layers == 0 || c.width == 0 || c.n_bodies == 0 {
                    return Err(NBodyError::Config("mlp sizes must be at least 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Whether the model accepts systems of `n` bodies.
    pub fn check_bodies(&self, n: usize) -> Result<(), NBodyError> {
        match self {
            ModelSpec::Mlp(c) if c.n_bodies != n => Err(NBodyError::Mismatch(format!(
                "the mlp was built for {} bodies and cannot evaluate systems of {n}",
                c.n_bodies
            ))),
            _ => Ok(()),
        }
    }

    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamStore<f64> {
        let mut store = ParamStore::new();
        let dense = |store: &mut ParamStore<f64>, name: &str, out: usize, inp: usize, rng: &mut R| {
            let normal = Normal::new(0.0, (1.0 / inp as f64).sqrt()).expect("positive deviation");
            store.push(format!("{name}.w"), &[out, inp], (0..out * inp).map(|_| normal.sample(rng)).collect());
            store.push(format!("{name}.b"), &[out], vec![0.0; out]);
        };
        match self {
            ModelSpec::Gatr(c) => return init_params(c, rng),
            ModelSpec::Transformer(c) => {
                let d = c.width;
                dense(&mut store, "embed", d, BODY_FEATURES, rng);
                for b in 0..c.n_blocks {
                    for p in ["q", "k", "v", "o"] {
                        dense(&mut store, &format!("block{b}.attn.{p}"), d, d, rng);
                    }
                    dense(&mut store, &format!("block{b}.fc1"), c.mlp_expansion * d, d, rng);
                    dense(&mut store, &format!("block{b}.fc2"), d, c.mlp_expansion * d, rng);
                }
                dense(&mut store, "head", 3, d, rng);
            }
            ModelSpec::Mlp(c) => {
                let mut inp = BODY_FEATURES * c.n_bodies;
                for l in 0..c.n_layers {
                    dense(&mut store, &format!("layer{l}"), c.width, inp, rng);
                    inp = c.width;
                }
                dense(&mut store, "head", 3 * c.n_bodies, inp, rng);
            }
        }
        store
    }
}

enum Inputs {
    Gatr { mv: Var, s: Var, reference: Var, out_mv: Var, channels: usize },
    Features(Var),
}

/// A recorded network for fixed batch size and body count, with an L2 loss
/// on the predicted final positions.
pub struct NetGraph<T: Real> {
    pub tape: Tape<T>,
    pub param_vars: Vec<Var>,
    pub batch: usize,
    pub n_bodies: usize,
    inputs: Inputs,
    pred: Var,
    target: Var,
    pub loss: Var,
}

fn dense<T: Real>(tape: &mut Tape<T>, params: &ParamStore<T>, vars: &[Var], name: &str, x: Var) -> Result<Var, NBodyError> {
    let find = |n: String| {
        params
            .params
            .iter()
            .position(|p| p.name == n)
            .map(|i| vars[i])
            .ok_or_else(|| NBodyError::Config(format!("missing parameter {n}")))
    };
    Ok(tape.record(Op::Dense {
        x,
        w: find(format!("{name}.w"))?,
        bias: Some(find(format!("{name}.b"))?),
    })?)
}

impl<T: Real> NetGraph<T> {
    pub fn build(spec: &ModelSpec, params: &ParamStore<T>, batch: usize, n_bodies: usize) -> Result<Self, NBodyError> {
        spec.validate()?;
        spec.check_bodies(n_bodies)?;
        let (b, n) = (batch, n_bodies);
        let (mut tape, param_vars, inputs, pred) = match spec {
            ModelSpec::Gatr(config) => {
                let g = GatrGraph::build(config, params, b, None, n)?;
                let mut tape = g.tape;
                let c_out = config.out_mv_channels;
                let point = tape.record(Op::Slice {
                    x: g.out.mv,
                    axis: 2,
                    start: POSITION_CHANNEL,
                    len: 1,
                })?;
                let xyz = tape.record(Op::ExtractPoint(point))?;
                let pred = tape.record(Op::Reshape(xyz, vec![b, n, 3]))?;
                let inputs = Inputs::Gatr {
                    mv: g.mv_in,
                    s: g.s_in,
                    reference: g.reference,
                    out_mv: g.out.mv,
                    channels: c_out,
                };
                (tape, g.param_vars, inputs, pred)
            }
            ModelSpec::Transformer(c) => {
                let mut tape = Tape::new();
                let vars = params.attach(&mut tape)?;
                let x = tape.input(&[b, n, BODY_FEATURES], vec![T::zero(); b * n * BODY_FEATURES])?;
                let no_mv = tape.input(&[b * c.n_heads, n, 0, N_BLADES], Vec::new())?;
                let mut h = dense(&mut tape, params, &vars, "embed", x)?;
                for k in 0..c.n_blocks {
                    let p = |s: &str| format!("block{k}.{s}");
                    let normed = tape.record(Op::LayerNorm(h, crate::equi::LAYER_NORM_EPS))?;
                    let q = dense(&mut tape, params, &vars, &p("attn.q"), normed)?;
                    let kk = dense(&mut tape, params, &vars, &p("attn.k"), normed)?;
                    let v = dense(&mut tape, params, &vars, &p("attn.v"), normed)?;
                    let qs = split_heads(&mut tape, q, c.n_heads)?;
                    let ks = split_heads(&mut tape, kk, c.n_heads)?;
                    let vs = split_heads(&mut tape, v, c.n_heads)?;
                    let w = tape.record(Op::AttentionWeights {
                        qm: no_mv,
                        km: no_mv,
                        qs,
                        ks,
                    })?;
                    let o = tape.record(Op::AttentionApply { w, v: vs })?;
                    let o = merge_heads(&mut tape, o, c.n_heads)?;
                    let o = dense(&mut tape, params, &vars, &p("attn.o"), o)?;
                    h = tape.record(Op::Add(h, o))?;
                    let normed = tape.record(Op::LayerNorm(h, crate::equi::LAYER_NORM_EPS))?;
                    let f = dense(&mut tape, params, &vars, &p("fc1"), normed)?;
                    let f = tape.record(Op::Gelu(f))?;
                    let f = dense(&mut tape, params, &vars, &p("fc2"), f)?;
                    h = tape.record(Op::Add(h, f))?;
                }
                let pred = dense(&mut tape, params, &vars, "head", h)?;
                (tape, vars, Inputs::Features(x), pred)
            }
            ModelSpec::Mlp(c) => {
                let mut tape = Tape::new();
                let vars = params.attach(&mut tape)?;
                let x = tape.input(&[b, n * BODY_FEATURES], vec![T::zero(); b * n * BODY_FEATURES])?;
                let mut h = x;
                for l in 0..c.n_layers {
                    h = dense(&mut tape, params, &vars, &format!("layer{l}"), h)?;
                    h = tape.record(Op::Gelu(h))?;
                }
                let out = dense(&mut tape, params, &vars, "head", h)?;
                let pred = tape.record(Op::Reshape(out, vec![b, n, 3]))?;
                (tape, vars, Inputs::Features(x), pred)
            }
        };
        let target = tape.input(&[b, n, 3], vec![T::zero(); b * n * 3])?;
        let loss = tape.record(Op::SquaredError(pred, target))?;
        Ok(Self {
            tape,
            param_vars,
            batch,
            n_bodies,
            inputs,
            pred,
            target,
            loss,
        })
    }

    pub fn set_params(&mut self, params: &ParamStore<T>) -> Result<(), NBodyError> {
        params.sync(&mut self.tape, &self.param_vars)?;
        Ok(())
    }

    /// Loads inputs and targets for `samples`, which must fill the batch.
    pub fn set_batch(&mut self, samples: &[&NBodySample]) -> Result<(), NBodyError> {
        if samples.len() != self.batch || samples.iter().any(|s| s.n_bodies() != self.n_bodies) {
            return Err(NBodyError::Mismatch(format!(
                "graph expects {} samples of {} bodies",
                self.batch, self.n_bodies
            )));
        }
        let cast = |v: f64| T::from_f64(v);
        let target: Vec<T> = samples.iter().flat_map(|s| s.pos1.iter().flatten().map(|v| cast(*v))).collect();
        self.tape.set_leaf(self.target, &target)?;
        match self.inputs {
            Inputs::Gatr { mv, s, reference, .. } => {
                let mut mvs = Vec::new();
                let mut ss = Vec::new();
                let mut refs = Vec::new();
                for sample in samples {
                    let (m, sc) = embed_nbody(sample);
                    let m: Vec<T> = m.data.iter().map(|v| cast(*v)).collect();
                    refs.extend(join_reference(&m).0);
                    mvs.extend(m);
                    ss.extend(sc.data.iter().map(|v| cast(*v)));
                }
                self.tape.set_leaf(mv, &mvs)?;
                self.tape.set_leaf(s, &ss)?;
                self.tape.set_leaf(reference, &refs)?;
            }
            Inputs::Features(x) => {
                let mut feats = Vec::with_capacity(self.batch * self.n_bodies * BODY_FEATURES);
                for sample in samples {
                    for i in 0..self.n_bodies {
                        feats.push(cast(sample.masses[i]));
                        feats.extend(sample.pos0[i].iter().map(|v| cast(*v)));
                        feats.extend(sample.vel0[i].iter().map(|v| cast(*v)));
                    }
                }
                self.tape.set_leaf(x, &feats)?;
            }
        }
        Ok(())
    }

    pub fn forward(&mut self) -> Result<f64, NBodyError> {
        self.tape.forward()?;
        Ok(self.tape.scalar(self.loss)?.as_f64())
    }

    /// Predicted final positions after [`NetGraph::forward`], per sample.
    /// GATr outputs that are points at infinity fall back to the initial
    /// position; the count of such bodies is returned.
    pub fn predictions(&self, samples: &[&NBodySample]) -> Result<(Vec<Vec<Vec3>>, usize), NBodyError> {
        let n = self.n_bodies;
        match self.inputs {
            Inputs::Gatr { out_mv, channels, .. } => {
                let out = self.tape.value(out_mv)?;
                let mut misses = 0;
                let preds = out
                    .chunks_exact(n * channels * N_BLADES)
                    .zip(samples)
                    .map(|(o, s)| {
                        let (p, m) = extract_prediction(o, channels, &s.pos0);
                        misses += m;
                        p
                    })
                    .collect();
                Ok((preds, misses))
            }
            Inputs::Features(_) => {
                let out = self.tape.value(self.pred)?;
                let preds = out
                    .chunks_exact(n * 3)
                    .map(|o| o.chunks_exact(3).map(|c| [c[0].as_f64(), c[1].as_f64(), c[2].as_f64()]).collect())
                    .collect();
                Ok((preds, 0))
            }
        }
    }
}

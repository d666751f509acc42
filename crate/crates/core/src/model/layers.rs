//! Graph builders shared by the network, the standalone layer functions and
//! the gradient checks.

use std::collections::HashMap;

use super::network::ModelError;
use crate::autodiff::{Op, ParamStore, Tape, Var};
use crate::equi::{
    AttentionParams, EquiError, MultivectorBatch, ScalarBatch, LAYER_NORM_EPS,
};
use crate::ga::{Product, N_BLADES};
use crate::Real;

/// Tape nodes of the parameters, by name.
#[derive(Clone, Debug, Default)]
pub struct VarMap(pub HashMap<String, Var>);

impl VarMap {
    pub fn attach<T: Real>(tape: &mut Tape<T>, params: &ParamStore<T>) -> Result<(Self, Vec<Var>), ModelError> {
        let vars = params.attach(tape)?;
        let map = params
            .params
            .iter()
            .zip(&vars)
            .map(|(p, v)| (p.name.clone(), *v))
            .collect();
        Ok((Self(map), vars))
    }

    pub fn get(&self, name: &str) -> Result<Var, ModelError> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }
}

/// The two activation streams: multivectors `[.., c, 16]` and scalars `[.., s]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stream {
    pub mv: Var,
    pub s: Var,
}

/// Which token axis a block attends over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Items,
    Time,
}

pub fn mixed_linear<T: Real>(tape: &mut Tape<T>, vars: &VarMap, prefix: &str, x: Stream) -> Result<Stream, ModelError> {
    let p = |n: &str| vars.get(&format!("{prefix}.{n}"));
    let mut mv = tape.record(Op::EquiLinear {
        x: x.mv,
        w: p("mv_w")?,
        bias: Some(p("mv_bias")?),
    })?;
    let extra = tape.record(Op::Dense {
        x: x.s,
        w: p("s_to_mv")?,
        bias: None,
    })?;
    let extra = tape.record(Op::ToScalarBlade(extra))?;
    mv = tape.record(Op::Add(mv, extra))?;
    let s = tape.record(Op::Dense {
        x: x.s,
        w: p("ss")?,
        bias: Some(p("s_bias")?),
    })?;
    let blades = tape.record(Op::ScalarBlade(x.mv))?;
    let from_mv = tape.record(Op::Dense {
        x: blades,
        w: p("mv_to_s")?,
        bias: None,
    })?;
    let s = tape.record(Op::Add(s, from_mv))?;
    Ok(Stream { mv, s })
}

fn reshape<T: Real>(tape: &mut Tape<T>, x: Var, shape: Vec<usize>) -> Result<Var, ModelError> {
    Ok(tape.record(Op::Reshape(x, shape))?)
}

fn permute<T: Real>(tape: &mut Tape<T>, x: Var, perm: Vec<usize>) -> Result<Var, ModelError> {
    Ok(tape.record(Op::Permute(x, perm))?)
}

/// `[g, n, c, ..rest]` -> `[g * heads, n, c / heads, ..rest]`
pub(crate) fn split_heads<T: Real>(tape: &mut Tape<T>, x: Var, heads: usize) -> Result<Var, ModelError> {
    let shape = tape.shape(x).to_vec();
    let (g, n, c) = (shape[0], shape[1], shape[2]);
    let rest = &shape[3..];
    let mut split = vec![g, n, heads, c / heads];
    split.extend_from_slice(rest);
    let x = reshape(tape, x, split)?;
    let mut perm = vec![0, 2, 1, 3];
    perm.extend(4..4 + rest.len());
    let x = permute(tape, x, perm)?;
    let mut merged = vec![g * heads, n, c / heads];
    merged.extend_from_slice(rest);
    reshape(tape, x, merged)
}

/// Inverse of [`split_heads`].
pub(crate) fn merge_heads<T: Real>(tape: &mut Tape<T>, x: Var, heads: usize) -> Result<Var, ModelError> {
    let shape = tape.shape(x).to_vec();
    let (gh, n, ch) = (shape[0], shape[1], shape[2]);
    let rest = &shape[3..];
    let mut split = vec![gh / heads, heads, n, ch];
    split.extend_from_slice(rest);
    let x = reshape(tape, x, split)?;
    let mut perm = vec![0, 2, 1, 3];
    perm.extend(4..4 + rest.len());
    let x = permute(tape, x, perm)?;
    let mut merged = vec![gh / heads, n, ch * heads];
    merged.extend_from_slice(rest);
    reshape(tape, x, merged)
}

/// Multi-head self-attention over axis 1 of `x.mv [g, n, c, 16]` and
/// `x.s [g, n, s]`. With `rotary`, scalar queries and keys are rotated by
/// the given per-token positions.
pub fn self_attention<T: Real>(
    tape: &mut Tape<T>,
    vars: &VarMap,
    prefix: &str,
    x: Stream,
    heads: usize,
    rotary: Option<(&[f64], f64)>,
) -> Result<Stream, ModelError> {
    let c = tape.shape(x.mv)[2];
    let s = tape.shape(x.s)[2];
    if !c.is_multiple_of(heads) {
        return Err(EquiError::Divisibility {
            what: "multivector channels",
            count: c,
            by: heads,
        }
        .into());
    }
    if !s.is_multiple_of(heads) {
        return Err(EquiError::Divisibility {
            what: "scalar channels",
            count: s,
            by: heads,
        }
        .into());
    }
    let q = mixed_linear(tape, vars, &format!("{prefix}.q"), x)?;
    let k = mixed_linear(tape, vars, &format!("{prefix}.k"), x)?;
    let v = mixed_linear(tape, vars, &format!("{prefix}.v"), x)?;
    let qm = split_heads(tape, q.mv, heads)?;
    let km = split_heads(tape, k.mv, heads)?;
    let vm = split_heads(tape, v.mv, heads)?;
    let mut qs = split_heads(tape, q.s, heads)?;
    let mut ks = split_heads(tape, k.s, heads)?;
    let vs = split_heads(tape, v.s, heads)?;
    if let Some((positions, base)) = rotary {
        let positions = positions.to_vec();
        qs = tape.record(Op::Rotary {
            x: qs,
            positions: positions.clone(),
            base,
        })?;
        ks = tape.record(Op::Rotary { x: ks, positions, base })?;
    }
    let w = tape.record(Op::AttentionWeights { qm, km, qs, ks })?;
    let om = tape.record(Op::AttentionApply { w, v: vm })?;
    let os = tape.record(Op::AttentionApply { w, v: vs })?;
    let om = merge_heads(tape, om, heads)?;
    let os = merge_heads(tape, os, heads)?;
    mixed_linear(tape, vars, &format!("{prefix}.out"), Stream { mv: om, s: os })
}

/// Linear, geometric bilinear, linear, gated nonlinearity, linear.
/// `reference` is `[batch x 16]`, matching the leading axis of `x`.
pub fn mlp<T: Real>(
    tape: &mut Tape<T>,
    vars: &VarMap,
    prefix: &str,
    x: Stream,
    reference: Var,
) -> Result<Stream, ModelError> {
    let h = mixed_linear(tape, vars, &format!("{prefix}.in"), x)?;
    let shape = tape.shape(h.mv).to_vec();
    let axis = shape.len() - 2;
    let half = shape[axis] / 2;
    let a = tape.record(Op::Slice {
        x: h.mv,
        axis,
        start: 0,
        len: half,
    })?;
    let b = tape.record(Op::Slice {
        x: h.mv,
        axis,
        start: half,
        len: half,
    })?;
    let gp = tape.record(Op::Bilinear(Product::Geometric, a, b))?;
    let join = tape.record(Op::EquiJoin(a, b, reference))?;
    let both = tape.record(Op::Concat(vec![gp, join], axis))?;
    let mixed = tape.record(Op::EquiLinear {
        x: both,
        w: vars.get(&format!("{prefix}.mix.mv_w"))?,
        bias: Some(vars.get(&format!("{prefix}.mix.mv_bias"))?),
    })?;
    let mv = tape.record(Op::GatedGelu(mixed))?;
    let s = tape.record(Op::Gelu(h.s))?;
    mixed_linear(tape, vars, &format!("{prefix}.out"), Stream { mv, s })
}

/// One pre-norm block. `x.mv` is `[b, n, c, 16]`, or `[b, t, n, c, 16]` in
/// axial mode where `axis` picks the attended axis.
pub fn block<T: Real>(
    tape: &mut Tape<T>,
    vars: &VarMap,
    prefix: &str,
    x: Stream,
    reference: Var,
    heads: usize,
    axis: Axis,
    rotary_base: f64,
) -> Result<Stream, ModelError> {
    let mv_shape = tape.shape(x.mv).to_vec();
    let s_shape = tape.shape(x.s).to_vec();
    let normed = Stream {
        mv: tape.record(Op::MvLayerNorm(x.mv, LAYER_NORM_EPS))?,
        s: tape.record(Op::LayerNorm(x.s, LAYER_NORM_EPS))?,
    };
    let (c, s) = (mv_shape[mv_shape.len() - 2], s_shape[s_shape.len() - 1]);
    let attn = match (mv_shape.len(), axis) {
        (4, Axis::Items) => self_attention(tape, vars, &format!("{prefix}.attn"), normed, heads, None)?,
        (5, Axis::Items) => {
            let (b, t, n) = (mv_shape[0], mv_shape[1], mv_shape[2]);
            let grouped = Stream {
                mv: reshape(tape, normed.mv, vec![b * t, n, c, N_BLADES])?,
                s: reshape(tape, normed.s, vec![b * t, n, s])?,
            };
            let out = self_attention(tape, vars, &format!("{prefix}.attn"), grouped, heads, None)?;
            Stream {
                mv: reshape(tape, out.mv, mv_shape.clone())?,
                s: reshape(tape, out.s, s_shape.clone())?,
            }
        }
        (5, Axis::Time) => {
            let (b, t, n) = (mv_shape[0], mv_shape[1], mv_shape[2]);
            let mv = permute(tape, normed.mv, vec![0, 2, 1, 3, 4])?;
            let sv = permute(tape, normed.s, vec![0, 2, 1, 3])?;
            let grouped = Stream {
                mv: reshape(tape, mv, vec![b * n, t, c, N_BLADES])?,
                s: reshape(tape, sv, vec![b * n, t, s])?,
            };
            let positions: Vec<f64> = (0..t).map(|i| i as f64).collect();
            let out = self_attention(
                tape,
                vars,
                &format!("{prefix}.attn"),
                grouped,
                heads,
                Some((&positions, rotary_base)),
            )?;
            let mv = reshape(tape, out.mv, vec![b, n, t, c, N_BLADES])?;
            let sv = reshape(tape, out.s, vec![b, n, t, s])?;
            Stream {
                mv: permute(tape, mv, vec![0, 2, 1, 3, 4])?,
                s: permute(tape, sv, vec![0, 2, 1, 3])?,
            }
        }
        _ => return Err(ModelError::Shape(format!("block input {mv_shape:?} with {axis:?} attention"))),
    };
    let x = Stream {
        mv: tape.record(Op::Add(x.mv, attn.mv))?,
        s: tape.record(Op::Add(x.s, attn.s))?,
    };
    let normed = Stream {
        mv: tape.record(Op::MvLayerNorm(x.mv, LAYER_NORM_EPS))?,
        s: tape.record(Op::LayerNorm(x.s, LAYER_NORM_EPS))?,
    };
    let update = mlp(tape, vars, &format!("{prefix}.mlp"), normed, reference)?;
    Ok(Stream {
        mv: tape.record(Op::Add(x.mv, update.mv))?,
        s: tape.record(Op::Add(x.s, update.s))?,
    })
}

/// Backs [`crate::equi::multi_head_attention`]: a time axis, if any, is a
/// batch axis.
pub(crate) fn standalone_attention<T: Real>(
    x: &MultivectorBatch<T>,
    s: &ScalarBatch<T>,
    params: &AttentionParams<T>,
) -> Result<(MultivectorBatch<T>, ScalarBatch<T>), EquiError> {
    let wrap = |e: ModelError| match e {
        ModelError::Equi(e) => e,
        other => EquiError::Shape(other.to_string()),
    };
    if s.rows() != x.rows() || s.time != x.time {
        return Err(EquiError::Shape("scalar and multivector rows differ".into()));
    }
    let mut store = ParamStore::new();
    for (name, w) in [("q", &params.q), ("k", &params.k), ("v", &params.v), ("out", &params.out)] {
        super::mixed_into_store(&mut store, &format!("attn.{name}"), w);
    }
    let g = x.time.unwrap_or(1);
    let mut tape = Tape::new();
    let (vars, _) = VarMap::attach(&mut tape, &store).map_err(wrap)?;
    let mv = tape
        .input(&[g, x.items, x.channels, N_BLADES], x.data.clone())
        .map_err(|e| wrap(e.into()))?;
    let sv = tape
        .input(&[g, s.items, s.channels], s.data.clone())
        .map_err(|e| wrap(e.into()))?;
    let out = self_attention(&mut tape, &vars, "attn", Stream { mv, s: sv }, params.n_heads, None).map_err(wrap)?;
    tape.forward().map_err(|e| wrap(e.into()))?;
    let c_out = params.out.mv.c_out;
    let s_out = params.out.s_out;
    Ok((
        MultivectorBatch {
            time: x.time,
            items: x.items,
            channels: c_out,
            data: tape.value(out.mv).map_err(|e| wrap(e.into()))?.to_vec(),
        },
        ScalarBatch {
            time: s.time,
            items: s.items,
            channels: s_out,
            data: tape.value(out.s).map_err(|e| wrap(e.into()))?.to_vec(),
        },
    ))
}

use super::error::shape_err;
use super::{EquiError, MixedLinearWeights, MultivectorBatch, ScalarBatch};
use crate::ga::{blade, N_BLADES};
use crate::Real;

/// Sizes of a batched attention call: `groups` independent problems with
/// `nq` queries and `nk` keys, `c_mv` multivector and `c_s` scalar channels
/// in queries and keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttnShape {
    pub groups: usize,
    pub nq: usize,
    pub nk: usize,
    pub c_mv: usize,
    pub c_s: usize,
}

impl AttnShape {
    pub fn scale<T: Real>(&self) -> T {
        T::one() / T::from_usize(8 * self.c_mv + self.c_s).sqrt()
    }
}

/// Softmax over keys of the invariant logits. Queries/keys are
/// `[groups x n x c_mv x 16]` and `[groups x n x c_s]`; `w` is `[groups x nq x nk]`.
pub fn attention_weights<T: Real>(shape: AttnShape, qm: &[T], km: &[T], qs: &[T], ks: &[T], w: &mut [T]) {
    let AttnShape { groups, nq, nk, c_mv, c_s } = shape;
    let scale: T = shape.scale();
    let mw = c_mv * N_BLADES;
    for g in 0..groups {
        for i in 0..nq {
            let q = &qm[(g * nq + i) * mw..(g * nq + i + 1) * mw];
            let qsr = &qs[(g * nq + i) * c_s..(g * nq + i + 1) * c_s];
            let row = &mut w[(g * nq + i) * nk..(g * nq + i + 1) * nk];
            for (j, logit) in row.iter_mut().enumerate() {
                let k = &km[(g * nk + j) * mw..(g * nk + j + 1) * mw];
                let ksr = &ks[(g * nk + j) * c_s..(g * nk + j + 1) * c_s];
                let mut acc = T::zero();
                for c in 0..c_mv {
                    for &b in &blade::EUCLIDEAN {
                        acc += q[c * N_BLADES + b] * k[c * N_BLADES + b];
                    }
                }
                for (a, b) in qsr.iter().zip(ksr) {
                    acc += *a * *b;
                }
                *logit = acc * scale;
            }
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn attention_weights_backward<T: Real>(
    shape: AttnShape,
    qm: &[T],
    km: &[T],
    qs: &[T],
    ks: &[T],
    w: &[T],
    gw: &[T],
    gqm: &mut [T],
    gkm: &mut [T],
    gqs: &mut [T],
    gks: &mut [T],
) {
    let AttnShape { groups, nq, nk, c_mv, c_s } = shape;
    let scale: T = shape.scale();
    let mw = c_mv * N_BLADES;
    for g in 0..groups {
        for i in 0..nq {
            let wr = &w[(g * nq + i) * nk..(g * nq + i + 1) * nk];
            let gr = &gw[(g * nq + i) * nk..(g * nq + i + 1) * nk];
            let mut dot = T::zero();
            for (a, b) in wr.iter().zip(gr) {
                dot += *a * *b;
            }
            let qo = (g * nq + i) * mw;
            let qso = (g * nq + i) * c_s;
            for j in 0..nk {
                let gl = wr[j] * (gr[j] - dot) * scale;
                if gl == T::zero() {
                    continue;
                }
                let ko = (g * nk + j) * mw;
                let kso = (g * nk + j) * c_s;
                for c in 0..c_mv {
                    for &b in &blade::EUCLIDEAN {
                        let o = c * N_BLADES + b;
                        gqm[qo + o] += gl * km[ko + o];
                        gkm[ko + o] += gl * qm[qo + o];
                    }
                }
                for s in 0..c_s {
                    gqs[qso + s] += gl * ks[kso + s];
                    gks[kso + s] += gl * qs[qso + s];
                }
            }
        }
    }
}

/// `out[g, i, :] = sum_j w[g, i, j] v[g, j, :]` with `feat` values per key.
pub fn attention_apply<T: Real>(groups: usize, nq: usize, nk: usize, feat: usize, w: &[T], v: &[T], out: &mut [T]) {
    out.fill(T::zero());
    for g in 0..groups {
        for i in 0..nq {
            let o = &mut out[(g * nq + i) * feat..(g * nq + i + 1) * feat];
            for j in 0..nk {
                let a = w[(g * nq + i) * nk + j];
                let vr = &v[(g * nk + j) * feat..(g * nk + j + 1) * feat];
                for (dst, x) in o.iter_mut().zip(vr) {
                    *dst += a * *x;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn attention_apply_backward<T: Real>(
    groups: usize,
    nq: usize,
    nk: usize,
    feat: usize,
    w: &[T],
    v: &[T],
    g: &[T],
    mut gw: Option<&mut [T]>,
    mut gv: Option<&mut [T]>,
) {
    for gi in 0..groups {
        for i in 0..nq {
            let gr = &g[(gi * nq + i) * feat..(gi * nq + i + 1) * feat];
            for j in 0..nk {
                let vo = (gi * nk + j) * feat;
                if let Some(gw) = gw.as_deref_mut() {
                    let mut acc = T::zero();
                    for (a, b) in gr.iter().zip(&v[vo..vo + feat]) {
                        acc += *a * *b;
                    }
                    gw[(gi * nq + i) * nk + j] += acc;
                }
                if let Some(gv) = gv.as_deref_mut() {
                    let a = w[(gi * nq + i) * nk + j];
                    for (dst, x) in gv[vo..vo + feat].iter_mut().zip(gr) {
                        *dst += a * *x;
                    }
                }
            }
        }
    }
}

/// Single-head attention over the item axis, returning the attended
/// multivector and scalar values. A time axis, if present, is treated as a
/// batch axis.
#[allow(clippy::too_many_arguments)]
pub fn mv_attention<T: Real>(
    q: &MultivectorBatch<T>,
    k: &MultivectorBatch<T>,
    v: &MultivectorBatch<T>,
    qs: &ScalarBatch<T>,
    ks: &ScalarBatch<T>,
    vs: &ScalarBatch<T>,
) -> Result<(MultivectorBatch<T>, ScalarBatch<T>), EquiError> {
    let groups = q.time.unwrap_or(1);
    let same = |a: Option<usize>| a.unwrap_or(1) == groups;
    if !(same(k.time) && same(v.time) && same(qs.time) && same(ks.time) && same(vs.time)) {
        return Err(shape_err("attention operands have different time axes"));
    }
    if k.items != v.items || ks.items != k.items || vs.items != k.items || qs.items != q.items {
        return Err(shape_err("attention item counts do not match"));
    }
    if q.channels != k.channels || qs.channels != ks.channels {
        return Err(shape_err(format!(
            "query channels {}+{} differ from key channels {}+{}",
            q.channels, qs.channels, k.channels, ks.channels
        )));
    }
    let shape = AttnShape {
        groups,
        nq: q.items,
        nk: k.items,
        c_mv: q.channels,
        c_s: qs.channels,
    };
    let mut w = vec![T::zero(); groups * shape.nq * shape.nk];
    attention_weights(shape, &q.data, &k.data, &qs.data, &ks.data, &mut w);
    let mut om = vec![T::zero(); groups * shape.nq * v.channels * N_BLADES];
    attention_apply(groups, shape.nq, shape.nk, v.channels * N_BLADES, &w, &v.data, &mut om);
    let mut os = vec![T::zero(); groups * shape.nq * vs.channels];
    attention_apply(groups, shape.nq, shape.nk, vs.channels, &w, &vs.data, &mut os);
    Ok((
        MultivectorBatch {
            time: q.time,
            items: q.items,
            channels: v.channels,
            data: om,
        },
        ScalarBatch {
            time: q.time,
            items: q.items,
            channels: vs.channels,
            data: os,
        },
    ))
}

/// Projections of a multi-head self-attention layer.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<T = f64> {
    pub n_heads: usize,
    pub q: MixedLinearWeights<T>,
    pub k: MixedLinearWeights<T>,
    pub v: MixedLinearWeights<T>,
    pub out: MixedLinearWeights<T>,
}

/// Multi-head self-attention over the item axis (no positional encoding).
pub fn multi_head_attention<T: Real>(
    x: &MultivectorBatch<T>,
    s: &ScalarBatch<T>,
    params: &AttentionParams<T>,
) -> Result<(MultivectorBatch<T>, ScalarBatch<T>), EquiError> {
    crate::model::layers::standalone_attention(x, s, params)
}

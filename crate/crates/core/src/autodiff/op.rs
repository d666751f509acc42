use std::str::FromStr;

use super::error::{shape_err, AutodiffError};
use super::numel;
use super::tape::Var;
use crate::equi::N_BASIS_MAPS;
use crate::ga::{Multivector, Product, N_BLADES};

/// Linear maps acting on each multivector independently.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Reverse,
    GradeInvolution,
    GradeProjection(usize),
    Dual,
    DualInverse,
    E0Mul,
}

impl Unary {
    pub fn apply(&self, m: &Multivector) -> Multivector {
        match *self {
            Unary::Reverse => m.reverse(),
            Unary::GradeInvolution => m.grade_involution(),
            Unary::GradeProjection(k) => m.grade_projection(k).unwrap_or_else(|_| Multivector::zero()),
            Unary::Dual => m.dual(),
            Unary::DualInverse => m.dual_inverse(),
            Unary::E0Mul => m.e0_mul(),
        }
    }

    /// Nonzero entries `(out, in, coefficient)` of the map's 16x16 matrix.
    pub(crate) fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..N_BLADES {
            let image = self.apply(&Multivector::basis(i, 1.0));
            for (o, &v) in image.0.iter().enumerate() {
                if v != 0.0 {
                    out.push((o, i, v));
                }
            }
        }
        out
    }
}

/// A recorded operation. Trailing axes of size 16 hold multivectors.
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Unary(Unary, Var),
    Bilinear(Product, Var, Var),
    /// Join scaled by the pseudoscalar of a `[groups x 16]` reference, one
    /// reference per entry of the leading axis.
    EquiJoin(Var, Var, Var),
    /// Invariant inner product; drops the trailing 16.
    Inner(Var, Var),
    /// `x [.., c_in, 16]`, `w [c_out, c_in, 9]`, optional bias `[c_out]`.
    EquiLinear { x: Var, w: Var, bias: Option<Var> },
    /// `x [.., in]`, `w [out, in]`, optional bias `[out]`.
    Dense { x: Var, w: Var, bias: Option<Var> },
    /// `[.., 16] -> [..]`
    ScalarBlade(Var),
    /// `[..] -> [.., 16]` with the value in the scalar blade.
    ToScalarBlade(Var),
    Gelu(Var),
    GatedGelu(Var),
    /// Normalizes over the trailing `[channels x 16]`.
    MvLayerNorm(Var, f64),
    /// Normalizes over the trailing axis.
    LayerNorm(Var, f64),
    /// Softmax attention weights `[g, nq, nk]` from
    /// `qm [g, nq, c, 16]`, `km [g, nk, c, 16]`, `qs [g, nq, s]`, `ks [g, nk, s]`.
    AttentionWeights { qm: Var, km: Var, qs: Var, ks: Var },
    /// `w [g, nq, nk]`, `v [g, nk, ..] -> [g, nq, ..]`
    AttentionApply { w: Var, v: Var },
    /// `x [g, n, d]` rotated by position along `n`.
    Rotary { x: Var, positions: Vec<f64>, base: f64 },
    Permute(Var, Vec<usize>),
    Reshape(Var, Vec<usize>),
    Concat(Vec<Var>, usize),
    Slice { x: Var, axis: usize, start: usize, len: usize },
    /// Sum of squared differences divided by the number of trailing-axis rows.
    SquaredError(Var, Var),
    Sum(Var),
    /// `[.., 16] -> [.., 3]` Euclidean point coordinates.
    ExtractPoint(Var),
}

/// Names of the registered ops, for lookup from text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Add,
    Sub,
    Scale,
    Unary,
    Bilinear,
    EquiJoin,
    Inner,
    EquiLinear,
    Dense,
    ScalarBlade,
    ToScalarBlade,
    Gelu,
    GatedGelu,
    MvLayerNorm,
    LayerNorm,
    AttentionWeights,
    AttentionApply,
    Rotary,
    Permute,
    Reshape,
    Concat,
    Slice,
    SquaredError,
    Sum,
    ExtractPoint,
}

const KIND_NAMES: [(OpKind, &str); 25] = [
    (OpKind::Add, "add"),
    (OpKind::Sub, "sub"),
    (OpKind::Scale, "scale"),
    (OpKind::Unary, "unary"),
    (OpKind::Bilinear, "bilinear"),
    (OpKind::EquiJoin, "equi_join"),
    (OpKind::Inner, "inner"),
    (OpKind::EquiLinear, "equi_linear"),
    (OpKind::Dense, "dense"),
    (OpKind::ScalarBlade, "scalar_blade"),
    (OpKind::ToScalarBlade, "to_scalar_blade"),
    (OpKind::Gelu, "gelu"),
    (OpKind::GatedGelu, "gated_gelu"),
    (OpKind::MvLayerNorm, "mv_layer_norm"),
    (OpKind::LayerNorm, "layer_norm"),
    (OpKind::AttentionWeights, "attention_weights"),
    (OpKind::AttentionApply, "attention_apply"),
    (OpKind::Rotary, "rotary"),
    (OpKind::Permute, "permute"),
    (OpKind::Reshape, "reshape"),
    (OpKind::Concat, "concat"),
    (OpKind::Slice, "slice"),
    (OpKind::SquaredError, "squared_error"),
    (OpKind::Sum, "sum"),
    (OpKind::ExtractPoint, "extract_point"),
];

impl OpKind {
    pub fn all() -> impl Iterator<Item = OpKind> {
        KIND_NAMES.iter().map(|(k, _)| *k)
    }

    pub fn name(&self) -> &'static str {
        KIND_NAMES.iter().find(|(k, _)| k == self).map(|(_, n)| *n).unwrap()
    }
}

impl FromStr for OpKind {
    type Err = AutodiffError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KIND_NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(k, _)| *k)
            .ok_or_else(|| AutodiffError::UnregisteredOp(s.to_string()))
    }
}

impl Op {
    pub fn kind(&self) -> Option<OpKind> {
        Some(match self {
            Op::Leaf => return None,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Scale(..) => OpKind::Scale,
            Op::Unary(..) => OpKind::Unary,
            Op::Bilinear(..) => OpKind::Bilinear,
            Op::EquiJoin(..) => OpKind::EquiJoin,
            Op::Inner(..) => OpKind::Inner,
            Op::EquiLinear { .. } => OpKind::EquiLinear,
            Op::Dense { .. } => OpKind::Dense,
            Op::ScalarBlade(..) => OpKind::ScalarBlade,
            Op::ToScalarBlade(..) => OpKind::ToScalarBlade,
            Op::Gelu(..) => OpKind::Gelu,
            Op::GatedGelu(..) => OpKind::GatedGelu,
            Op::MvLayerNorm(..) => OpKind::MvLayerNorm,
            Op::LayerNorm(..) => OpKind::LayerNorm,
            Op::AttentionWeights { .. } => OpKind::AttentionWeights,
            Op::AttentionApply { .. } => OpKind::AttentionApply,
            Op::Rotary { .. } => OpKind::Rotary,
            Op::Permute(..) => OpKind::Permute,
            Op::Reshape(..) => OpKind::Reshape,
            Op::Concat(..) => OpKind::Concat,
            Op::Slice { .. } => OpKind::Slice,
            Op::SquaredError(..) => OpKind::SquaredError,
            Op::Sum(..) => OpKind::Sum,
            Op::ExtractPoint(..) => OpKind::ExtractPoint,
        })
    }

    pub fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Bilinear(_, a, b) | Op::Inner(a, b) | Op::SquaredError(a, b) => {
                vec![*a, *b]
            }
            Op::EquiJoin(a, b, r) => vec![*a, *b, *r],
            Op::Scale(a, _)
            | Op::Unary(_, a)
            | Op::ScalarBlade(a)
            | Op::ToScalarBlade(a)
            | Op::Gelu(a)
            | Op::GatedGelu(a)
            | Op::MvLayerNorm(a, _)
            | Op::LayerNorm(a, _)
            | Op::Permute(a, _)
            | Op::Reshape(a, _)
            | Op::Sum(a)
            | Op::ExtractPoint(a) => vec![*a],
            Op::Rotary { x, .. } | Op::Slice { x, .. } => vec![*x],
            Op::EquiLinear { x, w, bias } | Op::Dense { x, w, bias } => {
                let mut v = vec![*x, *w];
                v.extend(bias);
                v
            }
            Op::AttentionWeights { qm, km, qs, ks } => vec![*qm, *km, *qs, *ks],
            Op::AttentionApply { w, v } => vec![*w, *v],
            Op::Concat(xs, _) => xs.clone(),
        }
    }

    /// Output shape given the input shapes (in [`Op::inputs`] order).
    pub(crate) fn infer_shape(&self, s: &[&[usize]]) -> Result<Vec<usize>, AutodiffError> {
        let name = self.kind().map(|k| k.name()).unwrap_or("leaf");
        let err = |msg: String| shape_err(name, msg);
        let last16 = |sh: &[usize]| -> Result<(), AutodiffError> {
            if sh.last() != Some(&N_BLADES) {
                return Err(err(format!("expected trailing axis 16, got {sh:?}")));
            }
            Ok(())
        };
        let same = |a: &[usize], b: &[usize]| -> Result<(), AutodiffError> {
            if a != b {
                return Err(err(format!("operand shapes {a:?} and {b:?} differ")));
            }
            Ok(())
        };
        match self {
            Op::Leaf => unreachable!("leaves carry their own shape"),
            Op::Add(..) | Op::Sub(..) => {
                same(s[0], s[1])?;
                Ok(s[0].to_vec())
            }
            Op::Scale(..) | Op::Gelu(..) => Ok(s[0].to_vec()),
            Op::Unary(..) | Op::GatedGelu(..) => {
                last16(s[0])?;
                Ok(s[0].to_vec())
            }
            Op::Bilinear(..) => {
                same(s[0], s[1])?;
                last16(s[0])?;
                Ok(s[0].to_vec())
            }
            Op::EquiJoin(..) => {
                same(s[0], s[1])?;
                last16(s[0])?;
                if s[2].len() != 2 || s[2][1] != N_BLADES || s[0].first() != Some(&s[2][0]) {
                    return Err(err(format!("reference {:?} does not match operand {:?}", s[2], s[0])));
                }
                Ok(s[0].to_vec())
            }
            Op::Inner(..) => {
                same(s[0], s[1])?;
                last16(s[0])?;
                Ok(s[0][..s[0].len() - 1].to_vec())
            }
            Op::EquiLinear { bias, .. } => {
                let (x, w) = (s[0], s[1]);
                last16(x)?;
                if x.len() < 2 || w.len() != 3 || w[2] != N_BASIS_MAPS || w[1] != x[x.len() - 2] {
                    return Err(err(format!("input {x:?} incompatible with weights {w:?}")));
                }
                if bias.is_some() && s[2] != [w[0]] {
                    return Err(err(format!("bias {:?} for {} outputs", s[2], w[0])));
                }
                let mut out = x.to_vec();
                let n = out.len();
                out[n - 2] = w[0];
                Ok(out)
            }
            Op::Dense { bias, .. } => {
                let (x, w) = (s[0], s[1]);
                if x.is_empty() || w.len() != 2 || w[1] != x[x.len() - 1] {
                    return Err(err(format!("input {x:?} incompatible with weights {w:?}")));
                }
                if bias.is_some() && s[2] != [w[0]] {
                    return Err(err(format!("bias {:?} for {} outputs", s[2], w[0])));
                }
                let mut out = x.to_vec();
                let n = out.len();
                out[n - 1] = w[0];
                Ok(out)
            }
            Op::ScalarBlade(..) | Op::ExtractPoint(..) => {
                last16(s[0])?;
                let mut out = s[0][..s[0].len() - 1].to_vec();
                if matches!(self, Op::ExtractPoint(..)) {
                    out.push(3);
                }
                Ok(out)
            }
            Op::ToScalarBlade(..) => {
                let mut out = s[0].to_vec();
                out.push(N_BLADES);
                Ok(out)
            }
            Op::MvLayerNorm(..) => {
                last16(s[0])?;
                if s[0].len() < 2 || s[0][s[0].len() - 2] == 0 {
                    return Err(err("needs at least one channel".into()));
                }
                Ok(s[0].to_vec())
            }
            Op::LayerNorm(..) => {
                if s[0].last().copied().unwrap_or(0) == 0 {
                    return Err(err("needs a nonempty trailing axis".into()));
                }
                Ok(s[0].to_vec())
            }
            Op::AttentionWeights { .. } => {
                let (qm, km, qs, ks) = (s[0], s[1], s[2], s[3]);
                let ok = qm.len() == 4
                    && km.len() == 4
                    && qs.len() == 3
                    && ks.len() == 3
                    && qm[3] == N_BLADES
                    && km[3] == N_BLADES
                    && qm[0] == km[0]
                    && qm[2] == km[2]
                    && qs[0] == qm[0]
                    && ks[0] == km[0]
                    && qs[1] == qm[1]
                    && ks[1] == km[1]
                    && qs[2] == ks[2]
                    && qm[2] + qs[2] > 0;
                if !ok {
                    return Err(err(format!("incompatible operands {qm:?} {km:?} {qs:?} {ks:?}")));
                }
                Ok(vec![qm[0], qm[1], km[1]])
            }
            Op::AttentionApply { .. } => {
                let (w, v) = (s[0], s[1]);
                if w.len() != 3 || v.len() < 2 || v[0] != w[0] || v[1] != w[2] {
                    return Err(err(format!("weights {w:?} incompatible with values {v:?}")));
                }
                let mut out = v.to_vec();
                out[1] = w[1];
                Ok(out)
            }
            Op::Rotary { positions, .. } => {
                let x = s[0];
                if x.len() != 3 || x[1] != positions.len() || !x[2].is_multiple_of(2) {
                    return Err(err(format!(
                        "input {x:?} needs shape [g, {}, even]",
                        positions.len()
                    )));
                }
                Ok(x.to_vec())
            }
            Op::Permute(_, perm) => {
                let x = s[0];
                let mut seen = vec![false; x.len()];
                if perm.len() != x.len() || perm.iter().any(|&p| p >= x.len() || std::mem::replace(&mut seen[p], true)) {
                    return Err(err(format!("{perm:?} is not a permutation of {} axes", x.len())));
                }
                Ok(perm.iter().map(|&p| x[p]).collect())
            }
            Op::Reshape(_, shape) => {
                if numel(shape) != numel(s[0]) {
                    return Err(err(format!("cannot reshape {:?} into {shape:?}", s[0])));
                }
                Ok(shape.clone())
            }
            Op::Concat(_, axis) => {
                let first = s.first().ok_or_else(|| err("nothing to concatenate".into()))?;
                if *axis >= first.len() {
                    return Err(err(format!("axis {axis} out of range for {first:?}")));
                }
                let mut out = first.to_vec();
                out[*axis] = 0;
                for sh in s {
                    let compatible = sh.len() == first.len()
                        && sh.iter().zip(first.iter()).enumerate().all(|(i, (a, b))| i == *axis || a == b);
                    if !compatible {
                        return Err(err(format!("{sh:?} does not match {first:?} off axis {axis}")));
                    }
                    out[*axis] += sh[*axis];
                }
                Ok(out)
            }
            Op::Slice { axis, start, len, .. } => {
                let x = s[0];
                if *axis >= x.len() || start + len > x[*axis] {
                    return Err(err(format!("slice {start}..{} of axis {axis} in {x:?}", start + len)));
                }
                let mut out = x.to_vec();
                out[*axis] = *len;
                Ok(out)
            }
            Op::SquaredError(..) => {
                same(s[0], s[1])?;
                if s[0].is_empty() || numel(s[0]) == 0 {
                    return Err(err("empty operands".into()));
                }
                Ok(vec![])
            }
            Op::Sum(..) => Ok(vec![]),
        }
    }
}

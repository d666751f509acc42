use super::error::{shape_err, AutodiffError};
use super::numel;
use super::op::Op;
use crate::equi::{
    attention_apply, attention_apply_backward, attention_weights, attention_weights_backward, bilinear_backward,
    bilinear_forward, dense_backward, dense_forward, equi_join_backward, equi_join_forward, equi_linear_backward,
    equi_linear_forward, gated_gelu_backward, gated_gelu_forward, gelu, gelu_grad, layer_norm_backward,
    layer_norm_forward, mv_layer_norm_backward, mv_layer_norm_forward, rotary_apply, AttnShape,
};
use crate::ga::tables::{Term, GP_TERMS, JOIN_TERMS, WEDGE_TERMS};
use crate::ga::{blade, Product, N_BLADES};
use crate::Real;

/// Handle to a node of a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Smallest magnitude of the homogeneous coordinate used when extracting
/// points inside a graph.
pub const EXTRACT_CLAMP: f64 = 1e-3;

#[derive(Clone, Debug)]
struct Node<T> {
    op: Op,
    shape: Vec<usize>,
    value: Vec<T>,
    requires_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    evaluated: bool,
    grads: Vec<Option<Vec<T>>>,
}

fn product_terms(p: Product) -> &'static [Term] {
    match p {
        Product::Geometric => &GP_TERMS,
        Product::Wedge => &WEDGE_TERMS,
        Product::Join => &JOIN_TERMS,
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Returns `x` (of `shape`) with axes reordered so output axis `i` is input axis `perm[i]`.
fn permute<T: Real>(x: &[T], shape: &[usize], perm: &[usize]) -> Vec<T> {
    // Trailing axes that stay in place are copied as contiguous blocks.
    let mut keep = perm.len();
    while keep > 0 && perm[keep - 1] == keep - 1 {
        keep -= 1;
    }
    let block = numel(&shape[keep..]);
    if keep == 0 || block == 0 {
        return x.to_vec();
    }
    let in_strides = strides(&shape[..keep]);
    let out_shape: Vec<usize> = perm[..keep].iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm[..keep].iter().map(|&p| in_strides[p] * block).collect();
    let mut out = Vec::with_capacity(x.len());
    let mut idx = vec![0usize; keep];
    let mut src = 0usize;
    for _ in 0..x.len() / block {
        out.extend_from_slice(&x[src..src + block]);
        for a in (0..keep).rev() {
            idx[a] += 1;
            src += src_strides[a];
            if idx[a] < out_shape[a] {
                break;
            }
            src -= src_strides[a] * out_shape[a];
            idx[a] = 0;
        }
    }
    out
}

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    (numel(&shape[..axis]), numel(&shape[axis + 1..]))
}

fn extract_denominator<T: Real>(d: T) -> T {
    let clamp = T::from_f64(EXTRACT_CLAMP);
    if d.abs() >= clamp {
        d
    } else if d < T::zero() {
        -clamp
    } else {
        clamp
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            evaluated: false,
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push_leaf(&mut self, shape: &[usize], data: Vec<T>, requires_grad: bool) -> Result<Var, AutodiffError> {
        if data.len() != numel(shape) {
            return Err(shape_err(
                "leaf",
                format!("{} values for shape {shape:?}", data.len()),
            ));
        }
        self.nodes.push(Node {
            op: Op::Leaf,
            shape: shape.to_vec(),
            value: data,
            requires_grad,
        });
        self.evaluated = false;
        Ok(Var(self.nodes.len() - 1))
    }

    /// Constant input (no gradient is accumulated for it).
    pub fn input(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var, AutodiffError> {
        self.push_leaf(shape, data, false)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var, AutodiffError> {
        self.push_leaf(shape, data, true)
    }

    /// Replaces the contents of a leaf; the graph must be re-run.
    pub fn set_leaf(&mut self, v: Var, data: &[T]) -> Result<(), AutodiffError> {
        let node = &mut self.nodes[v.0];
        if node.op != Op::Leaf {
            return Err(AutodiffError::NotALeaf(v.0));
        }
        if data.len() != node.value.len() {
            return Err(shape_err(
                "leaf",
                format!("{} values for shape {:?}", data.len(), node.shape),
            ));
        }
        node.value.copy_from_slice(data);
        self.evaluated = false;
        Ok(())
    }

    /// Adds a node; its value is computed by the next [`Tape::forward`].
    pub fn record(&mut self, op: Op) -> Result<Var, AutodiffError> {
        if op == Op::Leaf {
            return Err(shape_err("leaf", "leaves are created with `input` or `param`"));
        }
        let inputs = op.inputs();
        if let Some(bad) = inputs.iter().find(|v| v.0 >= self.nodes.len()) {
            return Err(shape_err("record", format!("unknown node {}", bad.0)));
        }
        let shapes: Vec<&[usize]> = inputs.iter().map(|v| self.nodes[v.0].shape.as_slice()).collect();
        let shape = op.infer_shape(&shapes)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            shape,
            value: Vec::new(),
            requires_grad,
        });
        self.evaluated = false;
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn op(&self, v: Var) -> &Op {
        &self.nodes[v.0].op
    }

    pub fn value(&self, v: Var) -> Result<&[T], AutodiffError> {
        let node = &self.nodes[v.0];
        if node.op != Op::Leaf && !self.evaluated {
            return Err(AutodiffError::NotEvaluated(v.0));
        }
        Ok(&node.value)
    }

    /// Scalar value of a zero-rank node.
    pub fn scalar(&self, v: Var) -> Result<T, AutodiffError> {
        let value = self.value(v)?;
        if !self.nodes[v.0].shape.is_empty() {
            return Err(AutodiffError::NotScalar(self.nodes[v.0].shape.clone()));
        }
        Ok(value[0])
    }

    /// Evaluates every recorded node in order.
    pub fn forward(&mut self) -> Result<(), AutodiffError> {
        for i in 0..self.nodes.len() {
            if self.nodes[i].op == Op::Leaf {
                continue;
            }
            let value = self.compute(i);
            self.nodes[i].value = value;
        }
        self.evaluated = true;
        self.grads.clear();
        Ok(())
    }

    /// Gradient of the scalar `out` with respect to every differentiable node.
    pub fn backward(&mut self, out: Var) -> Result<(), AutodiffError> {
        if !self.evaluated {
            return Err(AutodiffError::BackwardBeforeForward);
        }
        if !self.nodes[out.0].shape.is_empty() {
            return Err(AutodiffError::NotScalar(self.nodes[out.0].shape.clone()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(vec![T::one()]);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].op != Op::Leaf && self.nodes[i].requires_grad {
                self.backprop(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    /// Gradient from the last [`Tape::backward`], if the node received one.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn val(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    fn shp(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    fn compute(&self, i: usize) -> Vec<T> {
        let node = &self.nodes[i];
        let n = numel(&node.shape);
        let mut out = vec![T::zero(); n];
        match &node.op {
            Op::Leaf => unreachable!(),
            Op::Add(a, b) => {
                for ((o, x), y) in out.iter_mut().zip(self.val(*a)).zip(self.val(*b)) {
                    *o = *x + *y;
                }
            }
            Op::Sub(a, b) => {
                for ((o, x), y) in out.iter_mut().zip(self.val(*a)).zip(self.val(*b)) {
                    *o = *x - *y;
                }
            }
            Op::Scale(a, c) => {
                let c = T::from_f64(*c);
                for (o, x) in out.iter_mut().zip(self.val(*a)) {
                    *o = *x * c;
                }
            }
            Op::Unary(u, a) => {
                let entries = u.entries();
                for (o, x) in out.chunks_exact_mut(N_BLADES).zip(self.val(*a).chunks_exact(N_BLADES)) {
                    for &(r, c, v) in &entries {
                        o[r] += T::from_f64(v) * x[c];
                    }
                }
            }
            Op::Bilinear(p, a, b) => bilinear_forward(product_terms(*p), self.val(*a), self.val(*b), &mut out),
            Op::EquiJoin(a, b, r) => equi_join_forward(self.val(*a), self.val(*b), self.val(*r), &mut out),
            Op::Inner(a, b) => {
                for ((o, x), y) in out
                    .iter_mut()
                    .zip(self.val(*a).chunks_exact(N_BLADES))
                    .zip(self.val(*b).chunks_exact(N_BLADES))
                {
                    *o = blade::EUCLIDEAN.iter().map(|&k| x[k] * y[k]).sum();
                }
            }
            Op::EquiLinear { x, w, bias } => {
                let ws = self.shp(*w);
                equi_linear_forward(
                    self.val(*x),
                    ws[1],
                    self.val(*w),
                    bias.map(|b| self.val(b)),
                    ws[0],
                    &mut out,
                );
            }
            Op::Dense { x, w, bias } => {
                let ws = self.shp(*w);
                dense_forward(self.val(*x), ws[1], self.val(*w), bias.map(|b| self.val(b)), ws[0], &mut out);
            }
            Op::ScalarBlade(a) => {
                for (o, x) in out.iter_mut().zip(self.val(*a).chunks_exact(N_BLADES)) {
                    *o = x[0];
                }
            }
            Op::ToScalarBlade(a) => {
                for (o, x) in out.chunks_exact_mut(N_BLADES).zip(self.val(*a)) {
                    o[0] = *x;
                }
            }
            Op::Gelu(a) => {
                for (o, x) in out.iter_mut().zip(self.val(*a)) {
                    *o = gelu(*x);
                }
            }
            Op::GatedGelu(a) => gated_gelu_forward(self.val(*a), &mut out),
            Op::MvLayerNorm(a, eps) => {
                let s = self.shp(*a);
                mv_layer_norm_forward(self.val(*a), s[s.len() - 2], T::from_f64(*eps), &mut out);
            }
            Op::LayerNorm(a, eps) => {
                let s = self.shp(*a);
                layer_norm_forward(self.val(*a), s[s.len() - 1], T::from_f64(*eps), &mut out);
            }
            Op::AttentionWeights { qm, km, qs, ks } => {
                let shape = self.attn_shape(*qm, *km, *qs);
                attention_weights(shape, self.val(*qm), self.val(*km), self.val(*qs), self.val(*ks), &mut out);
            }
            Op::AttentionApply { w, v } => {
                let (ws, vs) = (self.shp(*w), self.shp(*v));
                let feat = numel(&vs[2..]);
                attention_apply(ws[0], ws[1], ws[2], feat, self.val(*w), self.val(*v), &mut out);
            }
            Op::Rotary { x, positions, base } => {
                let d = self.shp(*x)[2];
                rotary_apply(self.val(*x), d, positions, *base, false, &mut out);
            }
            Op::Permute(a, perm) => out = permute(self.val(*a), self.shp(*a), perm),
            Op::Reshape(a, _) => out.copy_from_slice(self.val(*a)),
            Op::Concat(xs, axis) => {
                let (outer, inner) = outer_inner(&node.shape, *axis);
                let mut off = 0;
                let row = node.shape[*axis] * inner;
                for x in xs {
                    let len = self.shp(*x)[*axis] * inner;
                    let src = self.val(*x);
                    for o in 0..outer {
                        out[o * row + off..o * row + off + len].copy_from_slice(&src[o * len..(o + 1) * len]);
                    }
                    off += len;
                }
            }
            Op::Slice { x, axis, start, len } => {
                let xs = self.shp(*x);
                let (outer, inner) = outer_inner(xs, *axis);
                let src = self.val(*x);
                let row = xs[*axis] * inner;
                for o in 0..outer {
                    out[o * len * inner..(o + 1) * len * inner]
                        .copy_from_slice(&src[o * row + start * inner..o * row + (start + len) * inner]);
                }
            }
            Op::SquaredError(a, b) => {
                let s = self.shp(*a);
                let rows = T::from_usize(numel(s) / s[s.len() - 1]);
                let mut acc = T::zero();
                for (x, y) in self.val(*a).iter().zip(self.val(*b)) {
                    acc += (*x - *y) * (*x - *y);
                }
                out[0] = acc / rows;
            }
            Op::Sum(a) => out[0] = self.val(*a).iter().copied().sum(),
            Op::ExtractPoint(a) => {
                for (o, x) in out.chunks_exact_mut(3).zip(self.val(*a).chunks_exact(N_BLADES)) {
                    let d = extract_denominator(x[blade::E123]);
                    o[0] = -x[blade::E023] / d;
                    o[1] = x[blade::E013] / d;
                    o[2] = -x[blade::E012] / d;
                }
            }
        }
        out
    }

    fn attn_shape(&self, qm: Var, km: Var, qs: Var) -> AttnShape {
        let (q, k, s) = (self.shp(qm), self.shp(km), self.shp(qs));
        AttnShape {
            groups: q[0],
            nq: q[1],
            nk: k[1],
            c_mv: q[2],
            c_s: s[2],
        }
    }

    fn backprop(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        // Takes the accumulator of `v` out of `grads` (zero-initialized).
        let take = |grads: &mut [Option<Vec<T>>], v: Var| -> Vec<T> {
            grads[v.0]
                .take()
                .unwrap_or_else(|| vec![T::zero(); numel(&self.nodes[v.0].shape)])
        };
        macro_rules! with_grad {
            ($v:expr, |$acc:ident| $body:block) => {
                if needs($v) {
                    let mut $acc = take(grads, $v);
                    $body
                    grads[$v.0] = Some($acc);
                }
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -T::one() } else { T::one() };
                with_grad!(*a, |acc| {
                    for (d, x) in acc.iter_mut().zip(g) {
                        *d += *x;
                    }
                });
                with_grad!(*b, |acc| {
                    for (d, x) in acc.iter_mut().zip(g) {
                        *d += sign * *x;
                    }
                });
            }
            Op::Scale(a, c) => {
                let c = T::from_f64(*c);
                with_grad!(*a, |acc| {
                    for (d, x) in acc.iter_mut().zip(g) {
                        *d += c * *x;
                    }
                });
            }
            Op::Unary(u, a) => {
                let entries = u.entries();
                with_grad!(*a, |acc| {
                    for (d, x) in acc.chunks_exact_mut(N_BLADES).zip(g.chunks_exact(N_BLADES)) {
                        for &(r, c, v) in &entries {
                            d[c] += T::from_f64(v) * x[r];
                        }
                    }
                });
            }
            Op::Bilinear(p, a, b) => {
                let terms = product_terms(*p);
                let (xa, xb) = (self.val(*a), self.val(*b));
                if a == b {
                    with_grad!(*a, |acc| {
                        bilinear_backward(terms, xa, xb, g, Some(&mut acc), None);
                        bilinear_backward(terms, xa, xb, g, None, Some(&mut acc));
                    });
                } else {
                    let mut ga = needs(*a).then(|| take(grads, *a));
                    let mut gb = needs(*b).then(|| take(grads, *b));
                    bilinear_backward(terms, xa, xb, g, ga.as_deref_mut(), gb.as_deref_mut());
                    if let Some(ga) = ga {
                        grads[a.0] = Some(ga);
                    }
                    if let Some(gb) = gb {
                        grads[b.0] = Some(gb);
                    }
                }
            }
            Op::EquiJoin(a, b, r) => {
                let (xa, xb, xr) = (self.val(*a), self.val(*b), self.val(*r));
                for (k, v) in [*a, *b, *r].into_iter().enumerate() {
                    with_grad!(v, |acc| {
                        let slot = Some(acc.as_mut_slice());
                        match k {
                            0 => equi_join_backward(xa, xb, xr, g, slot, None, None),
                            1 => equi_join_backward(xa, xb, xr, g, None, slot, None),
                            _ => equi_join_backward(xa, xb, xr, g, None, None, slot),
                        }
                    });
                }
            }
            Op::Inner(a, b) => {
                let (xa, xb) = (self.val(*a), self.val(*b));
                for (v, other) in [(*a, xb), (*b, xa)] {
                    with_grad!(v, |acc| {
                        for ((d, o), gv) in acc.chunks_exact_mut(N_BLADES).zip(other.chunks_exact(N_BLADES)).zip(g) {
                            for &k in &blade::EUCLIDEAN {
                                d[k] += *gv * o[k];
                            }
                        }
                    });
                }
            }
            Op::EquiLinear { x, w, bias } => {
                let ws = self.shp(*w);
                let (c_out, c_in) = (ws[0], ws[1]);
                let (xv, wv) = (self.val(*x), self.val(*w));
                with_grad!(*x, |acc| {
                    equi_linear_backward(xv, c_in, wv, c_out, g, Some(&mut acc), None, None);
                });
                with_grad!(*w, |acc| {
                    equi_linear_backward(xv, c_in, wv, c_out, g, None, Some(&mut acc), None);
                });
                if let Some(b) = bias {
                    with_grad!(*b, |acc| {
                        equi_linear_backward(xv, c_in, wv, c_out, g, None, None, Some(&mut acc));
                    });
                }
            }
            Op::Dense { x, w, bias } => {
                let ws = self.shp(*w);
                let (n_out, n_in) = (ws[0], ws[1]);
                let (xv, wv) = (self.val(*x), self.val(*w));
                with_grad!(*x, |acc| {
                    dense_backward(xv, n_in, wv, n_out, g, Some(&mut acc), None, None);
                });
                with_grad!(*w, |acc| {
                    dense_backward(xv, n_in, wv, n_out, g, None, Some(&mut acc), None);
                });
                if let Some(b) = bias {
                    with_grad!(*b, |acc| {
                        dense_backward(xv, n_in, wv, n_out, g, None, None, Some(&mut acc));
                    });
                }
            }
            Op::ScalarBlade(a) => with_grad!(*a, |acc| {
                for (d, x) in acc.chunks_exact_mut(N_BLADES).zip(g) {
                    d[0] += *x;
                }
            }),
            Op::ToScalarBlade(a) => with_grad!(*a, |acc| {
                for (d, x) in acc.iter_mut().zip(g.chunks_exact(N_BLADES)) {
                    *d += x[0];
                }
            }),
            Op::Gelu(a) => {
                let xv = self.val(*a);
                with_grad!(*a, |acc| {
                    for ((d, x), gv) in acc.iter_mut().zip(xv).zip(g) {
                        *d += *gv * gelu_grad(*x);
                    }
                });
            }
            Op::GatedGelu(a) => {
                let xv = self.val(*a);
                with_grad!(*a, |acc| { gated_gelu_backward(xv, g, &mut acc); });
            }
            Op::MvLayerNorm(a, eps) => {
                let s = self.shp(*a);
                let c = s[s.len() - 2];
                let xv = self.val(*a);
                with_grad!(*a, |acc| { mv_layer_norm_backward(xv, c, T::from_f64(*eps), g, &mut acc); });
            }
            Op::LayerNorm(a, eps) => {
                let s = self.shp(*a);
                let n = s[s.len() - 1];
                let xv = self.val(*a);
                with_grad!(*a, |acc| { layer_norm_backward(xv, n, T::from_f64(*eps), g, &mut acc); });
            }
            Op::AttentionWeights { qm, km, qs, ks } => {
                let shape = self.attn_shape(*qm, *km, *qs);
                let vars = [*qm, *km, *qs, *ks];
                let mut accs: Vec<Vec<T>> = vars.iter().map(|v| take(grads, *v)).collect();
                let [gqm, gkm, gqs, gks] = &mut accs[..] else { unreachable!() };
                attention_weights_backward(
                    shape,
                    self.val(*qm),
                    self.val(*km),
                    self.val(*qs),
                    self.val(*ks),
                    &node.value,
                    g,
                    gqm,
                    gkm,
                    gqs,
                    gks,
                );
                for (v, acc) in vars.into_iter().zip(accs) {
                    if needs(v) {
                        grads[v.0] = Some(acc);
                    }
                }
            }
            Op::AttentionApply { w, v } => {
                let (ws, vs) = (self.shp(*w), self.shp(*v));
                let feat = numel(&vs[2..]);
                let (wv, vv) = (self.val(*w), self.val(*v));
                let mut gw = needs(*w).then(|| take(grads, *w));
                let mut gv = needs(*v).then(|| take(grads, *v));
                attention_apply_backward(ws[0], ws[1], ws[2], feat, wv, vv, g, gw.as_deref_mut(), gv.as_deref_mut());
                if let Some(gw) = gw {
                    grads[w.0] = Some(gw);
                }
                if let Some(gv) = gv {
                    grads[v.0] = Some(gv);
                }
            }
            Op::Rotary { x, positions, base } => {
                let d = self.shp(*x)[2];
                with_grad!(*x, |acc| {
                    let mut back = vec![T::zero(); g.len()];
                    rotary_apply(g, d, positions, *base, true, &mut back);
                    for (a, b) in acc.iter_mut().zip(back) {
                        *a += b;
                    }
                });
            }
            Op::Permute(a, perm) => with_grad!(*a, |acc| {
                let mut inverse = vec![0; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inverse[p] = i;
                }
                let back = permute(g, &node.shape, &inverse);
                for (d, b) in acc.iter_mut().zip(back) {
                    *d += b;
                }
            }),
            Op::Reshape(a, _) => with_grad!(*a, |acc| {
                for (d, b) in acc.iter_mut().zip(g) {
                    *d += *b;
                }
            }),
            Op::Concat(xs, axis) => {
                let (outer, inner) = outer_inner(&node.shape, *axis);
                let row = node.shape[*axis] * inner;
                let mut off = 0;
                for x in xs {
                    let len = self.shp(*x)[*axis] * inner;
                    with_grad!(*x, |acc| {
                        for o in 0..outer {
                            for (d, b) in acc[o * len..(o + 1) * len].iter_mut().zip(&g[o * row + off..o * row + off + len]) {
                                *d += *b;
                            }
                        }
                    });
                    off += len;
                }
            }
            Op::Slice { x, axis, start, len } => {
                let xs = self.shp(*x).to_vec();
                let (outer, inner) = outer_inner(&xs, *axis);
                let row = xs[*axis] * inner;
                with_grad!(*x, |acc| {
                    for o in 0..outer {
                        let dst = &mut acc[o * row + start * inner..o * row + (start + len) * inner];
                        for (d, b) in dst.iter_mut().zip(&g[o * len * inner..(o + 1) * len * inner]) {
                            *d += *b;
                        }
                    }
                });
            }
            Op::SquaredError(a, b) => {
                let s = self.shp(*a);
                let rows = T::from_usize(numel(s) / s[s.len() - 1]);
                let scale = T::from_f64(2.0) * g[0] / rows;
                let (xa, xb) = (self.val(*a), self.val(*b));
                with_grad!(*a, |acc| {
                    for ((d, x), y) in acc.iter_mut().zip(xa).zip(xb) {
                        *d += scale * (*x - *y);
                    }
                });
                with_grad!(*b, |acc| {
                    for ((d, x), y) in acc.iter_mut().zip(xa).zip(xb) {
                        *d -= scale * (*x - *y);
                    }
                });
            }
            Op::Sum(a) => with_grad!(*a, |acc| {
                for d in acc.iter_mut() {
                    *d += g[0];
                }
            }),
            Op::ExtractPoint(a) => {
                let xv = self.val(*a);
                let clamp = T::from_f64(EXTRACT_CLAMP);
                with_grad!(*a, |acc| {
                    for ((d, x), gv) in acc.chunks_exact_mut(N_BLADES).zip(xv.chunks_exact(N_BLADES)).zip(g.chunks_exact(3)) {
                        let den = extract_denominator(x[blade::E123]);
                        let inv = T::one() / den;
                        d[blade::E023] -= gv[0] * inv;
                        d[blade::E013] += gv[1] * inv;
                        d[blade::E012] -= gv[2] * inv;
                        if x[blade::E123].abs() >= clamp {
                            let num = -gv[0] * x[blade::E023] + gv[1] * x[blade::E013] - gv[2] * x[blade::E012];
                            d[blade::E123] -= num * inv * inv;
                        }
                    }
                });
            }
        }
    }
}

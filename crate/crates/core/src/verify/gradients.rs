use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::equivariance::{body_inputs, test_versors};
use super::{rel_error, Property, VerifyOptions};
use crate::autodiff::{AutodiffError, Op, OpKind, Tape, Unary, Var};
use crate::equi::LAYER_NORM_EPS;
use crate::ga::{blade, Product, N_BLADES};
use crate::model::layers::{block, Axis, Stream, VarMap};
use crate::model::{init_params, GatrConfig, GatrGraph, ModelError};

const STEP: f64 = 1e-5;

fn randn(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Vec<f64> {
    let n: usize = shape.iter().product();
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn leaf(tape: &mut Tape<f64>, rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Result<Var, AutodiffError> {
    let data = randn(rng, shape, scale);
    tape.param(shape, data)
}

/// Records one random instance of `kind`; returns its output and the
/// differentiable leaves. `i` selects variants and degenerate regimes.
fn instance(kind: OpKind, i: usize, tape: &mut Tape<f64>, rng: &mut ChaCha8Rng) -> Result<(Var, Vec<Var>), AutodiffError> {
    let mv = [2, 3, N_BLADES];
    let (out, leaves) = match kind {
        OpKind::Add | OpKind::Sub => {
            let a = leaf(tape, rng, &[2, 5], 1.0)?;
            let b = leaf(tape, rng, &[2, 5], 1.0)?;
            let op = if kind == OpKind::Add { Op::Add(a, b) } else { Op::Sub(a, b) };
            (tape.record(op)?, vec![a, b])
        }
        OpKind::Scale => {
            let a = leaf(tape, rng, &[7], 1.0)?;
            (tape.record(Op::Scale(a, -1.7))?, vec![a])
        }
        OpKind::Unary => {
            let u = [
                Unary::Reverse,
                Unary::GradeInvolution,
                Unary::GradeProjection(i % 5),
                Unary::Dual,
                Unary::DualInverse,
                Unary::E0Mul,
            ][i % 6];
            let a = leaf(tape, rng, &mv, 1.0)?;
            (tape.record(Op::Unary(u, a))?, vec![a])
        }
        OpKind::Bilinear => {
            let p = [Product::Geometric, Product::Wedge, Product::Join][i % 3];
            let a = leaf(tape, rng, &mv, 1.0)?;
            let b = leaf(tape, rng, &mv, 1.0)?;
            (tape.record(Op::Bilinear(p, a, b))?, vec![a, b])
        }
        OpKind::EquiJoin => {
            let a = leaf(tape, rng, &mv, 1.0)?;
            let b = leaf(tape, rng, &mv, 1.0)?;
            let r = leaf(tape, rng, &[2, N_BLADES], 1.0)?;
            (tape.record(Op::EquiJoin(a, b, r))?, vec![a, b, r])
        }
        OpKind::Inner => {
            let a = leaf(tape, rng, &mv, 1.0)?;
            let b = leaf(tape, rng, &mv, 1.0)?;
            (tape.record(Op::Inner(a, b))?, vec![a, b])
        }
        OpKind::EquiLinear => {
            let x = leaf(tape, rng, &mv, 1.0)?;
            let w = leaf(tape, rng, &[2, 3, 9], 0.5)?;
            let bias = if i.is_multiple_of(2) { Some(leaf(tape, rng, &[2], 1.0)?) } else { None };
            let out = tape.record(Op::EquiLinear { x, w, bias })?;
            (out, [vec![x, w], bias.into_iter().collect()].concat())
        }
        OpKind::Dense => {
            let x = leaf(tape, rng, &[3, 4], 1.0)?;
            let w = leaf(tape, rng, &[2, 4], 0.5)?;
            let bias = if i.is_multiple_of(2) { Some(leaf(tape, rng, &[2], 1.0)?) } else { None };
            let out = tape.record(Op::Dense { x, w, bias })?;
            (out, [vec![x, w], bias.into_iter().collect()].concat())
        }
        OpKind::ScalarBlade => {
            let a = leaf(tape, rng, &mv, 1.0)?;
            (tape.record(Op::ScalarBlade(a))?, vec![a])
        }
        OpKind::ToScalarBlade => {
            let a = leaf(tape, rng, &[2, 3], 1.0)?;
            (tape.record(Op::ToScalarBlade(a))?, vec![a])
        }
        OpKind::Gelu => {
            let a = leaf(tape, rng, &[3, 4], 2.0)?;
            (tape.record(Op::Gelu(a))?, vec![a])
        }
        OpKind::GatedGelu => {
            let a = leaf(tape, rng, &mv, 2.0)?;
            (tape.record(Op::GatedGelu(a))?, vec![a])
        }
        OpKind::MvLayerNorm => {
            // Odd instances are almost purely ideal, so the invariant norm is tiny.
            let mut data = randn(rng, &mv, 1.0);
            if i % 2 == 1 {
                for (k, v) in data.iter_mut().enumerate() {
                    if blade::EUCLIDEAN.contains(&(k % N_BLADES)) {
                        *v *= 1e-2;
                    }
                }
            }
            let a = tape.param(&mv, data)?;
            (tape.record(Op::MvLayerNorm(a, LAYER_NORM_EPS))?, vec![a])
        }
        OpKind::LayerNorm => {
            let mut data = randn(rng, &[3, 5], 1.0);
            if i % 2 == 1 {
                for v in data.iter_mut() {
                    *v = 3.0 + 1e-2 * *v;
                }
            }
            let a = tape.param(&[3, 5], data)?;
            (tape.record(Op::LayerNorm(a, LAYER_NORM_EPS))?, vec![a])
        }
        OpKind::AttentionWeights => {
            // Odd instances have large logits and a nearly one-hot softmax.
            let scale = if i % 2 == 1 { 3.0 } else { 0.7 };
            let qm = leaf(tape, rng, &[2, 3, 2, N_BLADES], scale)?;
            let km = leaf(tape, rng, &[2, 4, 2, N_BLADES], scale)?;
            let qs = leaf(tape, rng, &[2, 3, 3], scale)?;
            let ks = leaf(tape, rng, &[2, 4, 3], scale)?;
            (tape.record(Op::AttentionWeights { qm, km, qs, ks })?, vec![qm, km, qs, ks])
        }
        OpKind::AttentionApply => {
            let w = leaf(tape, rng, &[2, 3, 4], 1.0)?;
            let v = leaf(tape, rng, &[2, 4, 2, N_BLADES], 1.0)?;
            (tape.record(Op::AttentionApply { w, v })?, vec![w, v])
        }
        OpKind::Rotary => {
            let x = leaf(tape, rng, &[2, 4, 6], 1.0)?;
            let positions: Vec<f64> = (0..4).map(|p| p as f64 + rng.random::<f64>()).collect();
            (tape.record(Op::Rotary { x, positions, base: 10.0 })?, vec![x])
        }
        OpKind::Permute => {
            let x = leaf(tape, rng, &[2, 3, 4], 1.0)?;
            (tape.record(Op::Permute(x, vec![2, 0, 1]))?, vec![x])
        }
        OpKind::Reshape => {
            let x = leaf(tape, rng, &[2, 6], 1.0)?;
            (tape.record(Op::Reshape(x, vec![3, 4]))?, vec![x])
        }
        OpKind::Concat => {
            let a = leaf(tape, rng, &[2, 3], 1.0)?;
            let b = leaf(tape, rng, &[2, 2], 1.0)?;
            (tape.record(Op::Concat(vec![a, b], 1))?, vec![a, b])
        }
        OpKind::Slice => {
            let x = leaf(tape, rng, &[4, 5], 1.0)?;
            (tape.record(Op::Slice { x, axis: 1, start: 1, len: 3 })?, vec![x])
        }
        OpKind::SquaredError => {
            let a = leaf(tape, rng, &[3, 4], 1.0)?;
            let b = leaf(tape, rng, &[3, 4], 1.0)?;
            (tape.record(Op::SquaredError(a, b))?, vec![a, b])
        }
        OpKind::Sum => {
            let a = leaf(tape, rng, &[3, 4], 1.0)?;
            (tape.record(Op::Sum(a))?, vec![a])
        }
        OpKind::ExtractPoint => {
            let mut data = randn(rng, &mv, 1.0);
            for m in data.chunks_exact_mut(N_BLADES) {
                m[blade::E123] = m[blade::E123].signum() * (0.5 + m[blade::E123].abs());
            }
            let a = tape.param(&mv, data)?;
            (tape.record(Op::ExtractPoint(a))?, vec![a])
        }
    };
    Ok((out, leaves))
}

/// Turns `out` into a scalar loss: itself if zero-rank, else the squared error
/// against a random target.
fn scalar_loss(tape: &mut Tape<f64>, rng: &mut ChaCha8Rng, out: Var) -> Result<Var, AutodiffError> {
    if tape.shape(out).is_empty() {
        return Ok(out);
    }
    let shape = tape.shape(out).to_vec();
    let target = tape.input(&shape, randn(rng, &shape, 1.0))?;
    tape.record(Op::SquaredError(out, target))
}

/// Normwise relative error between reverse-mode and central-difference
/// gradients of `loss` over all entries of `leaves`.
pub(crate) fn compare_gradients(tape: &mut Tape<f64>, loss: Var, leaves: &[Var]) -> Result<f64, AutodiffError> {
    tape.forward()?;
    tape.backward(loss)?;
    let mut analytic = Vec::new();
    for &v in leaves {
        let n = tape.value(v)?.len();
        match tape.grad(v) {
            Some(g) => analytic.extend_from_slice(g),
            None => analytic.extend(std::iter::repeat_n(0.0, n)),
        }
    }
    let mut numeric = Vec::with_capacity(analytic.len());
    for &v in leaves {
        let mut data = tape.value(v)?.to_vec();
        for k in 0..data.len() {
            let x0 = data[k];
            data[k] = x0 + STEP;
            tape.set_leaf(v, &data)?;
            tape.forward()?;
            let plus = tape.scalar(loss)?;
            data[k] = x0 - STEP;
            tape.set_leaf(v, &data)?;
            tape.forward()?;
            let minus = tape.scalar(loss)?;
            data[k] = x0;
            numeric.push((plus - minus) / (2.0 * STEP));
        }
        tape.set_leaf(v, &data)?;
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    Ok(if scale == 0.0 { norm(&diff) } else { norm(&diff) / scale })
}

/// Worst normwise gradient error of `kind` over `trials` random instances.
pub fn op_gradient_check(kind: OpKind, trials: usize, seed: u64) -> Result<f64, AutodiffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut worst = 0.0f64;
    for i in 0..trials {
        let mut tape = Tape::new();
        let (out, leaves) = instance(kind, i, &mut tape, &mut rng)?;
        let loss = scalar_loss(&mut tape, &mut rng, out)?;
        worst = worst.max(compare_gradients(&mut tape, loss, &leaves)?);
    }
    Ok(worst)
}

fn small_config() -> GatrConfig {
    GatrConfig {
        n_blocks: 2,
        n_mv_channels: 4,
        n_scalar_channels: 8,
        n_heads: 2,
        ..GatrConfig::desk()
    }
}

/// Gradient error of the squared output norm of one block with respect to all
/// of its parameters.
pub fn block_gradient_check(seed: u64) -> Result<f64, ModelError> {
    let config = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = init_params(&config, &mut rng);
    let mut tape = Tape::new();
    let (vars, param_vars) = VarMap::attach(&mut tape, &params)?;
    let items = 4;
    let (c, s) = (config.n_mv_channels, config.n_scalar_channels);
    let mv = tape.input(&[1, items, c, N_BLADES], randn(&mut rng, &[items * c * N_BLADES], 1.0))?;
    let sv = tape.input(&[1, items, s], randn(&mut rng, &[items * s], 1.0))?;
    let r = tape.input(&[1, N_BLADES], randn(&mut rng, &[N_BLADES], 1.0))?;
    let out = block(&mut tape, &vars, "block0", Stream { mv, s: sv }, r, config.n_heads, Axis::Items, config.rotary_base)?;
    let zm = tape.input(&[1, items, c, N_BLADES], vec![0.0; items * c * N_BLADES])?;
    let zs = tape.input(&[1, items, s], vec![0.0; items * s])?;
    let lm = tape.record(Op::SquaredError(out.mv, zm))?;
    let ls = tape.record(Op::SquaredError(out.s, zs))?;
    let loss = tape.record(Op::Add(lm, ls))?;
    let leaves: Vec<Var> = params
        .params
        .iter()
        .zip(&param_vars)
        .filter(|(p, _)| p.name.starts_with("block0."))
        .map(|(_, v)| *v)
        .collect();
    Ok(compare_gradients(&mut tape, loss, &leaves)?)
}

/// Worst relative difference between parameter gradients of an invariant loss
/// on transformed and untransformed inputs.
pub fn gradient_equivariance(trials: usize, seed: u64) -> Result<f64, ModelError> {
    let config = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = init_params(&config, &mut rng);
    let items = 4;
    let mut graph = GatrGraph::build(&config, &params, 1, None, items)?;
    let inner = graph.tape.record(Op::Inner(graph.out.mv, graph.out.mv))?;
    let lm = graph.tape.record(Op::Sum(inner))?;
    let target = graph.tape.input(&[1, items, 1], randn(&mut rng, &[items], 1.0))?;
    let ls = graph.tape.record(Op::SquaredError(graph.out.s, target))?;
    let loss = graph.tape.record(Op::Add(lm, ls))?;
    let (mv, s) = body_inputs(&mut rng, items);
    let grads = |graph: &mut GatrGraph<f64>, mv: &[f64]| -> Result<Vec<f64>, ModelError> {
        graph.set_inputs(mv, &s.data)?;
        graph.forward()?;
        graph.tape.backward(loss)?;
        Ok(params.grads(&graph.tape, &graph.param_vars).concat())
    };
    let base = grads(&mut graph, &mv.data)?;
    let mut worst = 0.0f64;
    for u in test_versors(&mut rng, trials) {
        let moved = grads(&mut graph, &mv.transform(&u).data)?;
        worst = worst.max(rel_error(&moved, &base));
    }
    Ok(worst)
}

pub fn gradient_suite(options: &VerifyOptions) -> Vec<Property> {
    let trials = options.trials_or(20);
    let mut props = Vec::new();
    for kind in OpKind::all() {
        let err = op_gradient_check(kind, trials, options.seed).unwrap_or(f64::INFINITY);
        props.push(Property::new(format!("gradient {}", kind.name()), err, options.tol(1e-6), trials));
    }
    let err = block_gradient_check(options.seed).unwrap_or(f64::INFINITY);
    props.push(Property::new("gradient gatr block (all parameters)", err, options.tol(1e-4), 1));
    let err = gradient_equivariance(trials, options.seed).unwrap_or(f64::INFINITY);
    props.push(Property::new("gradient of invariant loss is invariant", err, options.tol(1e-8), trials));
    props
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{rel_error, transform_batch, Property, VerifyOptions};
use crate::autodiff::ParamStore;
use crate::equi::{
    attention_weights, equi_linear, gated_gelu, geometric_bilinear, multi_head_attention, mv_attention, mv_layer_norm,
    AttentionParams, AttnShape, EquiLinearWeights, MixedLinearWeights, MultivectorBatch, ScalarBatch,
};
use crate::ga::{
    embed_point, embed_point_reflection, embed_rotation, embed_translation, embed_velocity, random_versor,
    Multivector, Versor,
};
use crate::model::{gatr_block, gatr_forward, init_params, join_reference, GatrConfig};
use crate::Real;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `count` versors: a pure translation, a pure rotation and a point
/// reflection first, then products of 1-4 random planes with offsets of
/// scale 0, 1 or 10.
pub fn test_versors<R: Rng>(rng: &mut R, count: usize) -> Vec<Versor<f64>> {
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let u = match t {
            0 => embed_translation([normal(rng) * 10.0, normal(rng) * 10.0, normal(rng) * 10.0]),
            1 => {
                let q: [f64; 4] = std::array::from_fn(|_| normal(rng));
                let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                embed_rotation(q.map(|v| v / n)).expect("unit quaternion")
            }
            2 => embed_point_reflection([normal(rng) * 5.0, normal(rng) * 5.0, normal(rng) * 5.0]),
            _ => random_versor(rng, 1 + t % 4, [0.0, 1.0, 10.0][t % 3]).expect("planes are invertible"),
        };
        out.push(u);
    }
    out
}

fn random_batch<R: Rng>(rng: &mut R, items: usize, channels: usize) -> MultivectorBatch {
    let data = (0..items * channels * 16).map(|_| normal(rng)).collect();
    MultivectorBatch::new(items, channels, data).unwrap()
}

fn random_scalars<R: Rng>(rng: &mut R, items: usize, channels: usize) -> ScalarBatch {
    ScalarBatch::new(items, channels, (0..items * channels).map(|_| normal(rng)).collect()).unwrap()
}

/// Embedded point and velocity channels for `items` bodies plus one mass scalar.
pub(crate) fn body_inputs<R: Rng>(rng: &mut R, items: usize) -> (MultivectorBatch, ScalarBatch) {
    let mut mvs = Vec::new();
    for _ in 0..items {
        mvs.push(embed_point([normal(rng), normal(rng), normal(rng)]));
        mvs.push(embed_velocity([normal(rng) * 0.3, normal(rng) * 0.3, normal(rng) * 0.3]));
    }
    let mv = MultivectorBatch::from_multivectors(items, 2, &mvs).unwrap();
    let s = ScalarBatch::new(items, 1, (0..items).map(|_| rng.random::<f64>()).collect()).unwrap();
    (mv, s)
}

fn cast_mixed<T: Real>(w: &MixedLinearWeights) -> MixedLinearWeights<T> {
    let c = |v: &Vec<f64>| v.iter().map(|x| T::from_f64(*x)).collect::<Vec<T>>();
    MixedLinearWeights {
        mv: EquiLinearWeights {
            c_out: w.mv.c_out,
            c_in: w.mv.c_in,
            w: c(&w.mv.w),
            bias: c(&w.mv.bias),
        },
        s_in: w.s_in,
        s_out: w.s_out,
        s_to_mv: c(&w.s_to_mv),
        mv_to_s: c(&w.mv_to_s),
        ss: c(&w.ss),
        s_bias: c(&w.s_bias),
    }
}

/// Random weights and inputs shared by every versor of one precision pass.
struct Fixture {
    x: MultivectorBatch,
    y: MultivectorBatch,
    v: MultivectorBatch,
    s: ScalarBatch,
    reference: Multivector,
    linear: EquiLinearWeights,
    attention: AttentionParams,
    config: GatrConfig,
    params: ParamStore<f64>,
    hidden: MultivectorBatch,
    hidden_s: ScalarBatch,
    bodies: MultivectorBatch,
    masses: ScalarBatch,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (items, channels) = (5, 4);
        let mut linear = EquiLinearWeights::init(3, channels, &mut rng);
        linear.bias = (0..3).map(|_| normal(&mut rng)).collect();
        let mixed = |rng: &mut ChaCha8Rng| MixedLinearWeights::init(channels, channels, 6, 6, rng);
        let attention = AttentionParams {
            n_heads: 2,
            q: mixed(&mut rng),
            k: mixed(&mut rng),
            v: mixed(&mut rng),
            out: mixed(&mut rng),
        };
        let config = GatrConfig::desk();
        let params = init_params(&config, &mut rng);
        let (bodies, masses) = body_inputs(&mut rng, 4);
        Self {
            x: random_batch(&mut rng, items, channels),
            y: random_batch(&mut rng, items, channels),
            v: random_batch(&mut rng, items, channels),
            s: random_scalars(&mut rng, items, 6),
            reference: Multivector(std::array::from_fn(|_| normal(&mut rng))),
            linear,
            attention,
            hidden: random_batch(&mut rng, 4, config.n_mv_channels),
            hidden_s: random_scalars(&mut rng, 4, config.n_scalar_channels),
            config,
            params,
            bodies,
            masses,
        }
    }
}

const PRIMITIVES: [&str; 9] = [
    "equi_linear",
    "geometric_bilinear",
    "gated_gelu",
    "mv_layer_norm",
    "mv_attention",
    "multi_head_attention",
    "equi_join",
    "gatr_block",
    "gatr_forward (desk model)",
];

/// Equivariance error of every primitive at precision `T` for one versor.
fn primitive_errors<T: Real>(f: &Fixture, u: &Versor<f64>) -> [f64; 9] {
    let x: MultivectorBatch<T> = f.x.cast();
    let y: MultivectorBatch<T> = f.y.cast();
    let v: MultivectorBatch<T> = f.v.cast();
    let s: ScalarBatch<T> = f.s.cast();
    let tx = transform_batch(&x, u);
    let ty = transform_batch(&y, u);
    let tv = transform_batch(&v, u);
    let reference = f.reference.cast::<T>();
    let treference = u.sandwich(&f.reference).unwrap().cast::<T>();
    let check = |out: &MultivectorBatch<T>, out_t: &MultivectorBatch<T>| rel_error(&out_t.data, &transform_batch(out, u).data);
    let mut e = [0.0; 9];

    let linear = EquiLinearWeights {
        c_out: f.linear.c_out,
        c_in: f.linear.c_in,
        w: f.linear.w.iter().map(|w| T::from_f64(*w)).collect(),
        bias: f.linear.bias.iter().map(|w| T::from_f64(*w)).collect(),
    };
    e[0] = check(&equi_linear(&x, &linear).unwrap(), &equi_linear(&tx, &linear).unwrap());
    e[1] = check(
        &geometric_bilinear(&x, &y, &reference).unwrap(),
        &geometric_bilinear(&tx, &ty, &treference).unwrap(),
    );
    e[2] = check(&gated_gelu(&x), &gated_gelu(&tx));
    let eps = T::from_f64(crate::equi::LAYER_NORM_EPS);
    e[3] = check(&mv_layer_norm(&x, eps), &mv_layer_norm(&tx, eps));

    let (om, os) = mv_attention(&x, &y, &v, &s, &s, &s).unwrap();
    let (tom, tos) = mv_attention(&tx, &ty, &tv, &s, &s, &s).unwrap();
    e[4] = check(&om, &tom).max(rel_error(&tos.data, &os.data));

    let attention = AttentionParams {
        n_heads: f.attention.n_heads,
        q: cast_mixed(&f.attention.q),
        k: cast_mixed(&f.attention.k),
        v: cast_mixed(&f.attention.v),
        out: cast_mixed(&f.attention.out),
    };
    let (om, os) = multi_head_attention(&x, &s, &attention).unwrap();
    let (tom, tos) = multi_head_attention(&tx, &s, &attention).unwrap();
    e[5] = check(&om, &tom).max(rel_error(&tos.data, &os.data));

    let pair = |a: &MultivectorBatch<T>, b: &MultivectorBatch<T>, r: &Multivector<T>| {
        let mut out = a.clone();
        for (chunk, (ca, cb)) in out
            .data
            .chunks_exact_mut(16)
            .zip(a.data.chunks_exact(16).zip(b.data.chunks_exact(16)))
        {
            let m = Multivector::from_slice(ca).equi_join(&Multivector::from_slice(cb), r);
            chunk.copy_from_slice(&m.0);
        }
        out
    };
    e[6] = check(&pair(&x, &y, &reference), &pair(&tx, &ty, &treference));

    let params: ParamStore<T> = f.params.cast();
    let hidden: MultivectorBatch<T> = f.hidden.cast();
    let hidden_s: ScalarBatch<T> = f.hidden_s.cast();
    let href = join_reference(&hidden.data);
    let thidden = transform_batch(&hidden, u);
    let thref = join_reference(&thidden.data);
    let (bm, bs) = gatr_block(&f.config, &params, 0, &hidden, &hidden_s, &href).unwrap();
    let (tbm, tbs) = gatr_block(&f.config, &params, 0, &thidden, &hidden_s, &thref).unwrap();
    e[7] = check(&bm, &tbm).max(rel_error(&tbs.data, &bs.data));

    let bodies: MultivectorBatch<T> = f.bodies.cast();
    let masses: ScalarBatch<T> = f.masses.cast();
    let (fm, fs) = gatr_forward(&f.config, &params, &bodies, &masses).unwrap();
    let (tfm, tfs) = gatr_forward(&f.config, &params, &transform_batch(&bodies, u), &masses).unwrap();
    e[8] = check(&fm, &tfm).max(rel_error(&tfs.data, &fs.data));
    e
}

/// Maximum equivariance error per primitive over `versors` at precision `T`.
pub(crate) fn max_primitive_errors<T: Real>(seed: u64, versors: &[Versor<f64>]) -> [f64; 9] {
    let fixture = Fixture::new(seed);
    let mut worst = [0.0f64; 9];
    for u in versors {
        for (w, e) in worst.iter_mut().zip(primitive_errors::<T>(&fixture, u)) {
            *w = w.max(e);
        }
    }
    worst
}

fn permute_rows<T: Real>(data: &[T], width: usize, perm: &[usize]) -> Vec<T> {
    perm.iter().flat_map(|&p| data[p * width..(p + 1) * width].to_vec()).collect()
}

pub fn equivariance_suite(options: &VerifyOptions) -> Vec<Property> {
    let trials = options.trials_or(100);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let versors = test_versors(&mut rng, trials);
    let mut props = Vec::new();
    let e64 = max_primitive_errors::<f64>(options.seed, &versors);
    let e32 = max_primitive_errors::<f32>(options.seed, &versors);
    for (i, name) in PRIMITIVES.iter().enumerate() {
        props.push(Property::new(format!("{name} (64-bit)"), e64[i], options.tol(1e-10), trials));
    }
    for (i, name) in PRIMITIVES.iter().enumerate() {
        props.push(Property::new(format!("{name} (32-bit)"), e32[i], options.tol(1e-5), trials));
    }

    // Attention logits are invariant and softmax rows are normalized.
    let fixture = Fixture::new(options.seed);
    let (n, c, sc) = (fixture.x.items, fixture.x.channels, fixture.s.channels);
    let shape = AttnShape {
        groups: 1,
        nq: n,
        nk: n,
        c_mv: c,
        c_s: sc,
    };
    let mut logit_err = 0.0f64;
    let mut row_err = 0.0f64;
    let mut w = vec![0.0; n * n];
    attention_weights(shape, &fixture.x.data, &fixture.y.data, &fixture.s.data, &fixture.s.data, &mut w);
    for row in w.chunks_exact(n) {
        row_err = row_err.max((row.iter().sum::<f64>() - 1.0).abs());
    }
    for u in &versors {
        let mut wt = vec![0.0; n * n];
        let tx = fixture.x.transform(u);
        let ty = fixture.y.transform(u);
        attention_weights(shape, &tx.data, &ty.data, &fixture.s.data, &fixture.s.data, &mut wt);
        logit_err = logit_err.max(rel_error(&wt, &w));
        for row in wt.chunks_exact(n) {
            row_err = row_err.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    props.push(Property::new("attention weights invariant", logit_err, options.tol(1e-10), trials));
    props.push(Property::new("softmax rows sum to one", row_err, options.tol(1e-12), trials + 1));

    // Item permutations commute with attention and the full model.
    let mut perm_err = 0.0f64;
    let perm_trials = trials.min(20);
    for _ in 0..perm_trials {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let px = MultivectorBatch::new(n, c, permute_rows(&fixture.x.data, c * 16, &perm)).unwrap();
        let ps = ScalarBatch::new(n, sc, permute_rows(&fixture.s.data, sc, &perm)).unwrap();
        let (om, os) = multi_head_attention(&fixture.x, &fixture.s, &fixture.attention).unwrap();
        let (pm, pso) = multi_head_attention(&px, &ps, &fixture.attention).unwrap();
        perm_err = perm_err
            .max(rel_error(&pm.data, &permute_rows(&om.data, om.channels * 16, &perm)))
            .max(rel_error(&pso.data, &permute_rows(&os.data, os.channels, &perm)));

        let bodies = fixture.bodies.items;
        let mut bperm: Vec<usize> = (0..bodies).collect();
        for i in (1..bodies).rev() {
            bperm.swap(i, rng.random_range(0..=i));
        }
        let bx = MultivectorBatch::new(bodies, 2, permute_rows(&fixture.bodies.data, 32, &bperm)).unwrap();
        let bs = ScalarBatch::new(bodies, 1, permute_rows(&fixture.masses.data, 1, &bperm)).unwrap();
        let (fm, _) = gatr_forward(&fixture.config, &fixture.params, &fixture.bodies, &fixture.masses).unwrap();
        let (pm, _) = gatr_forward(&fixture.config, &fixture.params, &bx, &bs).unwrap();
        perm_err = perm_err.max(rel_error(&pm.data, &permute_rows(&fm.data, 16, &bperm)));
    }
    props.push(Property::new("item permutation equivariance", perm_err, options.tol(1e-12), perm_trials));
    props
}

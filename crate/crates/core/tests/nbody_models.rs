use gatr::model::GatrConfig;
use gatr::nbody::{
    evaluate, generate_dataset, metamorphic_deviation, predict, train, Dataset, MlpConfig, ModelKind, ModelSpec,
    NBodyError, NBodySample, Precision, SampleConfig, TrainConfig, TransformerConfig, Vec3,
};

fn small_gatr() -> ModelSpec {
    ModelSpec::Gatr(GatrConfig {
        n_blocks: 1,
        n_mv_channels: 4,
        n_scalar_channels: 8,
        n_heads: 2,
        ..GatrConfig::desk()
    })
}

fn small_transformer() -> ModelSpec {
    ModelSpec::Transformer(TransformerConfig {
        n_blocks: 1,
        width: 16,
        n_heads: 2,
        mlp_expansion: 2,
    })
}

fn small_mlp(n_bodies: usize) -> ModelSpec {
    ModelSpec::Mlp(MlpConfig {
        n_layers: 2,
        width: 32,
        n_bodies,
    })
}

fn data(n: usize, seed: u64) -> Dataset {
    generate_dataset(&SampleConfig::default(), n, seed, false).unwrap()
}

fn init(spec: &ModelSpec, seed: u64, train_set: &Dataset) -> gatr::autodiff::ParamStore<f64> {
    let config = TrainConfig {
        steps: 2,
        seed,
        ..TrainConfig::default()
    };
    train(spec, train_set, &config).unwrap().params
}

/// Rotation by `angle` about the unit axis `k` (Rodrigues).
fn rotation(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let cross = match (i, j) {
                (0, 1) => -k[2],
                (0, 2) => k[1],
                (1, 0) => k[2],
                (1, 2) => -k[0],
                (2, 0) => -k[1],
                (2, 1) => k[0],
                _ => 0.0,
            };
            r[i][j] = c * f64::from(u8::from(i == j)) + s * cross + (1.0 - c) * k[i] * k[j];
        }
    }
    r
}

fn apply(r: &[[f64; 3]; 3], t: Vec3, p: Vec3) -> Vec3 {
    let mut out = t;
    for i in 0..3 {
        for j in 0..3 {
            out[i] += r[i][j] * p[j];
        }
    }
    out
}

fn moved(s: &NBodySample, r: &[[f64; 3]; 3], t: Vec3) -> NBodySample {
    NBodySample {
        masses: s.masses.clone(),
        pos0: s.pos0.iter().map(|p| apply(r, t, *p)).collect(),
        vel0: s.vel0.iter().map(|v| apply(r, [0.0; 3], *v)).collect(),
        pos1: s.pos1.iter().map(|p| apply(r, t, *p)).collect(),
    }
}

fn max_diff(a: &[Vec<Vec3>], b: &[Vec<Vec3>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .flat_map(|(x, y)| (0..3).map(move |k| (x[k] - y[k]).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn gatr_predictions_are_e3_equivariant() {
    let train_set = data(8, 1);
    let spec = small_gatr();
    let params = init(&spec, 0, &train_set);
    let samples = data(4, 2).samples;
    let r = rotation([0.3, -1.0, 0.7], 1.1);
    let t = [5.0, -3.0, 8.0];
    let (base, _) = predict(&spec, &params, &samples, Precision::F64, false).unwrap();
    let moved_samples: Vec<_> = samples.iter().map(|s| moved(s, &r, t)).collect();
    let (out, _) = predict(&spec, &params, &moved_samples, Precision::F64, false).unwrap();
    let expected: Vec<Vec<Vec3>> = base.iter().map(|b| b.iter().map(|p| apply(&r, t, *p)).collect()).collect();
    assert!(max_diff(&out, &expected) < 1e-9, "{}", max_diff(&out, &expected));
}

#[test]
fn token_models_are_permutation_equivariant() {
    let train_set = data(8, 1);
    let samples = data(3, 4).samples;
    let perm = [2, 0, 3, 1];
    let permuted: Vec<NBodySample> = samples
        .iter()
        .map(|s| NBodySample {
            masses: perm.iter().map(|&i| s.masses[i]).collect(),
            pos0: perm.iter().map(|&i| s.pos0[i]).collect(),
            vel0: perm.iter().map(|&i| s.vel0[i]).collect(),
            pos1: perm.iter().map(|&i| s.pos1[i]).collect(),
        })
        .collect();
    for spec in [small_gatr(), small_transformer()] {
        let params = init(&spec, 3, &train_set);
        let (base, _) = predict(&spec, &params, &samples, Precision::F64, false).unwrap();
        let (out, _) = predict(&spec, &params, &permuted, Precision::F64, false).unwrap();
        let expected: Vec<Vec<Vec3>> = base.iter().map(|b| perm.iter().map(|&i| b[i]).collect()).collect();
        assert!(max_diff(&out, &expected) < 1e-10, "{}", spec.kind());
    }
}

#[test]
fn small_models_overfit_a_single_sample() {
    let one = data(1, 5);
    for spec in [small_gatr(), small_mlp(one.n_bodies())] {
        let config = TrainConfig {
            steps: 1500,
            batch_size: 1,
            lr_start: 3e-3,
            lr_end: 1e-4,
            precision: Precision::F64,
            ..TrainConfig::default()
        };
        let result = train(&spec, &one, &config).unwrap();
        let first = result.curve[0].loss;
        let last = result.curve.last().unwrap().loss;
        assert!(last < 1e-3 * first, "{}: {first:e} -> {last:e}", spec.kind());
    }
}

#[test]
fn gatr_handles_more_planets_and_translated_systems() {
    let train_set = data(8, 1);
    let spec = small_gatr();
    let params = init(&spec, 0, &train_set);
    let more = generate_dataset(&SampleConfig { n_planets: 5, ..SampleConfig::default() }, 6, 7, false).unwrap();
    let report = evaluate(&spec, &params, &more, Precision::F32, false).unwrap();
    assert!(report.mse.is_finite() && report.n_samples == 6);

    let translated = SampleConfig {
        translation_mean: [200.0, 0.0, 0.0],
        ..SampleConfig::default()
    };
    let far = generate_dataset(&translated, 6, 8, false).unwrap();
    let dev = metamorphic_deviation(&spec, &params, &far, Precision::F32, false).unwrap();
    assert!(dev < 1e-4, "{dev}");
}

#[test]
fn baselines_are_not_translation_equivariant() {
    let train_set = data(8, 1);
    let translated = SampleConfig {
        translation_mean: [200.0, 0.0, 0.0],
        ..SampleConfig::default()
    };
    let far = generate_dataset(&translated, 6, 8, false).unwrap();
    let spec = small_transformer();
    let params = init(&spec, 0, &train_set);
    let dev = metamorphic_deviation(&spec, &params, &far, Precision::F64, false).unwrap();
    assert!(dev > 1e-3, "{dev}");
}

#[test]
fn mlp_rejects_other_body_counts() {
    let train_set = data(8, 1);
    let spec = ModelSpec::desk(ModelKind::Mlp, train_set.n_bodies());
    let params = init(&spec, 0, &train_set);
    let more = generate_dataset(&SampleConfig { n_planets: 5, ..SampleConfig::default() }, 2, 7, false).unwrap();
    let err = evaluate(&spec, &params, &more, Precision::F32, false).unwrap_err();
    assert!(matches!(err, NBodyError::Mismatch(_)), "{err}");
    let err = train(&spec, &more, &TrainConfig { steps: 1, ..TrainConfig::default() }).unwrap_err();
    assert!(err.to_string().contains("bodies"), "{err}");
}

#[test]
fn empty_sets_are_errors() {
    let train_set = data(8, 1);
    let spec = small_transformer();
    let params = init(&spec, 0, &train_set);
    let empty = data(0, 1);
    assert!(matches!(evaluate(&spec, &params, &empty, Precision::F32, false), Err(NBodyError::Invalid(_))));
    assert!(train(&spec, &empty, &TrainConfig::default()).is_err());
}

#[test]
fn training_loss_decreases_and_follows_the_schedule() {
    let train_set = data(64, 9);
    let config = TrainConfig {
        steps: 200,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let result = train(&small_gatr(), &train_set, &config).unwrap();
    let head: f64 = result.curve[..20].iter().map(|p| p.loss).sum();
    let tail: f64 = result.curve[180..].iter().map(|p| p.loss).sum();
    assert!(tail < head, "{head} -> {tail}");
    assert_eq!(result.curve[0].lr, 3e-4);
    let ratio = result.curve[100].lr / 3e-4;
    assert!((ratio - 0.1).abs() < 1e-12, "{ratio}");
}

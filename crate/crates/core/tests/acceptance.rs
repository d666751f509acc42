//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! followed by indented detail lines, then asserts.
//!
//! Run alone with `cargo test --release -p gatr --test acceptance -- --nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use gatr::cli::params_report;
use gatr::model::{init_params, GatrConfig};
use gatr::nbody::{
    evaluate, generate_dataset, metamorphic_deviation, train, write_dataset, ModelKind, ModelSpec, Precision,
    SampleConfig, TrainConfig,
};
use gatr::verify::{algebra_suite, equivariance_suite, gradient_suite, linear_basis_suite, Property, VerifyOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Written to the raw stderr handle so the lines show up even when the test
/// harness captures output.
fn report(criterion: &str, passed: bool, elapsed: Duration, details: &[String]) {
    let mut text = format!("{} {criterion} ({elapsed:.1?})\n", if passed { "PASS" } else { "FAIL" });
    for d in details {
        text.push_str(&format!("    {d}\n"));
    }
    let _ = std::io::stderr().lock().write_all(text.as_bytes());
}

fn property_lines(props: &[Property]) -> Vec<String> {
    props.iter().map(|p| p.to_string()).collect()
}

fn suite_criterion(criterion: &str, limit: Duration, run: impl FnOnce() -> Vec<Property>) {
    let start = Instant::now();
    let props = run();
    let elapsed = start.elapsed();
    let passed = props.iter().all(Property::passed) && elapsed < limit;
    let mut details = property_lines(&props);
    details.push(format!("runtime limit {limit:?}"));
    report(criterion, passed, elapsed, &details);
    assert!(passed, "{criterion} failed");
}

#[test]
fn algebra_identities() {
    suite_criterion("algebra suite at 1e-10 on 1000 instances", Duration::from_secs(60), || {
        algebra_suite(&VerifyOptions::default())
    });
}

#[test]
fn equivariant_linear_map_space() {
    suite_criterion(
        "equivariant linear map space: dim 9 (PGA), 4 (Euclidean), span within 1e-8",
        Duration::from_secs(60),
        || linear_basis_suite(&VerifyOptions::default()),
    );
}

#[test]
fn layer_and_model_equivariance() {
    suite_criterion(
        "equivariance of every primitive and the desk GATr over 100 versors",
        Duration::from_secs(120),
        || equivariance_suite(&VerifyOptions::default()),
    );
}

#[test]
fn gradients_match_finite_differences() {
    suite_criterion(
        "reverse-mode gradients vs central differences (ops 1e-6, block 1e-4)",
        Duration::from_secs(120),
        || gradient_suite(&VerifyOptions::default()),
    );
}

const TRAIN_SAMPLES: usize = 1000;
const EVAL_SAMPLES: usize = 500;
const SEEDS: [u64; 3] = [0, 1, 2];

#[test]
fn nbody_desk_experiment() {
    let start = Instant::now();
    let base = SampleConfig::default();
    let translated = SampleConfig {
        translation_mean: [200.0, 0.0, 0.0],
        ..SampleConfig::default()
    };
    let train_set = generate_dataset(&base, TRAIN_SAMPLES, 100, true).unwrap();
    let eval_set = generate_dataset(&base, EVAL_SAMPLES, 200, true).unwrap();
    let translated_set = generate_dataset(&translated, EVAL_SAMPLES, 300, true).unwrap();

    let mut details = Vec::new();
    let mut means = Vec::new();
    let mut worst_deviation = 0.0f64;
    for kind in ModelKind::ALL {
        let spec = ModelSpec::desk(kind, train_set.n_bodies());
        let mut mses = Vec::new();
        for seed in SEEDS {
            let config = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            let result = train(&spec, &train_set, &config).unwrap();
            let eval = evaluate(&spec, &result.params, &eval_set, Precision::F32, true).unwrap();
            let mut line = format!(
                "{kind} seed {seed}: {} params, final loss {:.3e}, eval mse {:.4e} +- {:.1e}",
                result.params.n_values(),
                result.curve.last().unwrap().loss,
                eval.mse,
                eval.stderr
            );
            if kind == ModelKind::Gatr {
                let dev = metamorphic_deviation(&spec, &result.params, &translated_set, Precision::F32, true).unwrap();
                worst_deviation = worst_deviation.max(dev);
                line.push_str(&format!(", translated metamorphic deviation {dev:.2e}"));
            }
            details.push(line);
            mses.push(eval.mse);
        }
        let mean = mses.iter().sum::<f64>() / mses.len() as f64;
        details.push(format!("{kind} mean eval mse {mean:.4e}"));
        means.push(mean);
    }
    let elapsed = start.elapsed();
    let (g, t, m) = (means[0], means[1], means[2]);
    let ordered = g < t && t < m;
    let equivariant = worst_deviation < 1e-4;
    let in_time = elapsed < Duration::from_secs(45 * 60);
    details.push(format!("gatr < transformer < mlp: {ordered}"));
    details.push(format!("max metamorphic deviation {worst_deviation:.2e} < 1e-4: {equivariant}"));
    let passed = ordered && equivariant && in_time;
    report(
        "n-body desk experiment: 1000 samples, 3000 steps, 3 seeds",
        passed,
        elapsed,
        &details,
    );
    assert!(ordered, "expected gatr {g} < transformer {t} < mlp {m}");
    assert!(equivariant, "metamorphic deviation {worst_deviation}");
    assert!(in_time, "took {elapsed:?}");
}

#[test]
fn reproducible_generation_and_training() {
    let start = Instant::now();
    let config = SampleConfig::default();
    let bytes = |parallel: bool| {
        let data = generate_dataset(&config, 200, 42, parallel).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        (data, buf)
    };
    let (data, first) = bytes(false);
    let (_, second) = bytes(false);
    let (_, threaded) = bytes(true);
    let data_same = first == second && first == threaded;
    let mut details = vec![format!("dataset of 200 samples: {} bytes, identical {data_same}", first.len())];

    let mut train_same = true;
    for kind in ModelKind::ALL {
        let spec = ModelSpec::desk(kind, data.n_bodies());
        let config = TrainConfig {
            steps: 100,
            seed: 5,
            ..TrainConfig::default()
        };
        let a = train(&spec, &data, &config).unwrap();
        let b = train(&spec, &data, &config).unwrap();
        let losses = |r: &gatr::nbody::TrainResult| r.curve.iter().map(|p| p.loss.to_bits()).collect::<Vec<_>>();
        let same = losses(&a) == losses(&b) && a.params == b.params;
        details.push(format!("{kind} 100-step run identical: {same}"));
        train_same &= same;
    }
    let passed = data_same && train_same;
    report("bit-identical dataset generation and 100-step training", passed, start.elapsed(), &details);
    assert!(passed);
}

#[test]
fn reference_parameter_count() {
    let start = Instant::now();
    let config = GatrConfig::reference();
    let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(0));
    let total = params.n_values() as f64;
    let target = 1.9e6;
    let passed = (total - target).abs() <= 0.25 * target;
    let mut details = params_report(&config).unwrap();
    details.push(format!("relative to 1.9M: {:+.1}%", 100.0 * (total - target) / target));
    report("reference GATr parameter count within 25% of 1.9M", passed, start.elapsed(), &details);
    assert!(passed, "{total} parameters");
}

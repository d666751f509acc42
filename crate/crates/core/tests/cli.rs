use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gatr::nbody::read_dataset;

const SMALL: &str = r#"{
  "dataset": {"train_samples": 24, "eval_samples": 12},
  "model": {"gatr": {"n_blocks": 1, "n_mv_channels": 4, "n_scalar_channels": 8, "n_heads": 2},
            "transformer": {"n_blocks": 1, "width": 16, "n_heads": 2},
            "mlp": {"n_layers": 1, "width": 16}},
  "training": {"steps": 8, "batch_size": 8}
}"#;

fn gatr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gatr"))
        .args(args)
        .current_dir(dir)
        .env_remove("GATR_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), SMALL).unwrap();
    dir
}

fn gen(dir: &Path, split: &str) {
    let out = gatr(dir, &["--deterministic", "gen-data", "--config", "c.json", "--split", split, "--out", &format!("{split}.bin")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn header(dir: &Path, file: &str) -> gatr::nbody::DatasetHeader {
    let bytes = fs::read(dir.join(file)).unwrap();
    read_dataset(&mut bytes.as_slice()).unwrap().header
}

#[test]
fn split_regimes_are_stored_in_headers() {
    let dir = setup();
    for s in ["train", "eval", "eval-more-planets", "eval-translated"] {
        gen(dir.path(), s);
    }
    let p = dir.path();
    assert_eq!(header(p, "train.bin").n_samples, 24);
    assert_eq!(header(p, "eval.bin").n_bodies, 4);
    assert_eq!(header(p, "eval-more-planets.bin").n_bodies, 6);
    assert_eq!(header(p, "eval-translated.bin").translation_mean, [200.0, 0.0, 0.0]);
    assert_eq!(header(p, "eval.bin").translation_mean, [0.0; 3]);
    assert_ne!(fs::read(p.join("train.bin")).unwrap(), fs::read(p.join("eval.bin")).unwrap());
}

#[test]
fn same_seed_gives_identical_files_and_env_seed_overrides() {
    let dir = setup();
    let p = dir.path();
    let run = |out: &str, seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gatr"));
        cmd.args(["gen-data", "--config", "c.json", "--split", "eval", "--out", out])
            .current_dir(p)
            .env_remove("GATR_SEED");
        if let Some(s) = seed {
            cmd.env("GATR_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(p.join(out)).unwrap()
    };
    let a = run("a.bin", None);
    assert_eq!(a, run("b.bin", None));
    let c = run("c.bin", Some("7"));
    assert_ne!(a, c);
    assert_eq!(c, run("d.bin", Some("7")));
    assert_eq!(header(p, "c.bin").seed, header(p, "d.bin").seed);
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = setup();
    fs::write(dir.path().join("bad.json"), r#"{"training": {"stepz": 3}}"#).unwrap();
    let out = gatr(dir.path(), &["gen-data", "--config", "bad.json", "--split", "eval", "--out", "x.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepz"));
    assert!(!dir.path().join("x.bin").exists());

    let out = gatr(dir.path(), &["train", "--data", "missing.bin", "--model", "resnet", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_exit_code_follows_properties() {
    let dir = setup();
    let ok = gatr(dir.path(), &["verify", "--suite", "algebra", "--trials", "20"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains("max_error=0.000e0")));

    let fail = gatr(dir.path(), &["verify", "--suite", "algebra", "--trials", "20", "--tolerance", "1e-30"]);
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("FAIL"));
}

#[test]
fn train_eval_round_trip_and_report() {
    let dir = setup();
    let p = dir.path();
    for s in ["train", "eval", "eval-translated", "eval-more-planets"] {
        gen(p, s);
    }
    for m in ["gatr", "transformer"] {
        let out = gatr(
            p,
            &["--deterministic", "train", "--config", "c.json", "--data", "train.bin", "--model", m, "--out", &format!("runs/{m}"), "--eval", "eval.bin", "--eval", "eval-translated.bin"],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let run = p.join("runs/gatr");
    let loss = fs::read_to_string(run.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().next(), Some("step,loss,lr"));
    assert_eq!(loss.lines().count(), 9);
    let metamorphic = fs::read_to_string(run.join("metamorphic.csv")).unwrap();
    let dev: f64 = metamorphic.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(dev < 1e-4, "metamorphic deviation {dev}");

    let trained = fs::read_to_string(run.join("metrics.csv")).unwrap();
    let out = gatr(p, &["--deterministic", "eval", "--checkpoint", "runs/gatr/checkpoint.bin", "--data", "eval.bin", "--out", "again.csv"]);
    assert!(out.status.success());
    let again = fs::read_to_string(p.join("again.csv")).unwrap();
    assert_eq!(again.lines().nth(1), trained.lines().nth(1));

    fs::create_dir_all(p.join("runs/unfinished")).unwrap();
    let out = gatr(p, &["report", "--runs", "runs", "--out", "report.csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping"));
    let report = fs::read_to_string(p.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "model,train_size,split,mse,stderr");
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("gatr,24,eval,"));
}

#[test]
fn deterministic_training_is_byte_identical() {
    let dir = setup();
    let p = dir.path();
    gen(p, "train");
    for out in ["r1", "r2"] {
        let o = gatr(p, &["--deterministic", "train", "--config", "c.json", "--data", "train.bin", "--model", "gatr", "--out", out]);
        assert!(o.status.success());
    }
    for f in ["checkpoint.bin", "loss.csv", "run.json"] {
        assert_eq!(fs::read(p.join("r1").join(f)).unwrap(), fs::read(p.join("r2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn mismatched_and_empty_data_are_errors() {
    let dir = setup();
    let p = dir.path();
    gen(p, "train");
    gen(p, "eval-more-planets");
    let out = gatr(
        p,
        &["train", "--config", "c.json", "--data", "train.bin", "--model", "mlp", "--out", "mlp", "--eval", "eval-more-planets.bin"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("6"));

    let out = gatr(p, &["train", "--config", "c.json", "--data", "train.bin", "--model", "mlp", "--out", "mlp"]);
    assert!(out.status.success());
    let out = gatr(p, &["eval", "--checkpoint", "mlp/checkpoint.bin", "--data", "eval-more-planets.bin", "--out", "m.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!p.join("m.csv").exists());

    let out = gatr(p, &["gen-data", "--config", "c.json", "--split", "eval", "--samples", "0", "--out", "empty.bin"]);
    assert!(out.status.success());
    let out = gatr(p, &["eval", "--checkpoint", "mlp/checkpoint.bin", "--data", "empty.bin", "--out", "e.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!p.join("e.csv").exists());
}

#[test]
fn report_without_runs_fails() {
    let dir = setup();
    fs::create_dir_all(dir.path().join("runs")).unwrap();
    let out = gatr(dir.path(), &["report", "--runs", "runs", "--out", "r.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn tables_match_shipped_golden_files() {
    let dir = setup();
    let out = gatr(dir.path(), &["tables", "--out", "t"]);
    assert!(out.status.success());
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("golden");
    for f in ["cayley_geometric.txt", "cayley_wedge.txt", "dual_signs.txt"] {
        assert_eq!(fs::read(dir.path().join("t").join(f)).unwrap(), fs::read(golden.join(f)).unwrap());
    }
}

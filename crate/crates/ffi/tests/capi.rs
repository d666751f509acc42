use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use gatr::cli::{EvalSection, RunRecord};
use gatr::model::{write_checkpoint, Checkpoint, GatrConfig};
use gatr::nbody::{generate_dataset, predict, train, ModelKind, ModelSpec, Precision, SampleConfig, TrainConfig};
use gatr_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gatr_last_error()) }.to_string_lossy().into_owned()
}

fn basis(i: usize) -> [f64; 16] {
    let mut m = [0.0; 16];
    m[i] = 1.0;
    m
}

#[test]
fn products_follow_the_metric() {
    let mut out = [0.0; 16];
    unsafe {
        assert_eq!(gatr_geometric_product(basis(2).as_ptr(), basis(2).as_ptr(), out.as_mut_ptr()), GatrStatus::Ok);
        assert_eq!(out, basis(0));
        // e0 squares to zero
        assert_eq!(gatr_geometric_product(basis(1).as_ptr(), basis(1).as_ptr(), out.as_mut_ptr()), GatrStatus::Ok);
        assert_eq!(out, [0.0; 16]);
        assert_eq!(gatr_wedge(basis(2).as_ptr(), basis(3).as_ptr(), out.as_mut_ptr()), GatrStatus::Ok);
        assert_eq!(out, basis(8));
        let mut s = 0.0;
        assert_eq!(gatr_inner(basis(4).as_ptr(), basis(4).as_ptr(), &mut s), GatrStatus::Ok);
        assert_eq!(s, 1.0);
    }
}

#[test]
fn translating_a_point_moves_it() {
    let (p, t) = ([1.0, -2.0, 0.5], [3.0, 4.0, -1.0]);
    let (mut x, mut u, mut y, mut q) = ([0.0; 16], [0.0; 16], [0.0; 16], [0.0; 3]);
    unsafe {
        assert_eq!(gatr_embed_point(p.as_ptr(), x.as_mut_ptr()), GatrStatus::Ok);
        assert_eq!(gatr_embed_translation(t.as_ptr(), u.as_mut_ptr()), GatrStatus::Ok);
        assert_eq!(gatr_sandwich(u.as_ptr(), x.as_ptr(), y.as_mut_ptr()), GatrStatus::Ok);
        assert_eq!(gatr_extract_point(y.as_ptr(), q.as_mut_ptr()), GatrStatus::Ok);
    }
    for k in 0..3 {
        assert!((q[k] - (p[k] + t[k])).abs() < 1e-12);
    }
}

#[test]
fn join_of_two_points_has_their_distance_as_norm() {
    let (a, b) = ([0.0, 0.0, 0.0], [3.0, 4.0, 0.0]);
    let (mut x, mut y, mut l) = ([0.0; 16], [0.0; 16], [0.0; 16]);
    unsafe {
        gatr_embed_point(a.as_ptr(), x.as_mut_ptr());
        gatr_embed_point(b.as_ptr(), y.as_mut_ptr());
        assert_eq!(gatr_join(x.as_ptr(), y.as_ptr(), l.as_mut_ptr()), GatrStatus::Ok);
        let mut n2 = 0.0;
        gatr_inner(l.as_ptr(), l.as_ptr(), &mut n2);
        assert!((n2.abs().sqrt() - 5.0).abs() < 1e-12);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut out = [0.0; 16];
    unsafe {
        assert_eq!(gatr_dual(ptr::null(), out.as_mut_ptr()), GatrStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(gatr_dual(basis(0).as_ptr(), out.as_mut_ptr()), GatrStatus::Ok);
        assert_eq!(last_error(), "");

        let mut p = [0.0; 3];
        assert_eq!(gatr_extract_point(basis(11).as_ptr(), p.as_mut_ptr()), GatrStatus::InvalidArgument);
        assert!(last_error().contains("infinity"));

        let mixed: Vec<f64> = (0..16).map(|i| if i < 2 { 1.0 } else { 0.0 }).collect();
        assert_eq!(gatr_sandwich(mixed.as_ptr(), basis(0).as_ptr(), out.as_mut_ptr()), GatrStatus::InvalidArgument);

        let mut model = ptr::null_mut();
        let path = CString::new("/nonexistent/checkpoint.bin").unwrap();
        assert_eq!(gatr_model_load(path.as_ptr(), &mut model), GatrStatus::Io);
        assert!(model.is_null());
        gatr_model_free(ptr::null_mut());
        assert_eq!(gatr_model_param_count(ptr::null()), 0);
    }
}

fn save_model(dir: &Path, kind: ModelKind) -> (std::path::PathBuf, ModelSpec, gatr::autodiff::ParamStore<f64>) {
    let data = generate_dataset(&SampleConfig::default(), 16, 3, false).unwrap();
    let spec = match kind {
        ModelKind::Gatr => ModelSpec::Gatr(GatrConfig {
            n_blocks: 1,
            n_mv_channels: 4,
            n_scalar_channels: 8,
            n_heads: 2,
            ..GatrConfig::desk()
        }),
        other => ModelSpec::desk(other, data.n_bodies()),
    };
    let training = TrainConfig {
        steps: 3,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let result = train(&spec, &data, &training).unwrap();
    let record = RunRecord {
        model: kind,
        train_size: data.len(),
        spec: spec.clone(),
        training,
        eval: EvalSection::default(),
    };
    let path = dir.join(format!("{kind}.bin"));
    let ckpt = Checkpoint {
        config: serde_json::to_string(&record).unwrap(),
        params: result.params.clone(),
    };
    write_checkpoint(&mut std::fs::File::create(&path).unwrap(), &ckpt).unwrap();
    (path, spec, result.params)
}

#[test]
fn model_handle_predicts_like_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let (path, spec, params) = save_model(dir.path(), ModelKind::Gatr);
    let eval = generate_dataset(&SampleConfig::default(), 3, 9, false).unwrap();
    let (expected, _) = predict(&spec, &params, &eval.samples, Precision::F32, false).unwrap();

    let n = eval.n_bodies();
    let masses: Vec<f64> = eval.samples.iter().flat_map(|s| s.masses.clone()).collect();
    let pos: Vec<f64> = eval.samples.iter().flat_map(|s| s.pos0.iter().flatten().copied().collect::<Vec<_>>()).collect();
    let vel: Vec<f64> = eval.samples.iter().flat_map(|s| s.vel0.iter().flatten().copied().collect::<Vec<_>>()).collect();
    let mut out = vec![0.0; pos.len()];
    unsafe {
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(gatr_model_load(c_path.as_ptr(), &mut model), GatrStatus::Ok, "{}", last_error());
        assert_eq!(gatr_model_param_count(model), params.n_values());
        assert_eq!(gatr_model_fixed_bodies(model), 0);
        let status = gatr_model_predict(model, 3, n, masses.as_ptr(), pos.as_ptr(), vel.as_ptr(), out.as_mut_ptr());
        assert_eq!(status, GatrStatus::Ok, "{}", last_error());
        let bad = vec![-1.0; masses.len()];
        let status = gatr_model_predict(model, 3, n, bad.as_ptr(), pos.as_ptr(), vel.as_ptr(), out.as_mut_ptr());
        assert_eq!(status, GatrStatus::InvalidArgument);
        gatr_model_free(model);
    }
    let flat: Vec<f64> = expected.iter().flatten().flatten().copied().collect();
    assert_eq!(out, flat);
}

#[test]
fn fixed_size_model_rejects_other_body_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _, _) = save_model(dir.path(), ModelKind::Mlp);
    let (m, p) = (vec![1.0; 6], vec![0.5; 18]);
    let mut out = vec![0.0; 18];
    unsafe {
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(gatr_model_load(c_path.as_ptr(), &mut model), GatrStatus::Ok);
        assert_eq!(gatr_model_fixed_bodies(model), 4);
        let status = gatr_model_predict(model, 1, 6, m.as_ptr(), p.as_ptr(), p.as_ptr(), out.as_mut_ptr());
        assert_eq!(status, GatrStatus::InvalidArgument);
        assert!(last_error().contains("4 bodies"));
        gatr_model_free(model);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gatr.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["gatr_geometric_product", "gatr_model_load", "gatr_model_predict", "gatr_last_error"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

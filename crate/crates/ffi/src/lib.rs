//! C interface to the algebra and to trained n-body models.
//!
//! Multivectors cross the boundary as arrays of 16 doubles in the storage
//! order `1, e0, e1, e2, e3, e01, e02, e03, e12, e13, e23, e012, e013, e023,
//! e123, e0123`. Every fallible function returns a [`GatrStatus`]; the message
//! of the most recent failure on the calling thread is available from
//! [`gatr_last_error`]. Models are opaque handles owned by the caller and
//! released with [`gatr_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use gatr::cli::RunRecord;
use gatr::ga::{embed_point, embed_translation, extract_point, Multivector, Parity, Versor, N_BLADES};
use gatr::model::read_checkpoint;
use gatr::nbody::{predict, ModelSpec, NBodySample};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GatrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Runtime = 5,
    Panic = 6,
}

/// A trained model loaded from a checkpoint.
pub struct GatrModel {
    record: RunRecord,
    params: gatr::autodiff::ParamStore<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

type Outcome = Result<(), (GatrStatus, String)>;

fn guard(f: impl FnOnce() -> Outcome) -> GatrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GatrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GatrStatus::Panic
        }
    }
}

fn null(what: &str) -> (GatrStatus, String) {
    (GatrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_mv(p: *const f64, what: &str) -> Result<Multivector<f64>, (GatrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(Multivector::from_slice(slice::from_raw_parts(p, N_BLADES)))
}

unsafe fn write_mv(p: *mut f64, m: &Multivector<f64>) -> Outcome {
    if p.is_null() {
        return Err(null("out"));
    }
    slice::from_raw_parts_mut(p, N_BLADES).copy_from_slice(m.coeffs());
    Ok(())
}

unsafe fn binary(a: *const f64, b: *const f64, out: *mut f64, op: fn(&Multivector<f64>, &Multivector<f64>) -> Multivector<f64>) -> GatrStatus {
    guard(|| {
        let (a, b) = (read_mv(a, "a")?, read_mv(b, "b")?);
        write_mv(out, &op(&a, &b))
    })
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gatr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `a`, `b` and `out` must point to 16 doubles each.
#[no_mangle]
pub unsafe extern "C" fn gatr_geometric_product(a: *const f64, b: *const f64, out: *mut f64) -> GatrStatus {
    binary(a, b, out, Multivector::geometric_product)
}

/// # Safety
/// `a`, `b` and `out` must point to 16 doubles each.
#[no_mangle]
pub unsafe extern "C" fn gatr_wedge(a: *const f64, b: *const f64, out: *mut f64) -> GatrStatus {
    binary(a, b, out, Multivector::wedge)
}

/// # Safety
/// `a`, `b` and `out` must point to 16 doubles each.
#[no_mangle]
pub unsafe extern "C" fn gatr_join(a: *const f64, b: *const f64, out: *mut f64) -> GatrStatus {
    binary(a, b, out, Multivector::join)
}

/// # Safety
/// `a` and `b` must point to 16 doubles each and `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn gatr_inner(a: *const f64, b: *const f64, out: *mut f64) -> GatrStatus {
    guard(|| {
        let (a, b) = (read_mv(a, "a")?, read_mv(b, "b")?);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = a.inner(&b);
        Ok(())
    })
}

/// # Safety
/// `x` and `out` must point to 16 doubles each.
#[no_mangle]
pub unsafe extern "C" fn gatr_dual(x: *const f64, out: *mut f64) -> GatrStatus {
    guard(|| write_mv(out, &read_mv(x, "x")?.dual()))
}

/// Applies the versor `u` to `x` by the sandwich product. The parity of `u`
/// is read off its grades; mixed-parity input is rejected.
///
/// # Safety
/// `u`, `x` and `out` must point to 16 doubles each.
#[no_mangle]
pub unsafe extern "C" fn gatr_sandwich(u: *const f64, x: *const f64, out: *mut f64) -> GatrStatus {
    guard(|| {
        let (u, x) = (read_mv(u, "u")?, read_mv(x, "x")?);
        let versor = Versor::new(u, Parity::Even)
            .or_else(|_| Versor::new(u, Parity::Odd))
            .map_err(|e| (GatrStatus::InvalidArgument, e.to_string()))?;
        let y = versor.sandwich(&x).map_err(|e| (GatrStatus::InvalidArgument, e.to_string()))?;
        write_mv(out, &y)
    })
}

/// # Safety
/// `p` must point to 3 doubles and `out` to 16.
#[no_mangle]
pub unsafe extern "C" fn gatr_embed_point(p: *const f64, out: *mut f64) -> GatrStatus {
    guard(|| {
        if p.is_null() {
            return Err(null("p"));
        }
        let p = slice::from_raw_parts(p, 3);
        write_mv(out, &embed_point([p[0], p[1], p[2]]))
    })
}

/// # Safety
/// `t` must point to 3 doubles and `out` to 16.
#[no_mangle]
pub unsafe extern "C" fn gatr_embed_translation(t: *const f64, out: *mut f64) -> GatrStatus {
    guard(|| {
        if t.is_null() {
            return Err(null("t"));
        }
        let t = slice::from_raw_parts(t, 3);
        write_mv(out, embed_translation([t[0], t[1], t[2]]).mv())
    })
}

/// Fails with `InvalidArgument` for points at infinity.
///
/// # Safety
/// `x` must point to 16 doubles and `out` to 3.
#[no_mangle]
pub unsafe extern "C" fn gatr_extract_point(x: *const f64, out: *mut f64) -> GatrStatus {
    guard(|| {
        let x = read_mv(x, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = extract_point(&x).map_err(|e| (GatrStatus::InvalidArgument, e.to_string()))?;
        slice::from_raw_parts_mut(out, 3).copy_from_slice(&p);
        Ok(())
    })
}

/// Loads a checkpoint written by `gatr train`. On success `*out` owns a new
/// handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gatr_model_load(path: *const c_char, out: *mut *mut GatrModel) -> GatrStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| (GatrStatus::InvalidArgument, e.to_string()))?;
        let file = File::open(path).map_err(|e| (GatrStatus::Io, format!("{path}: {e}")))?;
        let ckpt = read_checkpoint(&mut BufReader::new(file)).map_err(|e| (GatrStatus::Format, e.to_string()))?;
        let record: RunRecord =
            serde_json::from_str(&ckpt.config).map_err(|e| (GatrStatus::Format, e.to_string()))?;
        *out = Box::into_raw(Box::new(GatrModel {
            record,
            params: ckpt.params,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`gatr_model_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gatr_model_free(model: *mut GatrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable values, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gatr_model_param_count(model: *const GatrModel) -> usize {
    model.as_ref().map(|m| m.params.n_values()).unwrap_or(0)
}

/// Number of bodies the model accepts, or 0 if it accepts any count.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gatr_model_fixed_bodies(model: *const GatrModel) -> usize {
    match model.as_ref().map(|m| &m.record.spec) {
        Some(ModelSpec::Mlp(c)) => c.n_bodies,
        _ => 0,
    }
}

/// Predicts final positions of `n_samples` systems of `n_bodies` bodies.
/// `masses` holds `n_samples * n_bodies` values, `pos`, `vel` and `out_pos`
/// hold `n_samples * n_bodies * 3` values (x, y, z per body).
///
/// # Safety
/// All pointers must be valid for the sizes above and `model` a live handle.
#[no_mangle]
pub unsafe extern "C" fn gatr_model_predict(
    model: *const GatrModel,
    n_samples: usize,
    n_bodies: usize,
    masses: *const f64,
    pos: *const f64,
    vel: *const f64,
    out_pos: *mut f64,
) -> GatrStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if masses.is_null() || pos.is_null() || vel.is_null() || out_pos.is_null() {
            return Err(null("an input or output array"));
        }
        if n_samples == 0 || n_bodies == 0 {
            return Err((GatrStatus::InvalidArgument, "empty batch".into()));
        }
        model
            .record
            .spec
            .check_bodies(n_bodies)
            .map_err(|e| (GatrStatus::InvalidArgument, e.to_string()))?;
        let m = slice::from_raw_parts(masses, n_samples * n_bodies);
        let p = slice::from_raw_parts(pos, n_samples * n_bodies * 3);
        let v = slice::from_raw_parts(vel, n_samples * n_bodies * 3);
        let vec3 = |s: &[f64], i: usize| [s[3 * i], s[3 * i + 1], s[3 * i + 2]];
        let samples: Vec<NBodySample> = (0..n_samples)
            .map(|k| {
                let bodies = k * n_bodies..(k + 1) * n_bodies;
                let pos0: Vec<_> = bodies.clone().map(|i| vec3(p, i)).collect();
                NBodySample {
                    masses: m[bodies.clone()].to_vec(),
                    vel0: bodies.map(|i| vec3(v, i)).collect(),
                    pos1: pos0.clone(),
                    pos0,
                }
            })
            .collect();
        if let Some(bad) = samples.iter().find_map(|s| s.validate().err()) {
            return Err((GatrStatus::InvalidArgument, bad.to_string()));
        }
        let (preds, _) = predict(&model.record.spec, &model.params, &samples, model.record.eval.precision, false)
            .map_err(|e| (GatrStatus::Runtime, e.to_string()))?;
        let out = slice::from_raw_parts_mut(out_pos, n_samples * n_bodies * 3);
        for (chunk, x) in out.chunks_exact_mut(3).zip(preds.iter().flatten()) {
            chunk.copy_from_slice(x);
        }
        Ok(())
    })
}

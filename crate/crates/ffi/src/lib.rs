//! C interface to the qdsfluct library.
//!
//! Models are opaque handles created from JSON text or a file and released
//! with `qds_model_free`. Every fallible call returns a `QdsStatus`; on
//! failure `qds_last_error_message` describes the error on the calling
//! thread. Matrices cross the boundary row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use qdsfluct::davies::{ModelFile, WeakCouplingModel};
use qdsfluct::fcs;
use qdsfluct::{Error, Tolerances};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QdsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid input or failed hypothesis.
    Invalid = 2,
    Numerical = 3,
    Io = 4,
    /// A string argument is not UTF-8.
    Utf8 = 5,
    /// An output buffer has the wrong length.
    BufferSize = 6,
    Panic = 7,
}

/// Opaque model handle.
pub struct QdsModel {
    model: WeakCouplingModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> QdsStatus {
    match e.exit_code() {
        2 => QdsStatus::Invalid,
        4 => QdsStatus::Io,
        _ => QdsStatus::Numerical,
    }
}

struct Failure(QdsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QdsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            QdsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QdsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(QdsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(QdsStatus::Utf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(p: *const QdsModel) -> Result<&'a WeakCouplingModel, Failure> {
    p.as_ref().map(|m| &m.model).ok_or_else(|| null("model"))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len != expected {
        return Err(Failure(QdsStatus::BufferSize, format!("{what} has length {len}, expected {expected}")));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn store(out: *mut *mut QdsModel, file: Result<ModelFile, Error>) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = std::ptr::null_mut();
    let model = file?.build(&Tolerances::default())?;
    *out = Box::into_raw(Box::new(QdsModel { model }));
    Ok(())
}

/// Builds a model from JSON text. On success `*out` owns a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qds_model_from_json(json: *const c_char, out: *mut *mut QdsModel) -> QdsStatus {
    guard(|| {
        let json = text(json, "json")?;
        store(out, ModelFile::from_json(json))
    })
}

/// Builds a model from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qds_model_from_file(path: *const c_char, out: *mut *mut QdsModel) -> QdsStatus {
    guard(|| {
        let path = text(path, "path")?;
        store(out, ModelFile::load(Path::new(path)))
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must come from a constructor above and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qds_model_free(model: *mut QdsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hilbert-space dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qds_model_dim(model: *const QdsModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.dim())
}

/// Number of reservoirs, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qds_model_reservoirs(model: *const QdsModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.num_reservoirs())
}

/// e(alpha) for one deformation vector of length `len` (the number of
/// reservoirs).
///
/// # Safety
/// `alpha` must point to `len` doubles and `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn qds_cgf(model: *const QdsModel, alpha: *const f64, len: usize, out: *mut f64) -> QdsStatus {
    guard(|| {
        let m = handle(model)?;
        let alpha = input(alpha, len, "alpha")?;
        let out = output(out, 1, 1, "out")?;
        out[0] = fcs::cgf(m, alpha)?;
        Ok(())
    })
}

/// Steady state, row-major real and imaginary parts of length dim².
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles each.
#[no_mangle]
pub unsafe extern "C" fn qds_steady_state(model: *const QdsModel, re: *mut f64, im: *mut f64, len: usize) -> QdsStatus {
    guard(|| {
        let m = handle(model)?;
        let d = m.dim();
        let re = output(re, len, d * d, "re")?;
        let im = output(im, len, d * d, "im")?;
        let rho = fcs::steady_state(m)?;
        for i in 0..d {
            for j in 0..d {
                re[i * d + j] = rho.get(i, j).re;
                im[i * d + j] = rho.get(i, j).im;
            }
        }
        Ok(())
    })
}

/// Mean entropy rates, one per reservoir.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qds_mean_entropy_rates(model: *const QdsModel, out: *mut f64, len: usize) -> QdsStatus {
    guard(|| {
        let m = handle(model)?;
        let out = output(out, len, m.num_reservoirs(), "out")?;
        out.copy_from_slice(&fcs::fluxes(m)?.mean_entropy_rates());
        Ok(())
    })
}

/// Steady-state entropy production rate.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn qds_entropy_production_rate(model: *const QdsModel, out: *mut f64) -> QdsStatus {
    guard(|| {
        let m = handle(model)?;
        let out = output(out, 1, 1, "out")?;
        out[0] = fcs::entropy_production_rate(m)?;
        Ok(())
    })
}

/// max |e(1 − alpha) − e(alpha)| over `points` deformation vectors stored
/// row-major in `grid` (points × reservoirs doubles).
///
/// # Safety
/// `grid` must point to `points * reservoirs` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn qds_es_residual(
    model: *const QdsModel,
    grid: *const f64,
    points: usize,
    out: *mut f64,
) -> QdsStatus {
    guard(|| {
        let m = handle(model)?;
        let r = m.num_reservoirs();
        let flat = input(grid, points * r, "grid")?;
        let out = output(out, 1, 1, "out")?;
        let grid: Vec<Vec<f64>> = flat.chunks(r).map(<[f64]>::to_vec).collect();
        out[0] = fcs::es_symmetry_residual(m, &grid)?.residual;
        Ok(())
    })
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn qds_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn qds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

//! C interface to `conformal-reach`.
//!
//! Every fallible function returns a [`CrStatus`]. On failure the message is
//! kept per thread and can be fetched with [`cr_last_error_message`].
//! Handles are opaque and owned by the caller; release them with the matching
//! `*_free` function. Strings returned by the library are released with
//! [`cr_string_free`].
//!
//! Point sets are passed row-major: `count` rows of `dim` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use conformal_reach::bounds;
use conformal_reach::christoffel::{ChristoffelModel, FitOptions, TransductiveContext};
use conformal_reach::conformal::{calibrate, calibrate_robust, transductive_p_value, ReachSetEstimate};
use conformal_reach::monomials::MonomialBasis;
use conformal_reach::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument or precondition (domain, sizes, budget).
    InvalidArgument = 2,
    /// Numerical failure, e.g. a singular moment matrix.
    Numerical = 3,
    /// Malformed JSON or text.
    Parse = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Fitted score function.
pub struct CrModel(ChristoffelModel);

/// Calibrated reach-set estimate.
pub struct CrEstimate(ReachSetEstimate);

/// Transductive scoring context.
pub struct CrTransductive(TransductiveContext);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(CrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numerical() {
            CrStatus::Numerical
        } else {
            match e {
                Error::Json(_) | Error::Malformed(_) | Error::Csv(_) | Error::Io(_) => CrStatus::Parse,
                _ => CrStatus::InvalidArgument,
            }
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CrStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside conformal-reach".into());
            CrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn point<'a>(x: *const f64, dim: usize) -> Result<&'a [f64], Failure> {
    if x.is_null() {
        return Err(null("point"));
    }
    Ok(std::slice::from_raw_parts(x, dim))
}

unsafe fn rows(data: *const f64, count: usize, dim: usize) -> Result<Vec<Vec<f64>>, Failure> {
    if dim == 0 {
        return Err(Failure(CrStatus::InvalidArgument, "dim must be at least 1".into()));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if data.is_null() {
        return Err(null("points"));
    }
    let len = count
        .checked_mul(dim)
        .ok_or_else(|| Failure(CrStatus::InvalidArgument, "count * dim overflows".into()))?;
    Ok(std::slice::from_raw_parts(data, len).chunks(dim).map(<[f64]>::to_vec).collect())
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null("string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(CrStatus::Parse, "string is not UTF-8".into()))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(CrStatus::Parse, "interior NUL in output".into()))
}

fn options(rescale: bool, ridge: f64) -> FitOptions {
    FitOptions {
        rescale,
        ridge,
        ..FitOptions::default()
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Fit a model of degree `degree` on `count` points of dimension `dim`.
///
/// # Safety
/// `points` must hold `count * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_model_fit(
    points: *const f64,
    count: usize,
    dim: usize,
    degree: usize,
    rescale: bool,
    ridge: f64,
    out: *mut *mut CrModel,
) -> CrStatus {
    guard(|| {
        let data = rows(points, count, dim)?;
        let basis = MonomialBasis::new(dim, degree)?;
        let model = ChristoffelModel::fit(&data, basis, options(rescale, ridge))?;
        write(out, Box::into_raw(Box::new(CrModel(model))))
    })
}

/// # Safety
/// `model` must be a live handle; `x` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_model_score(model: *const CrModel, x: *const f64, dim: usize, out: *mut f64) -> CrStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let s = m.0.score(point(x, dim)?)?;
        write(out, s)
    })
}

/// # Safety
/// `model` must be a live handle; free `*out` with [`cr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cr_model_to_json(model: *const CrModel, out: *mut *mut c_char) -> CrStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, c_string(m.0.to_json()?)?)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cr_model_from_json(json: *const c_char, out: *mut *mut CrModel) -> CrStatus {
    guard(|| {
        let model = ChristoffelModel::from_json(text(json)?)?;
        write(out, Box::into_raw(Box::new(CrModel(model))))
    })
}

/// # Safety
/// `model` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cr_model_free(model: *mut CrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Split-conformal calibration (rank 1) at failure probability `delta`.
/// The model is copied; the handle stays usable.
///
/// # Safety
/// `model` must be a live handle; `points` must hold `count * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_calibrate(
    model: *const CrModel,
    points: *const f64,
    count: usize,
    dim: usize,
    delta: f64,
    out: *mut *mut CrEstimate,
) -> CrStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let cal = rows(points, count, dim)?;
        let est = calibrate(m.0.clone(), &cal, delta)?;
        write(out, Box::into_raw(Box::new(CrEstimate(est))))
    })
}

/// Calibration tolerating up to `p` outliers, guaranteed at coverage error
/// `epsilon`.
///
/// # Safety
/// As for [`cr_calibrate`].
#[no_mangle]
pub unsafe extern "C" fn cr_calibrate_robust(
    model: *const CrModel,
    points: *const f64,
    count: usize,
    dim: usize,
    p: usize,
    epsilon: f64,
    out: *mut *mut CrEstimate,
) -> CrStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let cal = rows(points, count, dim)?;
        let est = calibrate_robust(m.0.clone(), &cal, p, epsilon)?;
        write(out, Box::into_raw(Box::new(CrEstimate(est))))
    })
}

/// # Safety
/// `estimate` must be a live handle; `x` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_estimate_contains(
    estimate: *const CrEstimate,
    x: *const f64,
    dim: usize,
    out: *mut bool,
) -> CrStatus {
    guard(|| {
        let e = deref(estimate, "estimate")?;
        let inside = e.0.contains(point(x, dim)?)?;
        write(out, inside)
    })
}

/// # Safety
/// `estimate` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cr_estimate_threshold(estimate: *const CrEstimate, out: *mut f64) -> CrStatus {
    guard(|| write(out, deref(estimate, "estimate")?.0.threshold()))
}

/// Coverage error and confidence of the estimate's guarantee.
///
/// # Safety
/// `estimate` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cr_estimate_guarantee(
    estimate: *const CrEstimate,
    epsilon: *mut f64,
    confidence: *mut f64,
) -> CrStatus {
    guard(|| {
        let g = deref(estimate, "estimate")?.0.guarantee().clone();
        write(epsilon, g.epsilon)?;
        write(confidence, g.confidence())
    })
}

/// # Safety
/// `estimate` must be a live handle; free `*out` with [`cr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cr_estimate_to_json(estimate: *const CrEstimate, out: *mut *mut c_char) -> CrStatus {
    guard(|| {
        let e = deref(estimate, "estimate")?;
        write(out, c_string(e.0.to_json()?)?)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cr_estimate_from_json(json: *const c_char, out: *mut *mut CrEstimate) -> CrStatus {
    guard(|| {
        let est = ReachSetEstimate::from_json(text(json)?)?;
        write(out, Box::into_raw(Box::new(CrEstimate(est))))
    })
}

/// # Safety
/// `estimate` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cr_estimate_free(estimate: *mut CrEstimate) {
    if !estimate.is_null() {
        drop(Box::from_raw(estimate));
    }
}

/// Build a transductive context over `count` training points.
///
/// # Safety
/// `points` must hold `count * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_transductive_new(
    points: *const f64,
    count: usize,
    dim: usize,
    degree: usize,
    rescale: bool,
    ridge: f64,
    out: *mut *mut CrTransductive,
) -> CrStatus {
    guard(|| {
        let data = rows(points, count, dim)?;
        let basis = MonomialBasis::new(dim, degree)?;
        let ctx = TransductiveContext::new(&data, basis, options(rescale, ridge))?;
        write(out, Box::into_raw(Box::new(CrTransductive(ctx))))
    })
}

/// Transductive p-value `count / total` of `x`.
///
/// # Safety
/// `ctx` must be a live handle; `x` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_transductive_p_value(
    ctx: *const CrTransductive,
    x: *const f64,
    dim: usize,
    count: *mut usize,
    total: *mut usize,
) -> CrStatus {
    guard(|| {
        let c = deref(ctx, "context")?;
        let pv = transductive_p_value(&c.0, point(x, dim)?)?;
        write(count, pv.count)?;
        write(total, pv.total)
    })
}

/// # Safety
/// `ctx` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cr_transductive_free(ctx: *mut CrTransductive) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// `ε = 1 − δ^{1/N}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_split_epsilon(n_cal: usize, delta: f64, out: *mut f64) -> CrStatus {
    guard(|| write(out, bounds::split_epsilon(n_cal, delta)?))
}

/// `δ = (1 − ε)^N`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_split_delta(n_cal: usize, epsilon: f64, out: *mut f64) -> CrStatus {
    guard(|| write(out, bounds::split_delta(n_cal, epsilon)?))
}

/// Confidence of the rank-(p+1) threshold at coverage error `epsilon`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_robust_confidence(n_cal: usize, p: usize, epsilon: f64, out: *mut f64) -> CrStatus {
    guard(|| write(out, bounds::robust_confidence(n_cal, p, epsilon)?))
}

/// Baseline sample-complexity ε for `n_samples` points.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_baseline_epsilon(
    n_samples: usize,
    dimension: usize,
    degree: usize,
    delta: f64,
    out: *mut f64,
) -> CrStatus {
    guard(|| write(out, bounds::conjecture_baseline_epsilon(n_samples, dimension, degree, delta)?))
}

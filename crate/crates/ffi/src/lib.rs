//! C ABI over `eifcheck`.
//!
//! Distributions and influence functions are opaque heap handles released
//! with their `_free` function. Every fallible call returns an
//! [`EifStatus`]; on failure a message is kept per thread and can be copied
//! out with [`eif_last_error`]. Parameters, shapes and suite configurations
//! cross the boundary as JSON strings in the same format as the CLI config.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eifcheck::generate::{derive_seed, generate, Shape};
use eifcheck::tangent::{random_score, DEFAULT_SUP_BOUND};
use eifcheck::verify::{model_score, riesz_check, run_suite, CheckSuiteConfig};
use eifcheck::{influence, psi, Error, FactorizedDistribution, InfluenceFunction, ParameterSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EifStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Domain = 4,
    Positivity = 5,
    Precondition = 6,
    Model = 7,
    Degenerate = 8,
    Invalid = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Opaque distribution handle.
pub struct EifDistribution {
    inner: FactorizedDistribution,
}

/// Opaque influence-function handle.
pub struct EifInfluence {
    inner: InfluenceFunction,
    variance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> EifStatus {
    match e {
        Error::Domain(_) => EifStatus::Domain,
        Error::Positivity { .. } => EifStatus::Positivity,
        Error::Precondition(_) => EifStatus::Precondition,
        Error::Model(_) => EifStatus::Model,
        Error::Degenerate(_) => EifStatus::Degenerate,
        Error::Invalid(_) => EifStatus::Invalid,
        Error::Io(_) => EifStatus::Io,
        Error::Json(_) | Error::Csv(_) => EifStatus::Parse,
    }
}

type FfiResult<T> = Result<T, EifStatus>;

fn fail(status: EifStatus, msg: impl Into<String>) -> EifStatus {
    set_error(msg);
    status
}

fn lib_err(e: Error) -> EifStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

/// Runs `f`, turning panics into [`EifStatus::Panic`].
fn guard(f: impl FnOnce() -> FfiResult<()>) -> EifStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EifStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(EifStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(fail(EifStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EifStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| fail(EifStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| fail(EifStatus::NullPointer, format!("{what} is null")))
}

macro_rules! parse_json {
    ($text:expr, $what:expr) => {
        serde_json::from_str($text).map_err(|e| fail(EifStatus::Parse, format!("{}: {e}", $what)))
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eif_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in bytes,
/// excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn eif_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a distribution file (JSON text).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eif_distribution_from_json(
    json: *const c_char,
    out: *mut *mut EifDistribution,
) -> EifStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let inner = FactorizedDistribution::from_json(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EifDistribution { inner }));
        Ok(())
    })
}

/// Seeded random distribution of the given shape (JSON, e.g.
/// `{"family": "point", "w_levels": 3}`).
///
/// # Safety
/// `shape_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eif_distribution_generate(
    shape_json: *const c_char,
    seed: u64,
    out: *mut *mut EifDistribution,
) -> EifStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let shape: Shape = parse_json!(str_arg(shape_json, "shape_json")?, "shape")?;
        let inner = generate(&shape, seed).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EifDistribution { inner }));
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eif_distribution_free(d: *mut EifDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of outcome points.
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eif_distribution_num_points(
    d: *const EifDistribution,
    out: *mut usize,
) -> EifStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(d, "distribution")?.inner.num_points();
        Ok(())
    })
}

/// Joint probabilities in flat order (first variable most significant).
/// Writes `min(len, num_points)` values and stores the point count in
/// `written`; returns `BufferTooSmall` when `len` is short.
///
/// # Safety
/// `d` must be a live handle; `buf` must hold `len` doubles; `written` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn eif_distribution_joint(
    d: *const EifDistribution,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> EifStatus {
    guard(|| copy_out(ref_arg(d, "distribution")?.inner.joint(), buf, len, written))
}

unsafe fn copy_out(
    values: &[f64],
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> FfiResult<()> {
    let written = out_arg(written, "written")?;
    *written = values.len();
    if buf.is_null() && len > 0 {
        return Err(fail(EifStatus::NullPointer, "buf is null"));
    }
    let n = values.len().min(len);
    if n > 0 {
        ptr::copy_nonoverlapping(values.as_ptr(), buf, n);
    }
    if len < values.len() {
        return Err(fail(
            EifStatus::BufferTooSmall,
            format!("buffer holds {len} of {} values", values.len()),
        ));
    }
    Ok(())
}

unsafe fn parameter(json: *const c_char) -> FfiResult<ParameterSpec> {
    parse_json!(str_arg(json, "parameter_json")?, "parameter")
}

/// `Psi(P)` for a parameter given as JSON (e.g. `{"kind": "tsm"}`).
///
/// # Safety
/// `d` must be a live handle; `parameter_json` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eif_psi(
    d: *const EifDistribution,
    parameter_json: *const c_char,
    out: *mut f64,
) -> EifStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = parameter(parameter_json)?;
        *out = psi(&ref_arg(d, "distribution")?.inner, &spec).map_err(lib_err)?;
        Ok(())
    })
}

/// Builds `D*(P)` for a parameter given as JSON.
///
/// # Safety
/// `d` must be a live handle; `parameter_json` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eif_influence_new(
    d: *const EifDistribution,
    parameter_json: *const c_char,
    out: *mut *mut EifInfluence,
) -> EifStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = parameter(parameter_json)?;
        let p = &ref_arg(d, "distribution")?.inner;
        let inner = influence(p, &spec).map_err(lib_err)?;
        let variance = inner.variance(p);
        *out = Box::into_raw(Box::new(EifInfluence { inner, variance }));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eif_influence_free(f: *mut EifInfluence) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `Psi(P)` and `Var_P(D*)` stored with the influence function.
///
/// # Safety
/// `f` must be a live handle; `psi` and `variance` writable.
#[no_mangle]
pub unsafe extern "C" fn eif_influence_summary(
    f: *const EifInfluence,
    psi: *mut f64,
    variance: *mut f64,
) -> EifStatus {
    guard(|| {
        let f = ref_arg(f, "influence")?;
        *out_arg(psi, "psi")? = f.inner.psi;
        *out_arg(variance, "variance")? = f.variance;
        Ok(())
    })
}

/// The `D*` table in flat outcome order; same buffer protocol as
/// [`eif_distribution_joint`].
///
/// # Safety
/// `f` must be a live handle; `buf` must hold `len` doubles; `written`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn eif_influence_values(
    f: *const EifInfluence,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> EifStatus {
    guard(|| copy_out(&ref_arg(f, "influence")?.inner.total, buf, len, written))
}

/// Number of named components.
///
/// # Safety
/// `f` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eif_influence_num_components(
    f: *const EifInfluence,
    out: *mut usize,
) -> EifStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(f, "influence")?.inner.components.len();
        Ok(())
    })
}

/// Values of component `index`; same buffer protocol as
/// [`eif_distribution_joint`].
///
/// # Safety
/// `f` must be a live handle; `buf` must hold `len` doubles; `written`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn eif_influence_component(
    f: *const EifInfluence,
    index: usize,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> EifStatus {
    guard(|| {
        let f = ref_arg(f, "influence")?;
        let c =
            f.inner.components.get(index).ok_or_else(|| {
                fail(EifStatus::Domain, format!("component {index} out of range"))
            })?;
        copy_out(&c.values, buf, len, written)
    })
}

/// Riesz check of `D*` against `n_scores` seeded random scores at step `h`;
/// stores the largest absolute error.
///
/// # Safety
/// `d` must be a live handle; `parameter_json` NUL-terminated;
/// `max_abs_error` writable.
#[no_mangle]
pub unsafe extern "C" fn eif_riesz_check(
    d: *const EifDistribution,
    parameter_json: *const c_char,
    seed: u64,
    n_scores: usize,
    h: f64,
    max_abs_error: *mut f64,
) -> EifStatus {
    guard(|| {
        let out = out_arg(max_abs_error, "max_abs_error")?;
        let spec = parameter(parameter_json)?;
        let p = &ref_arg(d, "distribution")?.inner;
        let scores = (0..n_scores)
            .map(|j| {
                random_score(p, derive_seed(seed, j as u64), DEFAULT_SUP_BOUND)
                    .map(|s| model_score(p, &spec, &s))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(lib_err)?;
        *out = riesz_check(p, &spec, &scores, h, f64::INFINITY, seed)
            .map_err(lib_err)?
            .max_abs_error;
        Ok(())
    })
}

/// Runs the verification suite for a JSON configuration (`"{}"` for the
/// defaults). On success `report_json` receives a string to release with
/// [`eif_string_free`], and `pass` is 1 when every check passed.
///
/// # Safety
/// `config_json` NUL-terminated; `report_json` and `pass` writable.
#[no_mangle]
pub unsafe extern "C" fn eif_run_suite(
    config_json: *const c_char,
    report_json: *mut *mut c_char,
    pass: *mut i32,
) -> EifStatus {
    guard(|| {
        let report_out = out_arg(report_json, "report_json")?;
        let pass = out_arg(pass, "pass")?;
        let config: CheckSuiteConfig =
            parse_json!(str_arg(config_json, "config_json")?, "suite config")?;
        let report = run_suite(&config).map_err(lib_err)?;
        let text = report.to_json().map_err(lib_err)?;
        *report_out = CString::new(text)
            .map_err(|e| fail(EifStatus::Invalid, e.to_string()))?
            .into_raw();
        *pass = i32::from(report.pass);
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eif_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

//! C ABI for the `aesf` library.
//!
//! Every fallible call returns an [`AesfStatus`] and writes its result through an
//! out-pointer. On failure the message is available from
//! [`aesf_last_error_message`] on the same thread until the next failing call.
//! Models and datasets are opaque handles released with their `_free` function.
//! Functionals are passed by name (`"kendall"`, `"phi_linear:square:sine"`, ...).
//! An absent y coordinate is a null `y` pointer.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aesf::closedform::{aesf, population_value, AesfRequest};
use aesf::numerics::{bvn_cdf, normal_cdf};
use aesf::sensitivity::{esf_mc, sf};
use aesf::{estimate, Dataset, Error, FunctionalId, ModelSpec, Point};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AesfStatus {
    Ok = 0,
    Error = 1,
    Parse = 2,
    Tie = 3,
    Unsupported = 4,
    Domain = 5,
    NullPointer = 6,
}

/// Monte Carlo ESF result.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AesfMcEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub n: usize,
    pub seed: u64,
    pub resampled: usize,
}

/// Opaque data-generating model.
pub struct AesfModel {
    spec: ModelSpec,
}

/// Opaque dataset of (x) or (x, y) observations.
pub struct AesfDataset {
    data: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AesfStatus {
    match e {
        Error::Parse(_) => AesfStatus::Parse,
        Error::Tie { .. } => AesfStatus::Tie,
        Error::Unsupported(_) => AesfStatus::Unsupported,
        Error::Domain(_) => AesfStatus::Domain,
        Error::Numeric(_) | Error::Io(_) => AesfStatus::Error,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, turning errors and panics into a status and a stored message.
fn guard<F: FnOnce() -> Result<(), Failure>>(body: F) -> AesfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AesfStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            AesfStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            AesfStatus::Error
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Parse(format!("{what} is not valid UTF-8"))))
}

unsafe fn functional(p: *const c_char) -> Result<FunctionalId, Failure> {
    Ok(text(p, "functional")?.parse::<FunctionalId>()?)
}

unsafe fn point(x: f64, y: *const f64) -> Point {
    Point { x, y: y.as_ref().copied() }
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aesf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aesf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a model from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aesf_model_from_json(json: *const c_char, out_model: *mut *mut AesfModel) -> AesfStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let spec = ModelSpec::from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(AesfModel { spec }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`aesf_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aesf_model_free(model: *mut AesfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Copies `n` observations into a new dataset. `ys` may be null for univariate data.
///
/// # Safety
/// `xs` (and `ys` when not null) must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn aesf_dataset_new(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    out_dataset: *mut *mut AesfDataset,
) -> AesfStatus {
    guard(|| {
        let slot = out(out_dataset, "out_dataset")?;
        *slot = ptr::null_mut();
        if xs.is_null() {
            return Err(Failure::Null("xs"));
        }
        let x = std::slice::from_raw_parts(xs, n).to_vec();
        let data = if ys.is_null() {
            Dataset::univariate(x)?
        } else {
            Dataset::bivariate(x, std::slice::from_raw_parts(ys, n).to_vec())?
        };
        *slot = Box::into_raw(Box::new(AesfDataset { data }));
        Ok(())
    })
}

/// Releases a dataset; null is ignored.
///
/// # Safety
/// `dataset` must come from [`aesf_dataset_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aesf_dataset_free(dataset: *mut AesfDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Evaluates the named estimator on a dataset.
///
/// # Safety
/// Pointers must be valid; `functional` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn aesf_estimate(
    dataset: *const AesfDataset,
    functional_name: *const c_char,
    out_value: *mut f64,
) -> AesfStatus {
    guard(|| {
        let ds = borrow(dataset, "dataset")?;
        let f = functional(functional_name)?;
        *out(out_value, "out_value")? = estimate(f, &ds.data)?;
        Ok(())
    })
}

/// Sensitivity function (n+1)·[R(F_{n+1}) − R(F_n)] of adding (x, y) to the dataset.
///
/// # Safety
/// Pointers must be valid; `y` may be null for univariate functionals.
#[no_mangle]
pub unsafe extern "C" fn aesf_sf(
    dataset: *const AesfDataset,
    functional_name: *const c_char,
    x: f64,
    y: *const f64,
    out_value: *mut f64,
) -> AesfStatus {
    guard(|| {
        let ds = borrow(dataset, "dataset")?;
        let f = functional(functional_name)?;
        *out(out_value, "out_value")? = sf(f, &ds.data, point(x, y))?;
        Ok(())
    })
}

/// Monte Carlo expected sensitivity function at sample size `n`.
///
/// # Safety
/// Pointers must be valid; `y` may be null for univariate functionals.
#[no_mangle]
pub unsafe extern "C" fn aesf_esf_mc(
    model: *const AesfModel,
    functional_name: *const c_char,
    n: usize,
    x: f64,
    y: *const f64,
    replicates: usize,
    seed: u64,
    out_estimate: *mut AesfMcEstimate,
) -> AesfStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let f = functional(functional_name)?;
        let e = esf_mc(f, &m.spec, n, point(x, y), replicates, seed)?;
        *out(out_estimate, "out_estimate")? = AesfMcEstimate {
            value: e.value,
            std_error: e.std_error,
            replicates: e.replicates,
            n: e.n,
            seed: e.seed,
            resampled: e.resampled,
        };
        Ok(())
    })
}

/// Closed-form asymptotic expected sensitivity function at (x, y).
///
/// # Safety
/// Pointers must be valid; `y` may be null for univariate functionals.
#[no_mangle]
pub unsafe extern "C" fn aesf_closed_form(
    model: *const AesfModel,
    functional_name: *const c_char,
    x: f64,
    y: *const f64,
    out_value: *mut f64,
) -> AesfStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let f = functional(functional_name)?;
        let req = AesfRequest { functional: f, model: m.spec, point: point(x, y) };
        *out(out_value, "out_value")? = aesf(&req)?;
        Ok(())
    })
}

/// Population value R(F) of the functional under the model.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn aesf_population_value(
    model: *const AesfModel,
    functional_name: *const c_char,
    out_value: *mut f64,
) -> AesfStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let f = functional(functional_name)?;
        *out(out_value, "out_value")? = population_value(f, &m.spec)?;
        Ok(())
    })
}

/// Standard normal CDF.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aesf_normal_cdf(z: f64, out_value: *mut f64) -> AesfStatus {
    guard(|| {
        *out(out_value, "out_value")? = normal_cdf(z)?;
        Ok(())
    })
}

/// Standard bivariate normal CDF P(X ≤ x, Y ≤ y) with correlation rho.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aesf_bvn_cdf(x: f64, y: f64, rho: f64, out_value: *mut f64) -> AesfStatus {
    guard(|| {
        *out(out_value, "out_value")? = bvn_cdf(x, y, rho)?;
        Ok(())
    })
}

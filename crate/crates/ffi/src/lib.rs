//! C interface to the risk-ratio estimators.
//!
//! Datasets live behind an opaque `RrDataset` handle created by
//! `rr_dataset_new`, `rr_dataset_load_csv` or `rr_simulate` and released
//! with `rr_dataset_free`. Every fallible call returns an `RrStatus`; on
//! failure `rr_last_error_message` describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use riskratio::dgp::{generate, true_rr, DgpKind, DgpSpec};
use riskratio::{
    estimate, CiStyle, Covariates, Error, ErrorClass, EstimatorConfig, ForestConfig, Method, NuisanceRecipe,
    ObservationalDataset,
};

/// Opaque dataset handle.
pub struct RrDataset {
    inner: ObservationalDataset,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Runtime = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrMethod {
    Neyman = 0,
    Ht = 1,
    Ipw = 2,
    G = 3,
    Os = 4,
    Aipw = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrNuisance {
    Parametric = 0,
    Forest = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrCiStyle {
    Wald = 0,
    LogDelta = 1,
    Katz = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RrEstimateOptions {
    pub method: RrMethod,
    pub nuisance: RrNuisance,
    /// Cross-fitting folds (one-step and AIPW).
    pub folds: usize,
    pub alpha: f64,
    pub ci_style: RrCiStyle,
    /// Propensity clipping level.
    pub eta: f64,
    pub seed: u64,
    /// Known treatment probability for Horvitz-Thompson.
    pub design_e: f64,
    pub n_trees: usize,
    pub min_leaf: usize,
}

/// Fields without a value (degenerate point, no variance) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RrResult {
    pub point: f64,
    pub v_hat: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n: usize,
    pub degenerate: bool,
    pub assumes_randomization: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RrStatus {
    match e.class() {
        ErrorClass::Validation => RrStatus::InvalidArgument,
        ErrorClass::Runtime => RrStatus::Runtime,
        ErrorClass::Io => RrStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (RrStatus, String)>) -> RrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            RrStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (RrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RrStatus, String) {
    (RrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (RrStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (RrStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn emit(out: *mut *mut RrDataset, d: ObservationalDataset) {
    *out = Box::into_raw(Box::new(RrDataset { inner: d }));
}

/// Message for the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a dataset from row-major covariates (`n * p` values), a 0/1
/// treatment vector and outcomes, all of length `n`.
///
/// # Safety
/// `x` must point to `n * p` doubles (may be null when `p == 0`), `t` and
/// `y` to `n` elements each, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_dataset_new(
    x: *const f64,
    n: usize,
    p: usize,
    t: *const u8,
    y: *const f64,
    out: *mut *mut RrDataset,
) -> RrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if (x.is_null() && p > 0) || t.is_null() || y.is_null() {
            return Err(null("input array"));
        }
        let xs = if p == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(x, n * p).to_vec()
        };
        let ts = std::slice::from_raw_parts(t, n);
        let mut tb = Vec::with_capacity(n);
        for (i, &v) in ts.iter().enumerate() {
            match v {
                0 => tb.push(false),
                1 => tb.push(true),
                _ => {
                    return Err((
                        RrStatus::InvalidArgument,
                        format!("treatment at row {i} is {v}, expected 0 or 1"),
                    ))
                }
            }
        }
        let ys = std::slice::from_raw_parts(y, n).to_vec();
        let cov = Covariates::from_row_major(xs, n, p).map_err(lib_err)?;
        let d = ObservationalDataset::new(cov, tb, ys).map_err(lib_err)?;
        emit(out, d);
        Ok(())
    })
}

/// Loads a CSV with columns `x1..xp, t, y`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_dataset_load_csv(path: *const c_char, out: *mut *mut RrDataset) -> RrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let d = ObservationalDataset::load_csv(path).map_err(lib_err)?;
        emit(out, d);
        Ok(())
    })
}

/// Releases a dataset. Null is a no-op.
///
/// # Safety
/// `d` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rr_dataset_free(d: *mut RrDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_dataset_n(d: *const RrDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.n())
}

/// Number of covariates, or 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_dataset_p(d: *const RrDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.p())
}

#[no_mangle]
pub extern "C" fn rr_estimate_options_default() -> RrEstimateOptions {
    let f = ForestConfig::default();
    RrEstimateOptions {
        method: RrMethod::Aipw,
        nuisance: RrNuisance::Parametric,
        folds: riskratio::pipeline::DEFAULT_FOLDS,
        alpha: riskratio::pipeline::DEFAULT_ALPHA,
        ci_style: RrCiStyle::Wald,
        eta: riskratio::nuisance::DEFAULT_CLIP,
        seed: 0,
        design_e: 0.5,
        n_trees: f.n_trees,
        min_leaf: f.min_leaf,
    }
}

fn config_from(o: &RrEstimateOptions) -> EstimatorConfig {
    let method = match o.method {
        RrMethod::Neyman => Method::Neyman,
        RrMethod::Ht => Method::Ht,
        RrMethod::Ipw => Method::Ipw,
        RrMethod::G => Method::G,
        RrMethod::Os => Method::Os,
        RrMethod::Aipw => Method::Aipw,
    };
    let mut recipe = match o.nuisance {
        RrNuisance::Parametric => NuisanceRecipe::parametric(),
        RrNuisance::Forest => NuisanceRecipe::forest(ForestConfig {
            n_trees: o.n_trees,
            min_leaf: o.min_leaf,
            seed: o.seed,
            ..ForestConfig::default()
        }),
    };
    recipe.clip = o.eta;
    EstimatorConfig {
        method,
        recipe,
        folds: o.folds,
        seed: o.seed,
        ci_style: match o.ci_style {
            RrCiStyle::Wald => CiStyle::Wald,
            RrCiStyle::LogDelta => CiStyle::LogDelta,
            RrCiStyle::Katz => CiStyle::Katz,
        },
        alpha: o.alpha,
        design_e: o.design_e,
    }
}

/// Estimates the risk ratio of `d` and fills `out`.
///
/// # Safety
/// `d` must be a live handle, `opts` readable (null means defaults) and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_estimate(
    d: *const RrDataset,
    opts: *const RrEstimateOptions,
    out: *mut RrResult,
) -> RrStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = opts.as_ref().copied().unwrap_or_else(|| rr_estimate_options_default());
        let cfg = config_from(&o);
        let r = estimate(&d.inner, &cfg).map_err(lib_err)?;
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = RrResult {
            point: r.point.value,
            v_hat: nan(r.v_hat),
            se: nan(r.se()),
            ci_lower: nan(r.ci_lower),
            ci_upper: nan(r.ci_upper),
            n: r.n,
            degenerate: r.point.degenerate,
            assumes_randomization: r.point.assumes_randomization,
        };
        Ok(())
    })
}

/// True risk ratio of a named synthetic design. `std_error` may be null;
/// it receives NaN when the value is exact.
///
/// # Safety
/// `dgp` must be a NUL-terminated string, `value` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_true_rr(
    dgp: *const c_char,
    draws: u64,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> RrStatus {
    guard(|| {
        let kind: DgpKind = read_str(dgp, "dgp")?.parse().map_err(lib_err)?;
        if value.is_null() {
            return Err(null("value"));
        }
        let t = true_rr(kind, draws, seed).map_err(lib_err)?;
        *value = t.value;
        if !std_error.is_null() {
            *std_error = t.std_error.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Draws `n` rows from a named synthetic design.
///
/// # Safety
/// `dgp` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_simulate(
    dgp: *const c_char,
    n: usize,
    seed: u64,
    noise_sd: f64,
    out: *mut *mut RrDataset,
) -> RrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind: DgpKind = read_str(dgp, "dgp")?.parse().map_err(lib_err)?;
        let s = generate(&DgpSpec::new(kind, n, seed).with_noise(noise_sd)).map_err(lib_err)?;
        emit(out, s.dataset);
        Ok(())
    })
}

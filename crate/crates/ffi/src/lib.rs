//! C ABI for the `wiks` crate.
//!
//! Every fallible function returns a [`WiksStatus`]; on failure the message
//! is available from [`wiks_last_error_message`] on the same thread until
//! the next failing call. Samples are passed as pointer plus length;
//! bivariate samples are interleaved `x0, y0, x1, y1, ...` with the length
//! counting points.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wiks::baselines::{classical_ks_test, wilcoxon_test, TestReport};
use wiks::calibration::{calibrate_wiks_null, CalibrationConfig};
use wiks::distributions::{Model, UnivariateModel};
use wiks::index::{threshold_from_losses, wiks, WeightSpec, WiksConfig, WiksEstimate};
use wiks::metrics::z_statistic;
use wiks::posterior::{DPPrior, ProductBase, Truncation};
use wiks::{Error, SeedSpec};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiksStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InvalidInput = 3,
    Degenerate = 4,
    ResourceLimit = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

/// Monte Carlo estimate of the index.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WiksEstimateResult {
    pub value: f64,
    pub mc_std_error: f64,
    pub draws: usize,
    /// Draws whose stick-breaking hit the atom cap.
    pub truncation_flag_count: usize,
}

/// Statistic and p-value of a classical test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WiksTestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Opaque tester: a prior plus Monte Carlo settings.
pub struct WiksTester {
    prior: DPPrior<UnivariateModel>,
    config: WiksConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WiksStatus {
    match e {
        Error::Parameter(_) => WiksStatus::InvalidParameter,
        Error::Input(_) | Error::Usage(_) => WiksStatus::InvalidInput,
        Error::Degenerate(_) => WiksStatus::Degenerate,
        Error::Resource(_) => WiksStatus::ResourceLimit,
        Error::Config(_) => WiksStatus::Config,
        Error::Io { .. } | Error::Parse { .. } => WiksStatus::Io,
    }
}

struct Failure(WiksStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(WiksStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording failures and panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WiksStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WiksStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            WiksStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn points<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [[f64; 2]], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p.cast::<[f64; 2]>(), len))
}

/// `None` for a null pointer.
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure(WiksStatus::InvalidInput, "string is not valid UTF-8".into()))
}

fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn estimate_result(e: WiksEstimate) -> WiksEstimateResult {
    WiksEstimateResult {
        value: e.value,
        mc_std_error: e.mc_std_error,
        draws: e.draws,
        truncation_flag_count: e.truncation_flag_count,
    }
}

fn test_result(r: TestReport) -> WiksTestResult {
    WiksTestResult {
        statistic: r.statistic,
        p_value: r.p_value.unwrap_or(f64::NAN),
    }
}

/// Message of the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn wiks_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wiks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a tester. `base` is a model string such as `"normal(0,1)"` and
/// `weight` a weight string such as `"power(4)"`; null selects the
/// defaults. `draws` is the number of posterior draw pairs.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wiks_tester_new(
    concentration: f64,
    base: *const c_char,
    weight: *const c_char,
    draws: usize,
    out: *mut *mut WiksTester,
) -> WiksStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let base = match opt_str(base)? {
            Some(s) => s.parse()?,
            None => UnivariateModel::standard_normal(),
        };
        let weight = match opt_str(weight)? {
            Some(s) => s.parse()?,
            None => WeightSpec::default(),
        };
        if draws == 0 {
            return Err(Failure(WiksStatus::InvalidParameter, "draws must be >= 1".into()));
        }
        let tester = WiksTester {
            prior: DPPrior::new(concentration, base)?,
            config: WiksConfig {
                weight,
                draws,
                truncation: Truncation::default(),
            },
        };
        out.write(Box::into_raw(Box::new(tester)));
        Ok(())
    })
}

/// Frees a tester; null is ignored.
///
/// # Safety
/// `tester` must come from [`wiks_tester_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wiks_tester_free(tester: *mut WiksTester) {
    if !tester.is_null() {
        drop(Box::from_raw(tester));
    }
}

/// Sets the stick-breaking truncation tolerance and atom cap.
///
/// # Safety
/// `tester` must be a live tester.
#[no_mangle]
pub unsafe extern "C" fn wiks_tester_set_truncation(
    tester: *mut WiksTester,
    eps: f64,
    max_atoms: usize,
) -> WiksStatus {
    guard(|| {
        let t = tester.as_mut().ok_or_else(|| null("tester"))?;
        let trunc = Truncation { eps, max_atoms };
        trunc.validate()?;
        t.config.truncation = trunc;
        Ok(())
    })
}

/// Estimates the index of two univariate samples.
///
/// # Safety
/// `x` and `y` must point to `n` and `m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wiks_tester_estimate(
    tester: *const WiksTester,
    x: *const f64,
    n: usize,
    y: *const f64,
    m: usize,
    seed: u64,
    out: *mut WiksEstimateResult,
) -> WiksStatus {
    guard(|| {
        let t = tester.as_ref().ok_or_else(|| null("tester"))?;
        let (x, y) = (slice(x, n, "x")?, slice(y, m, "y")?);
        let e = wiks(x, y, &t.prior, &t.config, SeedSpec::root(seed))?;
        write_out(out, estimate_result(e), "out")
    })
}

/// Estimates the index of two bivariate samples; the base measure is the
/// product of two copies of the tester's base.
///
/// # Safety
/// `x` and `y` must point to `2 n` and `2 m` doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn wiks_tester_estimate_bivariate(
    tester: *const WiksTester,
    x: *const f64,
    n: usize,
    y: *const f64,
    m: usize,
    seed: u64,
    out: *mut WiksEstimateResult,
) -> WiksStatus {
    guard(|| {
        let t = tester.as_ref().ok_or_else(|| null("tester"))?;
        let (x, y) = (points(x, n, "x")?, points(y, m, "y")?);
        let base = t.prior.base;
        let prior = DPPrior::new(t.prior.concentration, ProductBase(base, base))?;
        let e = wiks(x, y, &prior, &t.config, SeedSpec::root(seed))?;
        write_out(out, estimate_result(e), "out")
    })
}

/// Calibrates a threshold by simulating `replicates` null data sets of
/// sizes `n`, `m` from `null_model` (null selects the tester's base).
/// `budget_cap` bounds `replicates * draws`; 0 selects the default.
///
/// # Safety
/// `null_model` must be null or NUL-terminated; `threshold` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn wiks_tester_calibrate(
    tester: *const WiksTester,
    n: usize,
    m: usize,
    replicates: usize,
    alpha: f64,
    null_model: *const c_char,
    budget_cap: u64,
    seed: u64,
    threshold: *mut f64,
) -> WiksStatus {
    guard(|| {
        let t = tester.as_ref().ok_or_else(|| null("tester"))?;
        let null_model: Model = match opt_str(null_model)? {
            Some(s) => s.parse()?,
            None => t.prior.base.into(),
        };
        let mut config = CalibrationConfig {
            n,
            m,
            replicates,
            alpha,
            null_model,
            concentration: t.prior.concentration,
            ..Default::default()
        };
        if budget_cap > 0 {
            config.budget_cap = budget_cap;
        }
        let result = calibrate_wiks_null(&config, &t.prior, &t.config, SeedSpec::root(seed))?;
        write_out(threshold, result.threshold, "threshold")
    })
}

/// Bayes threshold `c1 / (c1 + c0)` for losses `c0` (wrong acceptance)
/// and `c1` (wrong rejection).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wiks_threshold_from_losses(c0: f64, c1: f64, out: *mut f64) -> WiksStatus {
    guard(|| write_out(out, threshold_from_losses(c0, c1)?, "out"))
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
///
/// # Safety
/// `x` and `y` must point to `n` and `m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wiks_ks_test(
    x: *const f64,
    n: usize,
    y: *const f64,
    m: usize,
    out: *mut WiksTestResult,
) -> WiksStatus {
    guard(|| {
        let r = classical_ks_test(slice(x, n, "x")?, slice(y, m, "y")?)?;
        write_out(out, test_result(r), "out")
    })
}

/// Wilcoxon rank-sum test, normal approximation; the statistic is the
/// Mann-Whitney `U` of `x`.
///
/// # Safety
/// `x` and `y` must point to `n` and `m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wiks_wilcoxon_test(
    x: *const f64,
    n: usize,
    y: *const f64,
    m: usize,
    out: *mut WiksTestResult,
) -> WiksStatus {
    guard(|| {
        let r = wilcoxon_test(slice(x, n, "x")?, slice(y, m, "y")?)?;
        write_out(out, test_result(r), "out")
    })
}

/// Supremum distance between the empirical CDFs shrunk by `k`.
///
/// # Safety
/// `x` and `y` must point to `n` and `m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wiks_z_statistic(
    x: *const f64,
    n: usize,
    y: *const f64,
    m: usize,
    k: f64,
    out: *mut f64,
) -> WiksStatus {
    guard(|| write_out(out, z_statistic(slice(x, n, "x")?, slice(y, m, "y")?, k)?, "out"))
}

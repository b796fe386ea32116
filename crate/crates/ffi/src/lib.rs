//! C interface to the retail-dr solvers.
//!
//! Scenario sets and solve reports are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`RdStatus`]; on failure [`rd_last_error`] describes the cause for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use retail_dr::analytics::{solve, Model, SolverSettings};
use retail_dr::consumer::best_response;
use retail_dr::scenario::{build_case, generate_scenarios, sample_spot};
use retail_dr::{Error, ScenarioSet, SolveReport};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad case data or scenario parameters.
    Config = 3,
    Solver = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdModel {
    Mpec = 0,
    EqMilp = 1,
    EqNlp = 2,
}

/// Opaque scenario set.
pub struct RdScenarioSet(ScenarioSet);

/// Opaque solve report.
pub struct RdReport(SolveReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut m = msg.into();
    m.retain(|c| c != '\0');
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(m).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> RdStatus {
    match e {
        Error::Solver(_) | Error::Equilibrium(_) | Error::Infeasible(_) | Error::TooLarge { .. } => {
            RdStatus::Solver
        }
        _ => RdStatus::Config,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (RdStatus, String)>) -> RdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RdStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {m}"));
            RdStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (RdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RdStatus, String) {
    (RdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (RdStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn rd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Draws `n` scenarios of a named case (`BM`, `A`, `B`, `Flexibility`)
/// around the bundled spot series.
///
/// # Safety
/// `case_name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_scenarios_generate(
    case_name: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut RdScenarioSet,
) -> RdStatus {
    guard(|| {
        if case_name.is_null() {
            return Err(null("case_name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(case_name)
            .to_str()
            .map_err(|_| (RdStatus::InvalidArgument, "case_name is not UTF-8".into()))?;
        let case = build_case(name).map_err(lib_err)?;
        let s = generate_scenarios(&sample_spot(), &case, n, seed).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RdScenarioSet(s)));
        Ok(())
    })
}

/// Builds a single-scenario set. `a` and `b` are consumer-major
/// (`consumers * hours` values each).
///
/// # Safety
/// Each array must hold the stated number of values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rd_scenarios_deterministic(
    hours: usize,
    consumers: usize,
    spot: *const f64,
    a: *const f64,
    b: *const f64,
    delta_max: *const f64,
    penalty_c: f64,
    out: *mut *mut RdScenarioSet,
) -> RdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if hours == 0 || consumers == 0 {
            return Err((RdStatus::InvalidArgument, "hours and consumers must be positive".into()));
        }
        let len = hours
            .checked_mul(consumers)
            .ok_or((RdStatus::InvalidArgument, "size overflow".to_string()))?;
        let spot = input(spot, hours, "spot")?;
        let a = input(a, len, "a")?;
        let b = input(b, len, "b")?;
        let d = input(delta_max, consumers, "delta_max")?;
        let rows = |m: &[f64]| m.chunks(hours).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let s = ScenarioSet::deterministic(spot, &rows(a), &rows(b), d.to_vec(), penalty_c)
            .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RdScenarioSet(s)));
        Ok(())
    })
}

/// # Safety
/// `set` must come from an `rd_scenarios_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn rd_scenarios_free(set: *mut RdScenarioSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// # Safety
/// `set` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn rd_scenarios_dims(
    set: *const RdScenarioSet,
    hours: *mut usize,
    consumers: *mut usize,
    scenarios: *mut usize,
) -> RdStatus {
    guard(|| {
        let s = &set.as_ref().ok_or_else(|| null("set"))?.0;
        for (p, v) in [(hours, s.hours()), (consumers, s.consumers()), (scenarios, s.scenarios())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Solves `set` with default settings and the given seed.
///
/// # Safety
/// `set` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_solve(
    set: *const RdScenarioSet,
    model: RdModel,
    seed: u64,
    out: *mut *mut RdReport,
) -> RdStatus {
    guard(|| {
        let s = &set.as_ref().ok_or_else(|| null("set"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut settings = SolverSettings::default();
        settings.mpec.seed = seed;
        settings.nlp.seed = seed;
        let m = match model {
            RdModel::Mpec => Model::Mpec,
            RdModel::EqMilp => Model::EqMilp,
            RdModel::EqNlp => Model::EqNlp,
        };
        let r = solve(m, s, &settings).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RdReport(r)));
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`rd_solve`], or be null.
#[no_mangle]
pub unsafe extern "C" fn rd_report_free(report: *mut RdReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

unsafe fn scalar(report: *const RdReport, out: *mut f64, f: impl FnOnce(&SolveReport) -> f64) -> RdStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f(r);
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_report_expected_profit(report: *const RdReport, out: *mut f64) -> RdStatus {
    scalar(report, out, |r| r.expected_profit)
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_report_total_welfare(report: *const RdReport, out: *mut f64) -> RdStatus {
    scalar(report, out, |r| r.total_welfare())
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_report_average_tariff(report: *const RdReport, out: *mut f64) -> RdStatus {
    scalar(report, out, |r| r.average_tariff())
}

/// Largest KKT residual of the reported point.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rd_report_max_residual(report: *const RdReport, out: *mut f64) -> RdStatus {
    scalar(report, out, |r| r.max_residual())
}

/// Copies the hourly tariff into `buf`. `len` is the capacity on entry; the
/// number of hours is stored in `*written` even when the buffer is too small.
///
/// # Safety
/// `buf` must hold `len` values; `report` and `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rd_report_tariff(
    report: *const RdReport,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> RdStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        if written.is_null() {
            return Err(null("written"));
        }
        let p = &r.tariff.p;
        *written = p.len();
        if len < p.len() {
            return Err((
                RdStatus::BufferTooSmall,
                format!("tariff needs {} values, buffer holds {len}", p.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        slice::from_raw_parts_mut(buf, p.len()).copy_from_slice(p);
        Ok(())
    })
}

/// One consumer's best response to prices `p`. Writes consumption and shift
/// (`hours` values each).
///
/// # Safety
/// All arrays must hold `hours` values.
#[no_mangle]
pub unsafe extern "C" fn rd_best_response(
    hours: usize,
    p: *const f64,
    a: *const f64,
    b: *const f64,
    delta_max: f64,
    consumption: *mut f64,
    shift: *mut f64,
) -> RdStatus {
    guard(|| {
        if hours == 0 {
            return Err((RdStatus::InvalidArgument, "hours must be positive".into()));
        }
        let (p, a, b) = (input(p, hours, "p")?, input(a, hours, "a")?, input(b, hours, "b")?);
        if consumption.is_null() || shift.is_null() {
            return Err(null("output buffer"));
        }
        if b.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err((RdStatus::InvalidArgument, "b must be positive".into()));
        }
        if !(delta_max >= 0.0 && delta_max.is_finite()) {
            return Err((RdStatus::InvalidArgument, "delta_max must be nonnegative".into()));
        }
        let r = best_response(p, a, b, delta_max);
        slice::from_raw_parts_mut(consumption, hours).copy_from_slice(&r.s);
        slice::from_raw_parts_mut(shift, hours).copy_from_slice(&r.shift);
        Ok(())
    })
}

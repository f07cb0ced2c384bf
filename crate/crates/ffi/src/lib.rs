//! C interface to `strata_lab`.
//!
//! Objects cross the boundary as opaque handles created by `sl_*_new` style
//! functions and released with the matching `sl_*_free`. Fallible calls
//! return an [`SlStatus`]; the message of the last failure on the calling
//! thread is available through [`sl_last_error`]. Panics never unwind into
//! C: they are reported as [`SlStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use strata_lab::selection::build_selection;
use strata_lab::verify::{is_good, is_valid, ParamSchedule};
use strata_lab::{
    run, CatalogFunction, Error, NeighborhoodParams, Objective, Point, RunMode, SelectionFunction,
    StepSchedule, Trajectory,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownFunction = 3,
    InvalidParams = 4,
    DimensionMismatch = 5,
    Precondition = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Catalog function handle.
pub struct SlFunction(CatalogFunction);
/// Trajectory handle.
pub struct SlTrajectory(Trajectory);
/// Neighborhood parameter handle.
pub struct SlParams(NeighborhoodParams);
/// Selection handle.
pub struct SlSelection(SelectionFunction);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SlStatus {
    match e {
        Error::UnknownFunction(_) => SlStatus::UnknownFunction,
        Error::InvalidParams(_) => SlStatus::InvalidParams,
        Error::DimensionMismatch { .. } => SlStatus::DimensionMismatch,
        Error::Precondition(_) | Error::OutsideWellPosed { .. } | Error::Empty(_) => {
            SlStatus::Precondition
        }
        _ => SlStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), SlStatus>>(f: F) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SlStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            SlStatus::Internal
        }
    }
}

fn fail(e: Error) -> SlStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null() -> SlStatus {
    set_error("null pointer argument");
    SlStatus::NullPointer
}

unsafe fn point_from(x: *const f64, n: usize) -> Result<Point, SlStatus> {
    if x.is_null() {
        return Err(null());
    }
    let v = std::slice::from_raw_parts(x, n).to_vec();
    Point::new(v).map_err(fail)
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Looks up a catalog entry by name, e.g. `appendix_fig1` or `abs_power(0.5)`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_function_new(
    name: *const c_char,
    out: *mut *mut SlFunction,
) -> SlStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let name = CStr::from_ptr(name).to_str().map_err(|_| {
            set_error("name is not valid UTF-8");
            SlStatus::InvalidArgument
        })?;
        let f = CatalogFunction::get(name).map_err(fail)?;
        put(out, SlFunction(f));
        Ok(())
    })
}

/// # Safety
/// `f` must come from [`sl_function_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_function_free(f: *mut SlFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Ambient dimension, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_function_dim(f: *const SlFunction) -> usize {
    f.as_ref().map_or(0, |f| f.0.dim())
}

/// Number of strata, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_function_num_strata(f: *const SlFunction) -> usize {
    f.as_ref().map_or(0, |f| f.0.stratification().len())
}

/// # Safety
/// `x` must point to `n` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn sl_function_value(
    f: *const SlFunction,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        let (Some(f), false) = (f.as_ref(), out.is_null()) else {
            return Err(null());
        };
        let p = point_from(x, n)?;
        if n != f.0.dim() {
            return Err(fail(Error::DimensionMismatch {
                expected: f.0.dim(),
                got: n,
            }));
        }
        *out = f.0.value(&p);
        Ok(())
    })
}

/// Writes the deterministic subgradient at `x` into `out` (length `n`).
///
/// # Safety
/// `x` and `out` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn sl_function_subgradient(
    f: *const SlFunction,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        let (Some(f), false) = (f.as_ref(), out.is_null()) else {
            return Err(null());
        };
        let p = point_from(x, n)?;
        if n != f.0.dim() {
            return Err(fail(Error::DimensionMismatch {
                expected: f.0.dim(),
                got: n,
            }));
        }
        let v = f.0.subgradient(&p);
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(v.coords());
        Ok(())
    })
}

/// Automatic exponents; `gamma` and `gamma0` are derived when not positive.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_params_auto(
    f: *const SlFunction,
    gamma: f64,
    gamma0: f64,
    out: *mut *mut SlParams,
) -> SlStatus {
    guard(|| {
        let (Some(f), false) = (f.as_ref(), out.is_null()) else {
            return Err(null());
        };
        *out = ptr::null_mut();
        let pick = |v: f64| (v > 0.0).then_some(v);
        let p = NeighborhoodParams::auto(&f.0, pick(gamma), pick(gamma0)).map_err(fail)?;
        put(out, SlParams(p));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`sl_params_auto`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_params_free(p: *mut SlParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Reads the exponents and step sizes; any output pointer may be null.
///
/// # Safety
/// `p` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_params_get(
    p: *const SlParams,
    alpha: *mut f64,
    beta: *mut f64,
    gamma: *mut f64,
    gamma0: *mut f64,
) -> SlStatus {
    guard(|| {
        let Some(p) = p.as_ref() else {
            return Err(null());
        };
        for (dst, v) in [
            (alpha, p.0.alpha),
            (beta, p.0.beta),
            (gamma, p.0.gamma),
            (gamma0, p.0.gamma0),
        ] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

unsafe fn run_with(
    f: *const SlFunction,
    x1: *const f64,
    n: usize,
    schedule: StepSchedule,
    k: usize,
    out: *mut *mut SlTrajectory,
) -> SlStatus {
    guard(|| {
        let (Some(f), false) = (f.as_ref(), out.is_null()) else {
            return Err(null());
        };
        *out = ptr::null_mut();
        let x = point_from(x1, n)?;
        let t = run(&f.0, f.0.domain(), &x, &schedule, k, RunMode::Plain).map_err(fail)?;
        put(out, SlTrajectory(t));
        Ok(())
    })
}

/// Constant-step run of `k` steps from `x1` (length `n`).
///
/// # Safety
/// `x1` must point to `n` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_run_constant(
    f: *const SlFunction,
    x1: *const f64,
    n: usize,
    gamma: f64,
    k: usize,
    out: *mut *mut SlTrajectory,
) -> SlStatus {
    run_with(f, x1, n, StepSchedule::Constant { gamma }, k, out)
}

/// Run with steps `c / k`.
///
/// # Safety
/// As [`sl_run_constant`].
#[no_mangle]
pub unsafe extern "C" fn sl_run_inverse_k(
    f: *const SlFunction,
    x1: *const f64,
    n: usize,
    c: f64,
    k: usize,
    out: *mut *mut SlTrajectory,
) -> SlStatus {
    run_with(f, x1, n, StepSchedule::InverseK { c }, k, out)
}

/// # Safety
/// `t` must come from a run function and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_free(t: *mut SlTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of steps taken (iterates are numbered 1 to len + 1).
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_len(t: *const SlTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// Index of the first iterate outside the domain, or 0 if none.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_escaped_at(t: *const SlTrajectory) -> usize {
    t.as_ref().and_then(|t| t.0.escaped_at).unwrap_or(0)
}

/// Copies iterate `k` (1-based, up to len + 1) into `out` of length `n`.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_iterate(
    t: *const SlTrajectory,
    k: usize,
    out: *mut f64,
    n: usize,
) -> SlStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), out.is_null()) else {
            return Err(null());
        };
        if k == 0 || k > t.0.iterates.len() {
            set_error(&format!("iterate index {k} out of range"));
            return Err(SlStatus::InvalidArgument);
        }
        let x = &t.0.iterates[k - 1];
        if n < x.dim() {
            set_error("output buffer too small");
            return Err(SlStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(out, x.dim()).copy_from_slice(x.coords());
        Ok(())
    })
}

/// Builds the selection of a constant-step trajectory.
///
/// # Safety
/// All handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_selection_build(
    f: *const SlFunction,
    t: *const SlTrajectory,
    p: *const SlParams,
    out: *mut *mut SlSelection,
) -> SlStatus {
    guard(|| {
        let (Some(f), Some(t), Some(p), false) =
            (f.as_ref(), t.as_ref(), p.as_ref(), out.is_null())
        else {
            return Err(null());
        };
        *out = ptr::null_mut();
        let s = build_selection(f.0.stratification(), &t.0, &p.0).map_err(fail)?;
        put(out, SlSelection(s));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`sl_selection_build`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_selection_free(s: *mut SlSelection) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_selection_len(s: *const SlSelection) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the stratum id of every index into `out` (capacity `cap`).
///
/// # Safety
/// `out` must point to `cap` writable elements.
#[no_mangle]
pub unsafe extern "C" fn sl_selection_assignments(
    s: *const SlSelection,
    out: *mut usize,
    cap: usize,
) -> SlStatus {
    guard(|| {
        let (Some(s), false) = (s.as_ref(), out.is_null()) else {
            return Err(null());
        };
        if cap < s.0.len() {
            set_error("output buffer too small");
            return Err(SlStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(out, s.0.len()).copy_from_slice(&s.0.assignments);
        Ok(())
    })
}

/// Writes 1 or 0 into `valid` and `good`.
///
/// # Safety
/// All handles must be live and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sl_selection_verify(
    f: *const SlFunction,
    t: *const SlTrajectory,
    p: *const SlParams,
    s: *const SlSelection,
    valid: *mut c_int,
    good: *mut c_int,
) -> SlStatus {
    guard(|| {
        let (Some(f), Some(t), Some(p), Some(s)) = (f.as_ref(), t.as_ref(), p.as_ref(), s.as_ref())
        else {
            return Err(null());
        };
        if valid.is_null() || good.is_null() {
            return Err(null());
        }
        let strat = f.0.stratification();
        let sched = ParamSchedule::constant(p.0, t.0.len());
        let v = is_valid(strat, &t.0, &sched, &s.0).map_err(fail)?;
        let g = is_good(strat, &t.0, &sched, &s.0).map_err(fail)?;
        *valid = c_int::from(v.valid);
        *good = c_int::from(g.good);
        Ok(())
    })
}

//! C ABI over the `robust-admm` simulator.
//!
//! Every function returns an [`RaStatus`]. On failure the message is available
//! from [`ra_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use robust_admm::harness::{run_experiment, write_outputs, ExperimentConfig, ExperimentOutput};
use robust_admm::AdmmError;

/// Status codes returned by every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidTopology = 4,
    DomainError = 5,
    NotRun = 6,
    OutOfRange = 7,
    Numerical = 8,
    Io = 9,
    Panic = 10,
}

/// Opaque experiment handle.
pub struct RaExperiment {
    config: ExperimentConfig,
    output: Option<ExperimentOutput>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: RaStatus, msg: impl Into<String>) -> RaStatus {
    set_error(msg);
    status
}

fn status_of(e: &AdmmError) -> RaStatus {
    match e {
        AdmmError::DisconnectedGraph { .. } | AdmmError::InvalidEdge(..) | AdmmError::InvalidTopology(_) => {
            RaStatus::InvalidTopology
        }
        AdmmError::InvalidConfig(_) | AdmmError::Parse(_) | AdmmError::DimensionMismatch { .. } => RaStatus::InvalidConfig,
        AdmmError::DomainError(_) | AdmmError::MajorityViolated(_) | AdmmError::NotStronglyConvex(_) => {
            RaStatus::DomainError
        }
        AdmmError::Io(_) => RaStatus::Io,
        _ => RaStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> RaStatus) -> RaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(RaStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, RaStatus> {
    if p.is_null() {
        return Err(fail(RaStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(RaStatus::InvalidUtf8, e.to_string()))
}

unsafe fn output<'a>(h: *const RaExperiment) -> Result<&'a ExperimentOutput, RaStatus> {
    let h = h.as_ref().ok_or_else(|| fail(RaStatus::NullPointer, "null experiment handle"))?;
    h.output.as_ref().ok_or_else(|| fail(RaStatus::NotRun, "experiment has not been run"))
}

unsafe fn write<T>(out: *mut T, v: T) -> RaStatus {
    if out.is_null() {
        return fail(RaStatus::NullPointer, "null output pointer");
    }
    out.write(v);
    RaStatus::Ok
}

/// Message for the most recent failure on this thread, or null.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a handle from a JSON config; missing keys take the regression defaults.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_from_json(json: *const c_char, out: *mut *mut RaExperiment) -> RaStatus {
    guard(|| {
        if out.is_null() {
            return fail(RaStatus::NullPointer, "null output pointer");
        }
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ExperimentConfig::from_json(text) {
            Ok(config) => write(out, Box::into_raw(Box::new(RaExperiment { config, output: None }))),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Creates a handle with the default regression config.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_default(out: *mut *mut RaExperiment) -> RaStatus {
    guard(|| {
        let h = Box::new(RaExperiment { config: ExperimentConfig::regression(), output: None });
        write(out, Box::into_raw(h))
    })
}

/// Runs the experiment, replacing any previous result.
///
/// # Safety
/// `h` must come from a constructor in this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_run(h: *mut RaExperiment) -> RaStatus {
    guard(|| {
        let Some(h) = h.as_mut() else {
            return fail(RaStatus::NullPointer, "null experiment handle");
        };
        match run_experiment(&h.config) {
            Ok(o) => {
                h.output = Some(o);
                RaStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Penalty actually used by the last run.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_penalty(h: *const RaExperiment, out: *mut f64) -> RaStatus {
    guard(|| match output(h) {
        Ok(o) => write(out, o.prepared.c),
        Err(s) => s,
    })
}

/// Number of recorded iterations, including `k = 0`.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_record_count(h: *const RaExperiment, out: *mut usize) -> RaStatus {
    guard(|| match output(h) {
        Ok(o) => write(out, o.trace.records.len()),
        Err(s) => s,
    })
}

/// Optimality gap of record `idx`.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_gap_at(h: *const RaExperiment, idx: usize, out: *mut f64) -> RaStatus {
    guard(|| match output(h) {
        Ok(o) => match o.trace.records.get(idx) {
            Some(r) => write(out, r.f_gap),
            None => fail(RaStatus::OutOfRange, format!("record {idx} of {}", o.trace.records.len())),
        },
        Err(s) => s,
    })
}

/// Median absolute gap over the trailing fifth of the run.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_plateau(h: *const RaExperiment, out: *mut f64) -> RaStatus {
    guard(|| match output(h) {
        Ok(o) => write(out, o.trace.plateau()),
        Err(s) => s,
    })
}

/// Number of flag events raised by a robust run.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_flag_count(h: *const RaExperiment, out: *mut usize) -> RaStatus {
    guard(|| match output(h) {
        Ok(o) => write(out, o.trace.flag_events.len()),
        Err(s) => s,
    })
}

/// Number of bound reports with at least one violation.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_violation_count(h: *const RaExperiment, out: *mut usize) -> RaStatus {
    guard(|| match output(h) {
        Ok(o) => write(out, o.violations().len()),
        Err(s) => s,
    })
}

/// Writes the trace, bounds, flags, plot and constants files into `dir`.
///
/// # Safety
/// `h` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_write_outputs(h: *const RaExperiment, dir: *const c_char) -> RaStatus {
    guard(|| {
        let o = match output(h) {
            Ok(o) => o,
            Err(s) => return s,
        };
        let dir = match str_arg(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match write_outputs(Path::new(dir), o) {
            Ok(()) => RaStatus::Ok,
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ra_experiment_free(h: *mut RaExperiment) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

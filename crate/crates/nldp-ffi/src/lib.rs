//! C ABI over the solver core: opaque problem handles, integer status
//! codes, and per-thread error messages. The matching header is generated
//! into `include/nldp.h` at build time.
//!
//! Conventions:
//! - Every fallible call returns an [`NldpStatus`]; `NLDP_STATUS_OK` is 0,
//!   the other values match the CLI exit codes (2 validation, 3 simulation,
//!   4 check failed) so embedders and scripts see one taxonomy.
//! - After a failure, [`nldp_last_error`] returns the message for the most
//!   recent failing call *on the same thread*.
//! - Handles are created and freed by this library only; they may be shared
//!   across threads for read-only calls (`nldp_solve_at`, validation) but
//!   not concurrently with `nldp_problem_set_dt` or `nldp_problem_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nldp_core::config::ProblemConfig;
use nldp_core::estimate::solve_dirichlet;
use nldp_core::problem::{validate_problem, ProblemSpec};
use nldp_core::sim::SimConfig;
use nldp_core::Error;

/// Result codes shared by every fallible entry point. Values mirror the
/// CLI exit codes.
#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NldpStatus {
    Ok = 0,
    /// Bad configuration, argument, or precondition.
    Validation = 2,
    /// The simulation itself failed (budget exhaustion, singular system).
    Simulation = 3,
    /// A statistical or deterministic gate did not pass.
    Check = 4,
}

/// Opaque handle holding a parsed problem plus its simulation settings.
pub struct NldpProblem {
    spec: ProblemSpec,
    sim: SimConfig,
    default_paths: u64,
    default_seed: u64,
}

/// Summary statistics for one start point. All averages are over the
/// paths that exited; `nonexit_count` paths were dropped.
#[repr(C)]
pub struct NldpSolveStats {
    /// Monte Carlo estimate of the solution value.
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    /// Lower end of the 95% normal confidence interval.
    pub ci_lo: f64,
    /// Upper end of the 95% normal confidence interval.
    pub ci_hi: f64,
    /// Average first-exit time.
    pub mean_exit_time: f64,
    /// Average number of redistribution jumps per path.
    pub mean_jumps: f64,
    /// Paths contributing to the averages.
    pub n_paths: u64,
    /// Paths that exhausted the step budget and were excluded.
    pub nonexit_count: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(e: Error) -> NldpStatus {
    let status = match e.exit_code() {
        2 => NldpStatus::Validation,
        4 => NldpStatus::Check,
        _ => NldpStatus::Simulation,
    };
    set_error(e.to_string());
    status
}

fn invalid(msg: &str) -> NldpStatus {
    set_error(msg.to_string());
    NldpStatus::Validation
}

/// Convert internal panics (debug assertions in the estimators) into a
/// simulation status instead of unwinding across the ABI.
fn guarded<F: FnOnce() -> NldpStatus>(f: F) -> NldpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("internal panic: {msg}"));
            NldpStatus::Simulation
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nldp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the current thread's last error message into `buf`, NUL-terminated
/// and truncated to `cap` bytes. Returns the full message length in bytes
/// (excluding the NUL); 0 means no pending error. Passing a null `buf` or
/// zero `cap` only queries the length.
///
/// # Safety
/// `buf`, when non-null, must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nldp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parse a JSON problem configuration (the same schema the CLI's
/// `--config` file uses) and return a new handle, or null on failure with
/// the message available through [`nldp_last_error`].
///
/// # Safety
/// `json` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nldp_problem_from_json(json: *const c_char) -> *mut NldpProblem {
    clear_error();
    if json.is_null() {
        set_error("json must not be null".to_string());
        return ptr::null_mut();
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(text) => text,
        Err(_) => {
            set_error("json is not valid UTF-8".to_string());
            return ptr::null_mut();
        }
    };
    match build_handle(text) {
        Ok(handle) => Box::into_raw(Box::new(handle)),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

fn build_handle(text: &str) -> Result<NldpProblem, Error> {
    let cfg = ProblemConfig::parse(text)?;
    let spec = cfg.build_problem()?;
    let sim = cfg.build_sim()?;
    Ok(NldpProblem {
        spec,
        sim,
        default_paths: cfg.n_paths.unwrap_or(10_000),
        default_seed: cfg.master_seed.unwrap_or(0),
    })
}

/// Free a handle returned by [`nldp_problem_from_json`]. Null is a no-op.
///
/// # Safety
/// `p` must be a pointer returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn nldp_problem_free(p: *mut NldpProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Spatial dimension of the problem, or -1 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn nldp_problem_dim(p: *const NldpProblem) -> i32 {
    if p.is_null() {
        return -1;
    }
    (*p).spec.dim() as i32
}

/// Master seed declared in the configuration (0 if absent). Pass it to
/// [`nldp_solve_at`] to reproduce what the CLI would compute.
///
/// # Safety
/// `p` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn nldp_problem_default_seed(p: *const NldpProblem) -> u64 {
    if p.is_null() {
        return 0;
    }
    (*p).default_seed
}

/// Override the base time step for subsequent solves on this handle.
///
/// # Safety
/// `p` must be a live handle; no other thread may use the handle during
/// the call.
#[no_mangle]
pub unsafe extern "C" fn nldp_problem_set_dt(p: *mut NldpProblem, dt: f64) -> NldpStatus {
    clear_error();
    if p.is_null() {
        return invalid("handle must not be null");
    }
    if !(dt.is_finite() && dt > 0.0) {
        return invalid("dt must be finite and positive");
    }
    (*p).sim.dt_base = dt;
    match (*p).sim.check() {
        Ok(()) => NldpStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Run the sampled coefficient and domain checks on the problem. Returns
/// `NLDP_STATUS_VALIDATION` with a message listing the first failure if
/// the problem is rejected.
///
/// # Safety
/// `p` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn nldp_problem_validate(p: *const NldpProblem) -> NldpStatus {
    clear_error();
    if p.is_null() {
        return invalid("handle must not be null");
    }
    let spec = &(*p).spec;
    guarded(|| match validate_problem(spec, 200, 0x5eed).ensure() {
        Ok(()) => NldpStatus::Ok,
        Err(e) => fail(e),
    })
}

/// Estimate the solution at one start point with `n_paths` Monte Carlo
/// paths (0 means the configuration's default) and the given master seed.
/// The run is deterministic in (problem, point, n_paths, seed) and
/// independent of thread count. On success fills `*out`.
///
/// # Safety
/// `p` must be a live handle, `point` must point to `dim` doubles, and
/// `out` must point to a writable [`NldpSolveStats`].
#[no_mangle]
pub unsafe extern "C" fn nldp_solve_at(
    p: *const NldpProblem,
    point: *const f64,
    dim: usize,
    n_paths: u64,
    seed: u64,
    out: *mut NldpSolveStats,
) -> NldpStatus {
    clear_error();
    if p.is_null() || point.is_null() || out.is_null() {
        return invalid("handle, point, and out must not be null");
    }
    let problem = &*p;
    if dim != problem.spec.dim() {
        return invalid("point dimension does not match the problem");
    }
    let start = std::slice::from_raw_parts(point, dim).to_vec();
    let n = if n_paths == 0 { problem.default_paths } else { n_paths };
    guarded(|| {
        match solve_dirichlet(&problem.spec, std::slice::from_ref(&start), n, &problem.sim, seed) {
            Ok(solved) => {
                let est = &solved[0].estimate;
                *out = NldpSolveStats {
                    mean: est.mean,
                    std_error: est.stderr,
                    ci_lo: est.ci95.0,
                    ci_hi: est.ci95.1,
                    mean_exit_time: est.aux["mean_exit_time"],
                    mean_jumps: est.aux["mean_jumps"],
                    n_paths: est.n,
                    nonexit_count: est.aux["nonexit_count"] as u64,
                };
                NldpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

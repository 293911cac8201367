//! C ABI over `algpot`.
//!
//! Every fallible call returns an [`AlgpotStatus`]; on failure the message
//! is kept per thread and can be fetched with
//! [`algpot_last_error_message`]. Strings handed out by this library must
//! be released with [`algpot_string_free`], problems with
//! [`algpot_problem_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use algpot::mrtable::{check_pair_exact, TableConfig};
use algpot::nbody::{self, NBodyConfig, NBodyGauge};
use algpot::parser::{parse_rational, parse_setup};
use algpot::pipeline::{analyze, AnalyzeOptions};
use algpot::AlgebraicSetup;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgpotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Computation = 5,
    Panic = 6,
}

/// A parsed problem. Opaque to C.
pub struct AlgpotProblem {
    setup: AlgebraicSetup,
    nbody: Option<NBodyConfig>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: AlgpotStatus, msg: impl Into<String>) -> AlgpotStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> AlgpotStatus) -> AlgpotStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(AlgpotStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, AlgpotStatus> {
    if p.is_null() {
        return Err(fail(AlgpotStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AlgpotStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn algpot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The returned
/// string is owned by the caller.
#[no_mangle]
pub extern "C" fn algpot_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn algpot_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a problem file's text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn algpot_problem_parse(text: *const c_char, out: *mut *mut AlgpotProblem) -> AlgpotStatus {
    guard(|| {
        if out.is_null() {
            return fail(AlgpotStatus::NullPointer, "null output pointer");
        }
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_setup(text) {
            Ok(setup) => {
                *out = Box::into_raw(Box::new(AlgpotProblem { setup, nbody: None }));
                AlgpotStatus::Ok
            }
            Err(e) => fail(AlgpotStatus::Parse, e.to_string()),
        }
    })
}

/// Builds the n-body problem. `masses` is a comma-separated list, or NULL
/// for equal unit masses.
///
/// # Safety
/// `masses` must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn algpot_problem_nbody(
    n: usize,
    dim: usize,
    masses: *const c_char,
    out: *mut *mut AlgpotProblem,
) -> AlgpotStatus {
    guard(|| {
        if out.is_null() {
            return fail(AlgpotStatus::NullPointer, "null output pointer");
        }
        let unit = vec!["1"; n].join(",");
        let text = if masses.is_null() {
            unit.as_str()
        } else {
            match read_str(masses) {
                Ok(t) => t,
                Err(s) => return s,
            }
        };
        let masses = match nbody::parse_masses(text) {
            Ok(m) => m,
            Err(e) => return fail(AlgpotStatus::InvalidArgument, e.to_string()),
        };
        let built = NBodyConfig::new(n, dim, masses).and_then(|cfg| Ok((nbody::build(&cfg)?, cfg)));
        match built {
            Ok((setup, cfg)) => {
                *out = Box::into_raw(Box::new(AlgpotProblem {
                    setup,
                    nbody: Some(cfg),
                }));
                AlgpotStatus::Ok
            }
            Err(e) => fail(AlgpotStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `problem` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn algpot_problem_free(problem: *mut AlgpotProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of position and extension variables.
///
/// # Safety
/// `problem` must be a live handle; `n_out` and `s_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn algpot_problem_dimensions(
    problem: *const AlgpotProblem,
    n_out: *mut usize,
    s_out: *mut usize,
) -> AlgpotStatus {
    guard(|| {
        let Some(p) = problem.as_ref() else {
            return fail(AlgpotStatus::NullPointer, "null problem");
        };
        if let Some(n) = n_out.as_mut() {
            *n = p.setup.n();
        }
        if let Some(s) = s_out.as_mut() {
            *s = p.setup.s();
        }
        AlgpotStatus::Ok
    })
}

/// The problem in problem-file syntax. Caller frees the string.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn algpot_problem_text(problem: *const AlgpotProblem) -> *mut c_char {
    match problem.as_ref() {
        Some(p) => into_c_string(p.setup.to_problem_text()),
        None => ptr::null_mut(),
    }
}

/// Runs the full pipeline. `json_out` receives the report (caller frees)
/// and `exit_code_out` the CLI exit code: 0, or 10 for an obstruction.
///
/// # Safety
/// `problem` must be a live handle; the output pointers must be writable
/// or NULL.
#[no_mangle]
pub unsafe extern "C" fn algpot_analyze(
    problem: *const AlgpotProblem,
    seed: u64,
    random_starts: usize,
    json_out: *mut *mut c_char,
    exit_code_out: *mut i32,
) -> AlgpotStatus {
    guard(|| {
        let Some(p) = problem.as_ref() else {
            return fail(AlgpotStatus::NullPointer, "null problem");
        };
        let mut opts = AnalyzeOptions {
            seed,
            n_random: random_starts,
            ..AnalyzeOptions::default()
        };
        let gauge = p.nbody.as_ref().map(|cfg| {
            opts.seeds = nbody::central_config_seeds(cfg).0;
            NBodyGauge::new(cfg)
        });
        let report = match analyze(&p.setup, &opts, gauge.as_ref().map(|g| g as _)) {
            Ok(r) => r,
            Err(e) => return fail(AlgpotStatus::Computation, e.to_string()),
        };
        if let Some(c) = exit_code_out.as_mut() {
            *c = report.exit_code();
        }
        if let Some(out) = json_out.as_mut() {
            match serde_json::to_string(&report) {
                Ok(j) => *out = into_c_string(j),
                Err(e) => return fail(AlgpotStatus::Computation, e.to_string()),
            }
        }
        AlgpotStatus::Ok
    })
}

/// Exact table check of `(k, lambda)` with `lambda` a rational such as
/// `"-1/2"`. `matched_out` receives 1 when the pair is admissible.
///
/// # Safety
/// `lambda` must be NUL-terminated; the output pointers must be writable
/// or NULL.
#[no_mangle]
pub unsafe extern "C" fn algpot_check_pair(
    k: i64,
    lambda: *const c_char,
    matched_out: *mut i32,
    json_out: *mut *mut c_char,
) -> AlgpotStatus {
    guard(|| {
        let text = match read_str(lambda) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let value = match parse_rational(text) {
            Ok(v) => v,
            Err(e) => return fail(AlgpotStatus::Parse, e.to_string()),
        };
        let verdict = match check_pair_exact(k, &value, &TableConfig::default()) {
            Ok(v) => v,
            Err(e) => return fail(AlgpotStatus::InvalidArgument, e.to_string()),
        };
        if let Some(m) = matched_out.as_mut() {
            *m = i32::from(verdict.matched);
        }
        if let Some(out) = json_out.as_mut() {
            match serde_json::to_string(&verdict) {
                Ok(j) => *out = into_c_string(j),
                Err(e) => return fail(AlgpotStatus::Computation, e.to_string()),
            }
        }
        AlgpotStatus::Ok
    })
}

use std::ffi::{CStr, CString};
use std::ptr;

use algpot_ffi::*;

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    algpot_string_free(s);
    out
}

#[test]
fn parse_and_analyze_circle_potential() {
    let text = CString::new("vars q1 q2\next w1 : w1^2 - q1^2 - q2^2\npotential w1^3\n").unwrap();
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(algpot_problem_parse(text.as_ptr(), &mut p), AlgpotStatus::Ok);
        let (mut n, mut s) = (0, 0);
        assert_eq!(algpot_problem_dimensions(p, &mut n, &mut s), AlgpotStatus::Ok);
        assert_eq!((n, s), (2, 1));
        assert!(take(algpot_problem_text(p)).starts_with("vars q1 q2"));

        let mut json = ptr::null_mut();
        let mut code = -1;
        assert_eq!(algpot_analyze(p, 7, 4, &mut json, &mut code), AlgpotStatus::Ok);
        assert_eq!(code, 0);
        let report: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(report["certificate"]["kind"], "no_obstruction");
        algpot_problem_free(p);
    }
}

#[test]
fn three_body_reports_obstruction() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(algpot_problem_nbody(3, 2, ptr::null(), &mut p), AlgpotStatus::Ok);
        let mut code = -1;
        assert_eq!(algpot_analyze(p, 1, 0, ptr::null_mut(), &mut code), AlgpotStatus::Ok);
        assert_eq!(code, 10);
        algpot_problem_free(p);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let bad = CString::new("vars q1\npotential q1 +").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(algpot_problem_parse(bad.as_ptr(), &mut p), AlgpotStatus::Parse);
        assert!(p.is_null());
        assert!(take(algpot_last_error_message()).contains("syntax error"));

        assert_eq!(algpot_problem_parse(ptr::null(), &mut p), AlgpotStatus::NullPointer);
        assert_eq!(algpot_problem_nbody(3, 1, ptr::null(), &mut p), AlgpotStatus::InvalidArgument);
        assert!(take(algpot_last_error_message()).contains("d = 1"));

        let lambda = CString::new("1").unwrap();
        assert_eq!(algpot_check_pair(0, lambda.as_ptr(), ptr::null_mut(), ptr::null_mut()), AlgpotStatus::InvalidArgument);

        // a successful call clears the message
        let mut m = -1;
        assert_eq!(algpot_check_pair(3, lambda.as_ptr(), &mut m, ptr::null_mut()), AlgpotStatus::Ok);
        assert!(algpot_last_error_message().is_null());
        algpot_problem_free(ptr::null_mut());
        algpot_string_free(ptr::null_mut());
    }
}

#[test]
fn table_check() {
    unsafe {
        let mut m = -1;
        let half = CString::new("-1/2").unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(algpot_check_pair(-1, half.as_ptr(), &mut m, &mut json), AlgpotStatus::Ok);
        assert_eq!(m, 0);
        assert!(take(json).contains("\"obstruction\":true"));
        let two = CString::new("2").unwrap();
        assert_eq!(algpot_check_pair(3, two.as_ptr(), &mut m, ptr::null_mut()), AlgpotStatus::Ok);
        assert_eq!(m, 1);
        assert!(!CStr::from_ptr(algpot_version()).to_str().unwrap().is_empty());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/algpot.h")).unwrap();
    for f in [
        "algpot_problem_parse",
        "algpot_problem_nbody",
        "algpot_problem_free",
        "algpot_analyze",
        "algpot_check_pair",
        "algpot_string_free",
        "algpot_last_error_message",
        "ALGPOT_STATUS_OK = 0",
        "typedef struct AlgpotProblem AlgpotProblem",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
}

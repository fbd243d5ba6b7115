use std::ffi::{CStr, CString};
use std::fs;
use std::ptr;

use robust_admm_ffi::*;

fn last_error() -> String {
    let p = ra_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn from_json(text: &str) -> (RaStatus, *mut RaExperiment) {
    let json = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { ra_experiment_from_json(json.as_ptr(), &mut h) };
    (s, h)
}

#[test]
fn error_free_run_through_handle() {
    let (s, h) = from_json(r#"{"t": 120, "c": 0.9, "unreliable": 0, "errors": {"kind": "none"}}"#);
    assert_eq!(s, RaStatus::Ok);
    unsafe {
        let mut gap = 0.0;
        assert_eq!(ra_experiment_plateau(h, &mut gap), RaStatus::NotRun);
        assert!(last_error().contains("not been run"));
        assert_eq!(ra_experiment_run(h), RaStatus::Ok);
        let mut n = 0usize;
        assert_eq!(ra_experiment_record_count(h, &mut n), RaStatus::Ok);
        assert_eq!(n, 121);
        assert_eq!(ra_experiment_gap_at(h, n - 1, &mut gap), RaStatus::Ok);
        assert!(gap.abs() < 1e-6, "gap {gap}");
        assert_eq!(ra_experiment_gap_at(h, n, &mut gap), RaStatus::OutOfRange);
        let mut c = 0.0;
        assert_eq!(ra_experiment_penalty(h, &mut c), RaStatus::Ok);
        assert_eq!(c, 0.9);
        let mut v = 7usize;
        assert_eq!(ra_experiment_violation_count(h, &mut v), RaStatus::Ok);
        assert_eq!(v, 0);
        assert_eq!(ra_experiment_flag_count(h, &mut v), RaStatus::Ok);
        assert_eq!(v, 0);
        ra_experiment_free(h);
    }
}

#[test]
fn outputs_match_across_handles() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let mut h = ptr::null_mut();
        unsafe {
            assert_eq!(ra_experiment_default(&mut h), RaStatus::Ok);
            assert_eq!(ra_experiment_run(h), RaStatus::Ok);
            let path = CString::new(d.to_str().unwrap()).unwrap();
            assert_eq!(ra_experiment_write_outputs(h, path.as_ptr()), RaStatus::Ok);
            ra_experiment_free(h);
        }
    }
    for name in ["trace.csv", "bounds.csv", "flags.csv", "plot.csv", "constants.json"] {
        assert_eq!(fs::read(dirs[0].join(name)).unwrap(), fs::read(dirs[1].join(name)).unwrap(), "{name}");
    }
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let (s, h) = from_json(r#"{"c": -2}"#);
    assert_eq!(s, RaStatus::InvalidConfig);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
    let (s, _) = from_json("not json");
    assert_eq!(s, RaStatus::InvalidConfig);
    let (s, h) = from_json(r#"{"agents": 4, "topology": {"preset": "explicit", "edges": [[0, 1], [2, 3]]}}"#);
    if s == RaStatus::Ok {
        assert_eq!(unsafe { ra_experiment_run(h) }, RaStatus::InvalidTopology);
        unsafe { ra_experiment_free(h) };
    } else {
        assert_eq!(s, RaStatus::InvalidTopology);
    }
    unsafe {
        assert_eq!(ra_experiment_from_json(ptr::null(), &mut ptr::null_mut()), RaStatus::NullPointer);
        assert_eq!(ra_experiment_run(ptr::null_mut()), RaStatus::NullPointer);
        ra_experiment_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/robust_admm.h")).unwrap();
    for sym in [
        "ra_last_error_message",
        "ra_experiment_from_json",
        "ra_experiment_default",
        "ra_experiment_run",
        "ra_experiment_penalty",
        "ra_experiment_record_count",
        "ra_experiment_gap_at",
        "ra_experiment_plateau",
        "ra_experiment_flag_count",
        "ra_experiment_violation_count",
        "ra_experiment_write_outputs",
        "ra_experiment_free",
        "typedef struct RaExperiment RaExperiment",
        "RA_STATUS_INVALID_TOPOLOGY",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

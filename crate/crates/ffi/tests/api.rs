use std::ffi::{CStr, CString};
use std::ptr;

use sense_ffi::*;

const SCENARIO: &str = r#"
node_count = 12
duration = "20s"
seed = 3
request_period = "500ms"
c_gmax = "2s"

[network]
preset = "wifi"

[clock]
max_offset = "5s"

[scheduler]
kind = "periodic"
period = "20ms"
"#;

fn last_error() -> String {
    let p = sense_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_round_trip() {
    let text = CString::new(SCENARIO).unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(sense_scenario_from_toml(text.as_ptr(), &mut s), SenseStatus::Ok);
        assert!(sense_last_error().is_null());
        assert_eq!(sense_scenario_set_seed(s, 4), SenseStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(sense_run(s, &mut run), SenseStatus::Ok);
        let mut sum = SenseSummary::default();
        assert_eq!(sense_run_summary(run, &mut sum), SenseStatus::Ok);
        let n = sense_run_tuple_count(run);
        assert_eq!(n as u64, sum.tuples);
        assert!(n > 10);
        assert_eq!(sum.soundness_violations, 0);
        let mut t = SenseTuple::default();
        for i in 0..n {
            assert_eq!(sense_run_tuple(run, i, &mut t), SenseStatus::Ok);
            assert!(t.c_real_ns <= t.c_g_ns);
            assert!(t.loop_count >= 1);
        }
        assert_eq!(sense_run_tuple(run, n, &mut t), SenseStatus::OutOfRange);
        assert!(last_error().contains(&format!("of {n}")));
        sense_run_free(run);
        sense_scenario_free(s);
    }
}

#[test]
fn config_errors_are_reported() {
    let text = CString::new("node_count = 0").unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(sense_scenario_from_toml(text.as_ptr(), &mut s), SenseStatus::Config);
        assert!(s.is_null());
        assert_eq!(sense_scenario_from_toml(ptr::null(), &mut s), SenseStatus::NullPointer);
        let missing = CString::new("/nonexistent/x.toml").unwrap();
        assert_eq!(sense_scenario_load(missing.as_ptr(), &mut s), SenseStatus::Config);
        assert!(last_error().contains("nonexistent"));
        assert_eq!(sense_run(ptr::null(), &mut ptr::null_mut()), SenseStatus::NullPointer);
        assert_eq!(sense_run_tuple_count(ptr::null()), 0);
        sense_run_free(ptr::null_mut());
        sense_scenario_free(ptr::null_mut());
    }
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, SCENARIO).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(sense_scenario_load(c.as_ptr(), &mut s), SenseStatus::Ok);
        sense_scenario_free(s);
    }
}

#[test]
fn coherence_measures() {
    let mut out = 0i64;
    unsafe {
        assert_eq!(sense_coherence_guarantee(100, 160, 5, 25, &mut out), SenseStatus::Ok);
        assert_eq!(out, 60 + 25 - 5);
        assert_eq!(sense_coherence_guarantee(160, 100, 0, 0, &mut out), SenseStatus::InvalidArgument);
        assert_eq!(sense_coherence_estimate(-7, 12, &mut out), SenseStatus::Ok);
        assert_eq!(out, 19);
        assert_eq!(sense_coherence_estimate(0, 1, ptr::null_mut()), SenseStatus::NullPointer);
    }
}

#[test]
fn locate_thunder() {
    let sensors = [100.0, 200.0, 7000.0, 1000.0, 4200.0, 4000.0];
    let mut loc = SenseLocation::default();
    unsafe {
        assert_eq!(sense_locate(sensors.as_ptr(), 343.0, 647.37, 687.40, &mut loc), SenseStatus::Ok);
        assert!((loc.x - 3456.0).abs() < 0.05 && (loc.y - 1234.0).abs() < 0.05);
        let line = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        assert_eq!(sense_locate(line.as_ptr(), 343.0, 0.0, 0.0, &mut loc), SenseStatus::InvalidArgument);
        assert!(last_error().contains("collinear"));
    }
}

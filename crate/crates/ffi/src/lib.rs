//! C interface: coherence measures, trilateration, and scenario runs behind
//! opaque handles. Every fallible call returns a [`SenseStatus`]; the message
//! of the last failure on the calling thread is available from
//! [`sense_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sense_core::coherence::{coherence_estimate, coherence_guarantee};
use sense_core::harness::{run_scenario, RunSummary};
use sense_core::multilat::{locate, Point, Scene};
use sense_core::netsim::SimOutput;
use sense_core::scenario::Scenario;
use sense_core::time::{Duration, Timestamp};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SenseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Runtime = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// A parsed scenario.
pub struct SenseScenario(Scenario);

/// Output of one simulation run.
pub struct SenseRun {
    out: SimOutput,
    summary: RunSummary,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SenseSummary {
    pub tuples: u64,
    pub measured: u64,
    pub within_cgmax: f64,
    pub median_cg_ns: i64,
    pub median_ce_ns: i64,
    pub median_dt_ns: i64,
    pub median_delta_ns: i64,
    pub soundness_violations: u64,
    pub degraded: u64,
    pub total_reads: u64,
    pub final_loop_count: u32,
}

/// One result tuple. `c_real_ns` is -1 when no ground truth was recorded.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SenseTuple {
    pub seq: u64,
    pub t_ns: i64,
    pub l_s_ns: i64,
    pub c_g_ns: i64,
    pub c_e_ns: i64,
    pub delta_ns: i64,
    pub delta_t_ns: i64,
    pub d_max_ns: i64,
    pub c_real_ns: i64,
    pub loop_count: u32,
    pub degraded: bool,
}

/// Source position (m) and its distance `a` (m) to the third sensor.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SenseLocation {
    pub x: f64,
    pub y: f64,
    pub a: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SenseStatus, msg: impl Into<String>) -> SenseStatus {
    set_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> SenseStatus) -> SenseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SenseStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(SenseStatus::Panic, "internal panic"),
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, SenseStatus> {
    if p.is_null() {
        return Err(fail(SenseStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SenseStatus::InvalidArgument, "string is not UTF-8"))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sense_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sense_scenario_from_toml(toml: *const c_char, out: *mut *mut SenseScenario) -> SenseStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SenseStatus::NullPointer, "out is null");
        }
        let text = match c_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::from_toml(text) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(SenseScenario(s)));
                SenseStatus::Ok
            }
            Err(e) => fail(SenseStatus::Config, e.to_string()),
        }
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sense_scenario_load(path: *const c_char, out: *mut *mut SenseScenario) -> SenseStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SenseStatus::NullPointer, "out is null");
        }
        let path = match c_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Scenario::load(Path::new(path)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(SenseScenario(s)));
                SenseStatus::Ok
            }
            Err(e) => fail(SenseStatus::Config, e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn sense_scenario_set_seed(scenario: *mut SenseScenario, seed: u64) -> SenseStatus {
    guarded(|| match scenario.as_mut() {
        Some(s) => {
            s.0.seed = seed;
            SenseStatus::Ok
        }
        None => fail(SenseStatus::NullPointer, "scenario is null"),
    })
}

/// # Safety
/// `scenario` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn sense_scenario_free(scenario: *mut SenseScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the simulation without writing files.
///
/// # Safety
/// `scenario` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sense_run(scenario: *const SenseScenario, out: *mut *mut SenseRun) -> SenseStatus {
    guarded(|| {
        let Some(s) = scenario.as_ref() else {
            return fail(SenseStatus::NullPointer, "scenario is null");
        };
        if out.is_null() {
            return fail(SenseStatus::NullPointer, "out is null");
        }
        match run_scenario(&s.0, None) {
            Ok((out_, summary)) => {
                *out = Box::into_raw(Box::new(SenseRun { out: out_, summary }));
                SenseStatus::Ok
            }
            Err(e) if e.is_config() => fail(SenseStatus::Config, e.to_string()),
            Err(e) => fail(SenseStatus::Runtime, e.to_string()),
        }
    })
}

/// # Safety
/// `run` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sense_run_summary(run: *const SenseRun, out: *mut SenseSummary) -> SenseStatus {
    guarded(|| {
        let (Some(r), Some(o)) = (run.as_ref(), out.as_mut()) else {
            return fail(SenseStatus::NullPointer, "run or out is null");
        };
        let s = &r.summary;
        *o = SenseSummary {
            tuples: s.tuples as u64,
            measured: s.measured as u64,
            within_cgmax: s.within_cgmax,
            median_cg_ns: s.median_cg_ns,
            median_ce_ns: s.median_ce_ns,
            median_dt_ns: s.median_dt_ns,
            median_delta_ns: s.median_delta_ns,
            soundness_violations: s.soundness_violations as u64,
            degraded: s.degraded as u64,
            total_reads: s.total_reads,
            final_loop_count: s.final_loop_count as u32,
        };
        SenseStatus::Ok
    })
}

/// Number of emitted tuples; 0 for NULL.
///
/// # Safety
/// `run` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn sense_run_tuple_count(run: *const SenseRun) -> usize {
    run.as_ref().map_or(0, |r| r.out.emitted.len())
}

/// # Safety
/// `run` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sense_run_tuple(run: *const SenseRun, index: usize, out: *mut SenseTuple) -> SenseStatus {
    guarded(|| {
        let (Some(r), Some(o)) = (run.as_ref(), out.as_mut()) else {
            return fail(SenseStatus::NullPointer, "run or out is null");
        };
        let Some(e) = r.out.emitted.get(index) else {
            return fail(
                SenseStatus::OutOfRange,
                format!("tuple {index} of {}", r.out.emitted.len()),
            );
        };
        let t = &e.result;
        *o = SenseTuple {
            seq: t.seq,
            t_ns: t.t.as_nanos(),
            l_s_ns: t.l_s.as_nanos(),
            c_g_ns: t.c_g.as_nanos(),
            c_e_ns: t.c_e.as_nanos(),
            delta_ns: t.delta.as_nanos(),
            delta_t_ns: t.delta_t.as_nanos(),
            d_max_ns: t.d_max.as_nanos(),
            c_real_ns: e.c_real.map_or(-1, |c| c.as_nanos()),
            loop_count: t.loop_count as u32,
            degraded: t.degraded,
        };
        SenseStatus::Ok
    })
}

/// # Safety
/// `run` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn sense_run_free(run: *mut SenseRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Coherence guarantee in ns from loop start/end and the extreme value ages.
///
/// # Safety
/// `out_ns` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sense_coherence_guarantee(
    l_s_ns: i64,
    l_e_ns: i64,
    alpha_min_ns: i64,
    alpha_max_ns: i64,
    out_ns: *mut i64,
) -> SenseStatus {
    guarded(|| {
        let Some(o) = out_ns.as_mut() else {
            return fail(SenseStatus::NullPointer, "out_ns is null");
        };
        match coherence_guarantee(
            Timestamp(l_s_ns),
            Timestamp(l_e_ns),
            Duration(alpha_min_ns),
            Duration(alpha_max_ns),
        ) {
            Ok(d) => {
                *o = d.as_nanos();
                SenseStatus::Ok
            }
            Err(e) => fail(SenseStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Coherence estimate in ns from the extreme reported read times.
///
/// # Safety
/// `out_ns` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sense_coherence_estimate(t_min_ns: i64, t_max_ns: i64, out_ns: *mut i64) -> SenseStatus {
    guarded(|| {
        let Some(o) = out_ns.as_mut() else {
            return fail(SenseStatus::NullPointer, "out_ns is null");
        };
        match coherence_estimate(Timestamp(t_min_ns), Timestamp(t_max_ns)) {
            Ok(d) => {
                *o = d.as_nanos();
                SenseStatus::Ok
            }
            Err(e) => fail(SenseStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Locates a source from range differences `d1 = r1 - r3` and `d2 = r2 - r3`.
/// `sensors` holds x1, y1, x2, y2, x3, y3.
///
/// # Safety
/// `sensors` must point to six doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sense_locate(
    sensors: *const f64,
    speed: f64,
    d1: f64,
    d2: f64,
    out: *mut SenseLocation,
) -> SenseStatus {
    guarded(|| {
        if sensors.is_null() {
            return fail(SenseStatus::NullPointer, "sensors is null");
        }
        let Some(o) = out.as_mut() else {
            return fail(SenseStatus::NullPointer, "out is null");
        };
        let c = std::slice::from_raw_parts(sensors, 6);
        let pts = [Point::new(c[0], c[1]), Point::new(c[2], c[3]), Point::new(c[4], c[5])];
        let scene = match Scene::new(pts, speed) {
            Ok(s) => s,
            Err(e) => return fail(SenseStatus::InvalidArgument, e.to_string()),
        };
        match locate(&scene, d1, d2) {
            Ok(l) => {
                *o = SenseLocation { x: l.x, y: l.y, a: l.a };
                SenseStatus::Ok
            }
            Err(e) => fail(SenseStatus::Runtime, e.to_string()),
        }
    })
}

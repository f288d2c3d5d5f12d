//! C ABI over the monodomain solver.
//!
//! A simulation is an opaque handle created from a TOML configuration (or
//! defaults), run once, then queried for states and indicators. Every call
//! returns an [`MdStatus`]; on failure the message is kept per thread and can
//! be read with [`md_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use monodomain::cli::{parse_config, RunConfig};
use monodomain::estimators::{estimate_trajectory, EstimatorReport};
use monodomain::mesh::unit_square_mesh;
use monodomain::solver::{time_march, Discretization, MarchOptions, TrajectorySolution};
use monodomain::Error;

/// Result codes. Values 2 to 6 match the process exit codes of the CLI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    Io = 3,
    Mesh = 4,
    LinearSolve = 5,
    Newton = 6,
    /// The handle has not been run yet, or an index is out of range.
    InvalidState = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl MdStatus {
    fn from_error(e: &Error) -> Self {
        match e.exit_code() {
            2 => MdStatus::InvalidConfig,
            3 => MdStatus::Io,
            4 => MdStatus::Mesh,
            5 => MdStatus::LinearSolve,
            _ => MdStatus::Newton,
        }
    }
}

/// Opaque simulation handle.
pub struct MdSimulation {
    config: RunConfig,
    disc: Discretization,
    trajectory: Option<TrajectorySolution>,
    report: Option<EstimatorReport>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), MdStatus>) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            MdStatus::Panic
        }
    }
}

fn fail(e: Error) -> MdStatus {
    set_error(e.to_string());
    MdStatus::from_error(&e)
}

fn null(what: &str) -> MdStatus {
    set_error(format!("null {what}"));
    MdStatus::NullPointer
}

fn invalid(msg: &str) -> MdStatus {
    set_error(msg);
    MdStatus::InvalidState
}

unsafe fn handle<'a>(sim: *const MdSimulation) -> Result<&'a MdSimulation, MdStatus> {
    sim.as_ref().ok_or_else(|| null("simulation handle"))
}

unsafe fn handle_mut<'a>(sim: *mut MdSimulation) -> Result<&'a mut MdSimulation, MdStatus> {
    sim.as_mut().ok_or_else(|| null("simulation handle"))
}

fn build(config: RunConfig) -> Result<MdSimulation, MdStatus> {
    let mesh = unit_square_mesh(config.mesh.n).map_err(fail)?;
    let disc = Discretization::aliev_panfilov(Arc::new(mesh), config.params()).map_err(fail)?;
    Ok(MdSimulation {
        config,
        disc,
        trajectory: None,
        report: None,
    })
}

/// Create a simulation from TOML text in the CLI's configuration format.
/// `config` may be null for all defaults. On success `*out` owns a handle
/// to release with [`md_simulation_free`].
///
/// # Safety
/// `config` must be null or a NUL-terminated string; `out` must be valid for
/// a pointer write.
#[no_mangle]
pub unsafe extern "C" fn md_simulation_new(
    config: *const c_char,
    out: *mut *mut MdSimulation,
) -> MdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let text = match config.is_null() {
            true => "",
            false => CStr::from_ptr(config).to_str().map_err(|_| {
                set_error("configuration is not UTF-8");
                MdStatus::InvalidConfig
            })?,
        };
        let sim = build(parse_config(text).map_err(fail)?)?;
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from [`md_simulation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_simulation_free(sim: *mut MdSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// March to the configured final time and evaluate the indicators.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_simulation_run(sim: *mut MdSimulation) -> MdStatus {
    guard(|| {
        let sim = handle_mut(sim)?;
        let c = &sim.config;
        let opts = MarchOptions {
            keep_penultimate: true,
        };
        let traj = time_march(
            &sim.disc,
            c.time.tau,
            c.time.t_end,
            &c.newton_config(),
            &opts,
        )
        .map_err(fail)?;
        let report = estimate_trajectory(&sim.disc, &traj).map_err(fail)?;
        sim.trajectory = Some(traj);
        sim.report = Some(report);
        Ok(())
    })
}

/// Number of mesh vertices, i.e. the length of each state vector.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn md_simulation_num_vertices(
    sim: *const MdSimulation,
    out: *mut usize,
) -> MdStatus {
    guard(|| {
        let sim = handle(sim)?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = sim.disc.num_vertices();
        Ok(())
    })
}

/// Number of stored states, `N + 1` after a run.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn md_simulation_num_states(
    sim: *const MdSimulation,
    out: *mut usize,
) -> MdStatus {
    guard(|| {
        let sim = handle(sim)?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = sim.trajectory.as_ref().map_or(0, |t| t.states.len());
        Ok(())
    })
}

/// Copy state `index` into `u` and `w`, each of capacity `len`, and its time
/// into `time` (which may be null).
///
/// # Safety
/// `sim` must be a live handle; `u` and `w` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn md_simulation_state(
    sim: *const MdSimulation,
    index: usize,
    u: *mut f64,
    w: *mut f64,
    len: usize,
    time: *mut f64,
) -> MdStatus {
    guard(|| {
        let sim = handle(sim)?;
        if u.is_null() || w.is_null() {
            return Err(null("output buffer"));
        }
        let traj = sim
            .trajectory
            .as_ref()
            .ok_or_else(|| invalid("simulation has not been run"))?;
        let state = traj
            .states
            .get(index)
            .ok_or_else(|| invalid("state index out of range"))?;
        if len < state.u.len() {
            set_error(format!("buffers hold {len} values, need {}", state.u.len()));
            return Err(MdStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(u, state.u.len()).copy_from_slice(&state.u);
        std::slice::from_raw_parts_mut(w, state.w.len()).copy_from_slice(&state.w);
        if let Some(t) = time.as_mut() {
            *t = state.time;
        }
        Ok(())
    })
}

/// Indicators of step `step` (1-based, `1..=N`) and the cumulative upper
/// bound at its end. Any output pointer may be null.
///
/// # Safety
/// `sim` must be a live handle; non-null outputs must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn md_simulation_indicators(
    sim: *const MdSimulation,
    step: usize,
    eta: *mut f64,
    theta: *mut f64,
    gamma: *mut f64,
    cumulative: *mut f64,
) -> MdStatus {
    guard(|| {
        let sim = handle(sim)?;
        let report = sim
            .report
            .as_ref()
            .ok_or_else(|| invalid("simulation has not been run"))?;
        let s = step
            .checked_sub(1)
            .and_then(|i| report.steps.get(i))
            .ok_or_else(|| invalid("step index out of range"))?;
        for (ptr, value) in [
            (eta, s.eta),
            (theta, s.theta),
            (gamma, s.gamma),
            (cumulative, report.cumulative[step]),
        ] {
            if let Some(p) = ptr.as_mut() {
                *p = value;
            }
        }
        Ok(())
    })
}

/// Copy the last error message of this thread, NUL-terminated and truncated
/// to `len` bytes, into `buf`. Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn md_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

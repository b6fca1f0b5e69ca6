//! C ABI over the solver suite: opaque handles, integer status codes, and a
//! thread-local error message. The matching header lives at
//! `include/lagflow.h` (kept in sync with `cbindgen.toml` for regeneration).
//!
//! Conventions:
//! - Every constructor writes its result through an out-pointer and returns
//!   a `LagStatus`; on failure the out-pointer is untouched.
//! - Handles are freed exactly once by their `*_free` function; passing null
//!   to a free function is a no-op.
//! - `lag_last_error_message` returns the message of the most recent failure
//!   on the calling thread, valid until the next failing call on it.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use lagflow::field::Field;
use lagflow::grid::Grid;
use lagflow::integrators::{
    step_bdf2, step_bdf2_coupled, step_be1, step_be1_coupled, step_cn, step_cn_coupled,
    CoupledState, ScalarState,
};
use lagflow::models::{CoupledModel, ScalarModel};
use lagflow::multiplier::EtaOptions;

/// Status codes shared by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LagStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonConvergence = 3,
    SolverError = 4,
    Io = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &lagflow::Error) -> LagStatus {
    set_error(&err.to_string());
    if err.is_nonconvergence() {
        LagStatus::NonConvergence
    } else {
        match err {
            lagflow::Error::Config(_) | lagflow::Error::InvalidGrid(_) => LagStatus::InvalidArgument,
            lagflow::Error::Io { .. } => LagStatus::Io,
            _ => LagStatus::SolverError,
        }
    }
}

/// Runs `body` with panic containment; panics map to `LagStatus::Panic`.
fn guarded(body: impl FnOnce() -> LagStatus) -> LagStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in lagflow".to_string());
            set_error(&msg);
            LagStatus::Panic
        }
    }
}

/// Message of the most recent failure on this thread (empty if none).
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lag_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn lag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

pub struct LagGrid {
    inner: Arc<Grid>,
}

pub struct LagField {
    inner: Field,
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn lag_grid_new(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    out: *mut *mut LagGrid,
) -> LagStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return LagStatus::NullPointer;
        }
        match Grid::new(nx, ny, lx, ly) {
            Ok(grid) => {
                *out = Box::into_raw(Box::new(LagGrid { inner: grid }));
                LagStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `grid` must be a handle from `lag_grid_new` not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn lag_grid_free(grid: *mut LagGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live grid handle; `out` as in `lag_grid_new`.
#[no_mangle]
pub unsafe extern "C" fn lag_field_constant(
    grid: *const LagGrid,
    value: f64,
    out: *mut *mut LagField,
) -> LagStatus {
    guarded(|| {
        if grid.is_null() || out.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        let field = Field::constant(&(*grid).inner, value);
        *out = Box::into_raw(Box::new(LagField { inner: field }));
        LagStatus::Ok
    })
}

/// Seeded uniform random field on `[lo, hi)`; the counter-based generator
/// makes the result identical across platforms and bindings.
///
/// # Safety
/// `grid` must be a live grid handle; `out` as in `lag_grid_new`.
#[no_mangle]
pub unsafe extern "C" fn lag_field_random(
    grid: *const LagGrid,
    seed: u64,
    lo: f64,
    hi: f64,
    zero_mean: bool,
    out: *mut *mut LagField,
) -> LagStatus {
    guarded(|| {
        if grid.is_null() || out.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        if !(lo < hi) {
            set_error("require lo < hi");
            return LagStatus::InvalidArgument;
        }
        let field =
            lagflow::io::prng::seeded_uniform_field(&(*grid).inner, seed, lo, hi, zero_mean);
        *out = Box::into_raw(Box::new(LagField { inner: field }));
        LagStatus::Ok
    })
}

/// # Safety
/// `grid` must be live; `values` must point to `len` readable doubles;
/// `len` must equal the grid's point count.
#[no_mangle]
pub unsafe extern "C" fn lag_field_from_values(
    grid: *const LagGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut LagField,
) -> LagStatus {
    guarded(|| {
        if grid.is_null() || values.is_null() || out.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        let grid = &(*grid).inner;
        if len != grid.len() {
            set_error("value length does not match the grid");
            return LagStatus::InvalidArgument;
        }
        let data = std::slice::from_raw_parts(values, len).to_vec();
        *out = Box::into_raw(Box::new(LagField {
            inner: Field::from_values(grid, data),
        }));
        LagStatus::Ok
    })
}

/// Number of samples held by the field (0 for null).
///
/// # Safety
/// `field` must be a live field handle or null.
#[no_mangle]
pub unsafe extern "C" fn lag_field_len(field: *const LagField) -> usize {
    if field.is_null() {
        0
    } else {
        (*field).inner.len()
    }
}

/// Copies the row-major samples into `out`.
///
/// # Safety
/// `field` must be live; `out` must point to `len` writable doubles with
/// `len` equal to `lag_field_len(field)`.
#[no_mangle]
pub unsafe extern "C" fn lag_field_copy_values(
    field: *const LagField,
    out: *mut f64,
    len: usize,
) -> LagStatus {
    guarded(|| {
        if field.is_null() || out.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        let values = (*field).inner.values();
        if len != values.len() {
            set_error("destination length does not match the field");
            return LagStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(values.as_ptr(), out, len);
        LagStatus::Ok
    })
}

/// # Safety
/// `field` must be a handle not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn lag_field_free(field: *mut LagField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Model selector for scalar solvers.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LagScalarKind {
    AllenCahn = 0,
    CahnHilliard = 1,
    ThinFilm = 2,
}

/// Time stencil selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LagScheme {
    FirstOrder = 0,
    HalfStep = 1,
    ThreeLevel = 2,
}

pub struct LagScalarSolver {
    model: ScalarModel,
    scheme: LagScheme,
    dt: f64,
    state: ScalarState,
    eta_opts: EtaOptions,
    last_eta: f64,
}

/// Creates a fixed-step scalar solver from an initial field. Two-level
/// schemes take their first step with the first-order stencil.
///
/// # Safety
/// `ic` must be a live field handle; `out` as in `lag_grid_new`.
#[no_mangle]
pub unsafe extern "C" fn lag_scalar_solver_new(
    kind: LagScalarKind,
    eps: f64,
    mobility: f64,
    scheme: LagScheme,
    dt: f64,
    ic: *const LagField,
    out: *mut *mut LagScalarSolver,
) -> LagStatus {
    guarded(|| {
        if ic.is_null() || out.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        if !(eps > 0.0) || !(mobility > 0.0) || !(dt > 0.0) {
            set_error("eps, mobility, and dt must be positive");
            return LagStatus::InvalidArgument;
        }
        let model = match kind {
            LagScalarKind::AllenCahn => ScalarModel::allen_cahn(eps),
            LagScalarKind::CahnHilliard => ScalarModel::cahn_hilliard(eps),
            LagScalarKind::ThinFilm => ScalarModel::mbe(eps, mobility),
        };
        let state = ScalarState::new((*ic).inner.clone());
        *out = Box::into_raw(Box::new(LagScalarSolver {
            model,
            scheme,
            dt,
            state,
            eta_opts: EtaOptions::default(),
            last_eta: 1.0,
        }));
        LagStatus::Ok
    })
}

/// Advances `steps` fixed steps. On non-convergence the state is left at the
/// last completed step and `LAG_STATUS_NON_CONVERGENCE` is returned.
///
/// # Safety
/// `solver` must be a live solver handle.
#[no_mangle]
pub unsafe extern "C" fn lag_scalar_solver_advance(
    solver: *mut LagScalarSolver,
    steps: u64,
) -> LagStatus {
    guarded(|| {
        if solver.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        let s = &mut *solver;
        for _ in 0..steps {
            let startup = s.state.step_index == 0 && s.scheme != LagScheme::FirstOrder;
            let result = if startup {
                step_be1(&mut s.state, &s.model, s.dt, None, &s.eta_opts, false)
            } else {
                match s.scheme {
                    LagScheme::FirstOrder => {
                        step_be1(&mut s.state, &s.model, s.dt, None, &s.eta_opts, false)
                    }
                    LagScheme::HalfStep => {
                        step_cn(&mut s.state, &s.model, s.dt, None, &s.eta_opts, false)
                    }
                    LagScheme::ThreeLevel => {
                        step_bdf2(&mut s.state, &s.model, s.dt, None, &s.eta_opts, false)
                    }
                }
            };
            match result {
                Ok(report) => s.last_eta = report.eta,
                Err(e) => return status_of(&e),
            }
        }
        LagStatus::Ok
    })
}

/// # Safety
/// `solver` must be a live solver handle or null.
#[no_mangle]
pub unsafe extern "C" fn lag_scalar_solver_time(solver: *const LagScalarSolver) -> f64 {
    if solver.is_null() {
        f64::NAN
    } else {
        (*solver).state.t
    }
}

/// # Safety
/// `solver` must be a live solver handle or null.
#[no_mangle]
pub unsafe extern "C" fn lag_scalar_solver_eta(solver: *const LagScalarSolver) -> f64 {
    if solver.is_null() {
        f64::NAN
    } else {
        (*solver).last_eta
    }
}

/// Total free energy of the current state.
///
/// # Safety
/// `solver` must be a live solver handle or null.
#[no_mangle]
pub unsafe extern "C" fn lag_scalar_solver_energy(solver: *const LagScalarSolver) -> f64 {
    if solver.is_null() {
        f64::NAN
    } else {
        let s = &*solver;
        s.model.total_energy(&s.state.phi)
    }
}

/// Clones the current field into a new handle.
///
/// # Safety
/// `solver` must be live; `out` as in `lag_grid_new`.
#[no_mangle]
pub unsafe extern "C" fn lag_scalar_solver_field(
    solver: *const LagScalarSolver,
    out: *mut *mut LagField,
) -> LagStatus {
    guarded(|| {
        if solver.is_null() || out.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        *out = Box::into_raw(Box::new(LagField {
            inner: (*solver).state.phi.clone(),
        }));
        LagStatus::Ok
    })
}

/// # Safety
/// `solver` must be a handle not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn lag_scalar_solver_free(solver: *mut LagScalarSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Parameters of the coupled conserved system.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LagCoupledParams {
    pub eps_u: f64,
    pub eps_v: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub m_u: f64,
    pub m_v: f64,
    pub s_u: f64,
    pub s_v: f64,
}

pub struct LagCoupledSolver {
    model: CoupledModel,
    scheme: LagScheme,
    dt: f64,
    state: CoupledState,
    eta_opts: EtaOptions,
    last_eta: f64,
}

/// # Safety
/// `u0`, `v0` must be live field handles on one grid; `out` as in
/// `lag_grid_new`.
#[no_mangle]
pub unsafe extern "C" fn lag_coupled_solver_new(
    params: LagCoupledParams,
    scheme: LagScheme,
    dt: f64,
    u0: *const LagField,
    v0: *const LagField,
    out: *mut *mut LagCoupledSolver,
) -> LagStatus {
    guarded(|| {
        if u0.is_null() || v0.is_null() || out.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        if !(params.eps_u > 0.0)
            || !(params.eps_v > 0.0)
            || params.sigma < 0.0
            || !(params.m_u > 0.0)
            || !(params.m_v > 0.0)
            || params.s_u < 0.0
            || params.s_v < 0.0
            || !(dt > 0.0)
        {
            set_error("invalid coupled parameters");
            return LagStatus::InvalidArgument;
        }
        if !(*u0).inner.grid().same_as((*v0).inner.grid()) {
            set_error("u0 and v0 live on different grids");
            return LagStatus::InvalidArgument;
        }
        let model = CoupledModel::new(
            params.eps_u,
            params.eps_v,
            params.sigma,
            params.alpha,
            params.beta,
            params.gamma,
        )
        .with_mobilities(params.m_u, params.m_v)
        .with_stabilization(params.s_u, params.s_v);
        let state = CoupledState::new((*u0).inner.clone(), (*v0).inner.clone());
        *out = Box::into_raw(Box::new(LagCoupledSolver {
            model,
            scheme,
            dt,
            state,
            eta_opts: EtaOptions::default(),
            last_eta: 1.0,
        }));
        LagStatus::Ok
    })
}

/// # Safety
/// `solver` must be a live solver handle.
#[no_mangle]
pub unsafe extern "C" fn lag_coupled_solver_advance(
    solver: *mut LagCoupledSolver,
    steps: u64,
) -> LagStatus {
    guarded(|| {
        if solver.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        let s = &mut *solver;
        for _ in 0..steps {
            let startup = s.state.step_index == 0 && s.scheme != LagScheme::FirstOrder;
            let result = if startup {
                step_be1_coupled(&mut s.state, &s.model, s.dt, None, &s.eta_opts, false)
            } else {
                match s.scheme {
                    LagScheme::FirstOrder => {
                        step_be1_coupled(&mut s.state, &s.model, s.dt, None, &s.eta_opts, false)
                    }
                    LagScheme::HalfStep => {
                        step_cn_coupled(&mut s.state, &s.model, s.dt, None, &s.eta_opts, false)
                    }
                    LagScheme::ThreeLevel => {
                        step_bdf2_coupled(&mut s.state, &s.model, s.dt, None, &s.eta_opts, false)
                    }
                }
            };
            match result {
                Ok(report) => s.last_eta = report.eta,
                Err(e) => return status_of(&e),
            }
        }
        LagStatus::Ok
    })
}

/// # Safety
/// `solver` must be a live solver handle or null.
#[no_mangle]
pub unsafe extern "C" fn lag_coupled_solver_time(solver: *const LagCoupledSolver) -> f64 {
    if solver.is_null() {
        f64::NAN
    } else {
        (*solver).state.t
    }
}

/// # Safety
/// `solver` must be a live solver handle or null.
#[no_mangle]
pub unsafe extern "C" fn lag_coupled_solver_eta(solver: *const LagCoupledSolver) -> f64 {
    if solver.is_null() {
        f64::NAN
    } else {
        (*solver).last_eta
    }
}

/// # Safety
/// `solver` must be a live solver handle or null.
#[no_mangle]
pub unsafe extern "C" fn lag_coupled_solver_energy(solver: *const LagCoupledSolver) -> f64 {
    if solver.is_null() {
        f64::NAN
    } else {
        let s = &*solver;
        s.model.total_energy(&s.state.u, &s.state.v)
    }
}

/// Clones the current component fields into new handles.
///
/// # Safety
/// `solver` must be live; `out_u`, `out_v` as in `lag_grid_new`.
#[no_mangle]
pub unsafe extern "C" fn lag_coupled_solver_fields(
    solver: *const LagCoupledSolver,
    out_u: *mut *mut LagField,
    out_v: *mut *mut LagField,
) -> LagStatus {
    guarded(|| {
        if solver.is_null() || out_u.is_null() || out_v.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        *out_u = Box::into_raw(Box::new(LagField {
            inner: (*solver).state.u.clone(),
        }));
        *out_v = Box::into_raw(Box::new(LagField {
            inner: (*solver).state.v.clone(),
        }));
        LagStatus::Ok
    })
}

/// # Safety
/// `solver` must be a handle not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn lag_coupled_solver_free(solver: *mut LagCoupledSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Parses a config text and executes it like `lagflow simulate` would,
/// writing outputs under the configured directory.
///
/// # Safety
/// `config_text` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn lag_run_config(config_text: *const c_char) -> LagStatus {
    guarded(|| {
        if config_text.is_null() {
            set_error("null pointer argument");
            return LagStatus::NullPointer;
        }
        let text = match std::ffi::CStr::from_ptr(config_text).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("config text is not valid UTF-8");
                return LagStatus::InvalidArgument;
            }
        };
        let config = match lagflow::io::config::parse_config(text) {
            Ok(c) => c,
            Err(e) => return status_of(&e),
        };
        match lagflow::io::driver::run_simulation(&config) {
            Ok(_) => LagStatus::Ok,
            Err(e) => status_of(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_field_round_trip() {
        unsafe {
            let mut grid: *mut LagGrid = std::ptr::null_mut();
            assert_eq!(
                lag_grid_new(16, 16, std::f64::consts::TAU, std::f64::consts::TAU, &mut grid),
                LagStatus::Ok
            );
            let mut field: *mut LagField = std::ptr::null_mut();
            assert_eq!(
                lag_field_random(grid, 42, -1.0, 1.0, true, &mut field),
                LagStatus::Ok
            );
            assert_eq!(lag_field_len(field), 256);
            let mut values = vec![0.0_f64; 256];
            assert_eq!(
                lag_field_copy_values(field, values.as_mut_ptr(), values.len()),
                LagStatus::Ok
            );
            let mean: f64 = values.iter().sum::<f64>() / 256.0;
            assert!(mean.abs() < 1e-14);

            let mut copy: *mut LagField = std::ptr::null_mut();
            assert_eq!(
                lag_field_from_values(grid, values.as_ptr(), values.len(), &mut copy),
                LagStatus::Ok
            );
            lag_field_free(copy);
            lag_field_free(field);
            lag_grid_free(grid);
        }
    }

    #[test]
    fn invalid_grid_reports_status_and_message() {
        unsafe {
            let mut grid: *mut LagGrid = std::ptr::null_mut();
            let status = lag_grid_new(3, 16, 1.0, 1.0, &mut grid);
            assert_eq!(status, LagStatus::InvalidArgument);
            assert!(grid.is_null());
            let msg = std::ffi::CStr::from_ptr(lag_last_error_message());
            assert!(msg.to_str().unwrap().contains("even"));
        }
    }

    #[test]
    fn scalar_solver_dissipates_energy() {
        unsafe {
            let mut grid: *mut LagGrid = std::ptr::null_mut();
            lag_grid_new(32, 32, std::f64::consts::TAU, std::f64::consts::TAU, &mut grid);
            let mut ic: *mut LagField = std::ptr::null_mut();
            lag_field_random(grid, 7, -0.1, 0.1, false, &mut ic);
            let mut solver: *mut LagScalarSolver = std::ptr::null_mut();
            assert_eq!(
                lag_scalar_solver_new(
                    LagScalarKind::AllenCahn,
                    0.3,
                    1.0,
                    LagScheme::ThreeLevel,
                    1e-3,
                    ic,
                    &mut solver,
                ),
                LagStatus::Ok
            );
            let e0 = lag_scalar_solver_energy(solver);
            assert_eq!(lag_scalar_solver_advance(solver, 50), LagStatus::Ok);
            let e1 = lag_scalar_solver_energy(solver);
            assert!(e1 < e0, "{e1} vs {e0}");
            assert!((lag_scalar_solver_time(solver) - 0.05).abs() < 1e-12);
            assert!((lag_scalar_solver_eta(solver) - 1.0).abs() < 0.2);

            let mut snapshot: *mut LagField = std::ptr::null_mut();
            assert_eq!(lag_scalar_solver_field(solver, &mut snapshot), LagStatus::Ok);
            assert_eq!(lag_field_len(snapshot), 1024);
            lag_field_free(snapshot);
            lag_scalar_solver_free(solver);
            lag_field_free(ic);
            lag_grid_free(grid);
        }
    }

    #[test]
    fn coupled_solver_conserves_means() {
        unsafe {
            let mut grid: *mut LagGrid = std::ptr::null_mut();
            lag_grid_new(16, 16, std::f64::consts::TAU, std::f64::consts::TAU, &mut grid);
            let mut u0: *mut LagField = std::ptr::null_mut();
            let mut v0: *mut LagField = std::ptr::null_mut();
            lag_field_random(grid, 11, -0.3, 0.3, false, &mut u0);
            lag_field_random(grid, 12, -0.3, 0.3, false, &mut v0);
            let params = LagCoupledParams {
                eps_u: 0.2,
                eps_v: 0.2,
                sigma: 5.0,
                alpha: -0.1,
                beta: 0.3,
                gamma: 0.0,
                m_u: 1.0,
                m_v: 1.0,
                s_u: 1.0,
                s_v: 1.0,
            };
            let mut solver: *mut LagCoupledSolver = std::ptr::null_mut();
            assert_eq!(
                lag_coupled_solver_new(params, LagScheme::ThreeLevel, 1e-4, u0, v0, &mut solver),
                LagStatus::Ok
            );

            let mean_of = |f: *const LagField| {
                let n = lag_field_len(f);
                let mut buf = vec![0.0_f64; n];
                lag_field_copy_values(f, buf.as_mut_ptr(), n);
                buf.iter().sum::<f64>() / n as f64
            };
            let m0 = mean_of(u0);
            assert_eq!(lag_coupled_solver_advance(solver, 100), LagStatus::Ok);
            let mut u: *mut LagField = std::ptr::null_mut();
            let mut v: *mut LagField = std::ptr::null_mut();
            assert_eq!(lag_coupled_solver_fields(solver, &mut u, &mut v), LagStatus::Ok);
            assert!((mean_of(u) - m0).abs() < 1e-13);
            assert!(lag_coupled_solver_energy(solver).is_finite());

            lag_field_free(u);
            lag_field_free(v);
            lag_coupled_solver_free(solver);
            lag_field_free(u0);
            lag_field_free(v0);
            lag_grid_free(grid);
        }
    }

    #[test]
    fn run_config_executes_a_small_simulation() {
        let dir = std::env::temp_dir().join(format!("lagflow-ffi-run-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let text = format!(
            "model = allen-cahn\nnx = 16\neps = 0.5\nscheme = bdf2\ndt = 1e-3\nt_end = 5e-3\n\
             seed = 3\noutput_dir = {}\n",
            dir.display()
        );
        let ctext = CString::new(text).unwrap();
        unsafe {
            assert_eq!(lag_run_config(ctext.as_ptr()), LagStatus::Ok);
        }
        assert!(dir.join("energy.csv").exists());

        unsafe {
            let bad = CString::new("model = nope\n").unwrap();
            assert_eq!(lag_run_config(bad.as_ptr()), LagStatus::InvalidArgument);
        }
    }
}

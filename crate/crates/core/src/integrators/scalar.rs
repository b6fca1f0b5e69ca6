//! Steppers for the single-field flows.
//!
//! Every scheme reduces to the same three moves: solve the constant-
//! coefficient operator for `p` and `q`, find the multiplier from the scalar
//! equation, and set `phi^{n+1} = p + eta q`. The half-step scheme keeps the
//! exact 1/2 factors in its implicit operator, which is what makes its
//! discrete energy identity close to roundoff.

use crate::error::Result;
use crate::field::Field;
use crate::integrators::StepReport;
use crate::models::{ScalarForcing, ScalarModel};
use crate::multiplier::{
    build_scalar_eta_equation, solve_eta, EtaOptions, SchemeWeights,
};
use crate::spectral::{apply_symbol, quad_form, DiagonalOp, Symbol};

/// Current and previous field with step bookkeeping.
#[derive(Clone, Debug)]
pub struct ScalarState {
    pub phi: Field,
    pub phi_prev: Field,
    pub t: f64,
    /// Size of the last completed step; 0 before the first one.
    pub dt_prev: f64,
    pub eta_last: f64,
    pub step_index: u64,
}

impl ScalarState {
    pub fn new(phi0: Field) -> ScalarState {
        ScalarState {
            phi_prev: phi0.clone(),
            phi: phi0,
            t: 0.0,
            dt_prev: 0.0,
            eta_last: 1.0,
            step_index: 0,
        }
    }
}

fn gl_symbol(model: &ScalarModel, grid: &std::sync::Arc<crate::grid::Grid>) -> Symbol {
    let (b, c) = model.gl_coeffs();
    Symbol::from_fn(
        grid,
        |kx, ky| {
            let k2 = kx * kx + ky * ky;
            b * k2 + c * k2 * k2
        },
        0.0,
    )
}

fn chi(model: &ScalarModel, grid: &std::sync::Arc<crate::grid::Grid>, a: f64, w: f64) -> Result<DiagonalOp> {
    let (b, c) = model.gl_coeffs();
    DiagonalOp::new(grid, a, w * b, w * c, 0.0)
}

fn rotate(state: &mut ScalarState, phi_new: Field, dt: f64, eta: f64) {
    state.phi_prev = std::mem::replace(&mut state.phi, phi_new);
    state.t += dt;
    state.dt_prev = dt;
    state.eta_last = eta;
    state.step_index += 1;
}

fn energy_scale(a: f64, b: f64) -> f64 {
    a.abs().max(b.abs()).max(1e-300)
}

/// First-order step: implicit linear part, multiplier against `F'(phi^n)`.
/// Also serves as the startup step for the two-level schemes.
pub fn step_be1(
    state: &mut ScalarState,
    model: &ScalarModel,
    dt: f64,
    forcing: Option<&dyn ScalarForcing>,
    eta_opts: &EtaOptions,
    track_law: bool,
) -> Result<StepReport> {
    assert!(dt > 0.0);
    let grid = state.phi.grid().clone();
    let chi = chi(model, &grid, 1.0 / dt, 1.0)?;
    let force_star = model.nonlinear_force(&state.phi);

    let mut rhs = state.phi.scaled(1.0 / dt);
    if let Some(f) = forcing {
        rhs.add_assign(&f.eval(&grid, state.t + dt));
    }
    let p = chi.solve(&rhs);
    let q = chi.solve(&model.apply_g(&force_star).scaled(-1.0));

    let eq = build_scalar_eta_equation(
        model,
        SchemeWeights::TWO_LEVEL,
        &p,
        &q,
        &state.phi,
        &state.phi_prev,
        &force_star,
    );
    let sol = solve_eta(&eq, eta_opts)?;
    let phi_new = p.lin_comb(1.0, &q, sol.eta);

    let law_residual = if track_law && forcing.is_none() {
        // E^{n+1} - E^n = -dt (G mu, mu) - 1/2 (L dphi, dphi) exactly,
        // with mu = L phi^{n+1} + eta F'(phi^n).
        let lsym = model.linear_symbol(&grid);
        let mut mu = apply_symbol(&lsym, &phi_new);
        mu.add_scaled_assign(sol.eta, &force_star);
        let dphi = phi_new.lin_comb(1.0, &state.phi, -1.0);
        let e_new = model.total_energy(&phi_new);
        let e_old = model.total_energy(&state.phi);
        let defect = e_new - e_old + dt * model.g_form(&mu) + 0.5 * quad_form(&lsym, &dphi);
        Some(defect.abs() / energy_scale(e_new, e_old))
    } else {
        None
    };

    rotate(state, phi_new, dt, sol.eta);
    Ok(StepReport {
        eta: sol.eta,
        newton_iters: sol.iterations,
        law_residual,
        near_root: sol.near_root,
    })
}

/// First-order step with the multiplier pinned at its continuous value 1
/// (a plain semi-implicit step). No discrete energy identity is attached;
/// used to bootstrap accuracy studies, where solving the multiplier
/// equation on the startup step leaves a seed whose interaction with the
/// marching scheme distorts the finest-row errors.
pub fn step_be1_semi_implicit(
    state: &mut ScalarState,
    model: &ScalarModel,
    dt: f64,
    forcing: Option<&dyn ScalarForcing>,
) -> Result<StepReport> {
    assert!(dt > 0.0);
    let grid = state.phi.grid().clone();
    let chi = chi(model, &grid, 1.0 / dt, 1.0)?;
    let force = model.nonlinear_force(&state.phi);
    let mut rhs = state.phi.scaled(1.0 / dt);
    if let Some(f) = forcing {
        rhs.add_assign(&f.eval(&grid, state.t + dt));
    }
    let p = chi.solve(&rhs);
    let q = chi.solve(&model.apply_g(&force).scaled(-1.0));
    let phi_new = p.lin_comb(1.0, &q, 1.0);
    rotate(state, phi_new, dt, 1.0);
    Ok(StepReport {
        eta: 1.0,
        newton_iters: 0,
        law_residual: None,
        near_root: false,
    })
}

/// Second-order half-step scheme. The explicit level is extrapolated with
/// the step-ratio weights `(1 + a/2, -a/2)`, which reduce to `(3/2, -1/2)`
/// at constant step size.
pub fn step_cn(
    state: &mut ScalarState,
    model: &ScalarModel,
    dt: f64,
    forcing: Option<&dyn ScalarForcing>,
    eta_opts: &EtaOptions,
    track_law: bool,
) -> Result<StepReport> {
    assert!(dt > 0.0);
    let grid = state.phi.grid().clone();
    let a_ratio = if state.dt_prev > 0.0 { dt / state.dt_prev } else { 1.0 };
    let phi_star = state
        .phi
        .lin_comb(1.0 + 0.5 * a_ratio, &state.phi_prev, -0.5 * a_ratio);
    let force_star = model.nonlinear_force(&phi_star);

    let chi = chi(model, &grid, 1.0 / dt, 0.5)?;
    let gl = gl_symbol(model, &grid);
    let mut rhs = state.phi.scaled(1.0 / dt);
    rhs.add_scaled_assign(-0.5, &apply_symbol(&gl, &state.phi));
    if let Some(f) = forcing {
        rhs.add_assign(&f.eval(&grid, state.t + 0.5 * dt));
    }
    let p = chi.solve(&rhs);
    let q = chi.solve(&model.apply_g(&force_star).scaled(-1.0));

    let eq = build_scalar_eta_equation(
        model,
        SchemeWeights::TWO_LEVEL,
        &p,
        &q,
        &state.phi,
        &state.phi_prev,
        &force_star,
    );
    let sol = solve_eta(&eq, eta_opts)?;
    let phi_new = p.lin_comb(1.0, &q, sol.eta);

    let law_residual = if track_law && forcing.is_none() {
        // E^{n+1} - E^n = -dt (G mu_half, mu_half) exactly, with
        // mu_half = L (phi^{n+1} + phi^n)/2 + eta F'(phi*).
        let half = phi_new.lin_comb(0.5, &state.phi, 0.5);
        let mut mu = apply_symbol(&model.linear_symbol(&grid), &half);
        mu.add_scaled_assign(sol.eta, &force_star);
        let e_new = model.total_energy(&phi_new);
        let e_old = model.total_energy(&state.phi);
        let defect = e_new - e_old + dt * model.g_form(&mu);
        Some(defect.abs() / energy_scale(e_new, e_old))
    } else {
        None
    };

    rotate(state, phi_new, dt, sol.eta);
    Ok(StepReport {
        eta: sol.eta,
        newton_iters: sol.iterations,
        law_residual,
        near_root: sol.near_root,
    })
}

/// Second-order three-level scheme; requires two back levels at the same
/// step size.
pub fn step_bdf2(
    state: &mut ScalarState,
    model: &ScalarModel,
    dt: f64,
    forcing: Option<&dyn ScalarForcing>,
    eta_opts: &EtaOptions,
    track_law: bool,
) -> Result<StepReport> {
    assert!(dt > 0.0);
    let grid = state.phi.grid().clone();
    let phi_star = state.phi.lin_comb(2.0, &state.phi_prev, -1.0);
    let force_star = model.nonlinear_force(&phi_star);

    let chi = chi(model, &grid, 1.5 / dt, 1.0)?;
    let mut rhs = state
        .phi
        .lin_comb(2.0 / dt, &state.phi_prev, -0.5 / dt);
    if let Some(f) = forcing {
        rhs.add_assign(&f.eval(&grid, state.t + dt));
    }
    let p = chi.solve(&rhs);
    let q = chi.solve(&model.apply_g(&force_star).scaled(-1.0));

    let eq = build_scalar_eta_equation(
        model,
        SchemeWeights::THREE_LEVEL,
        &p,
        &q,
        &state.phi,
        &state.phi_prev,
        &force_star,
    );
    let sol = solve_eta(&eq, eta_opts)?;
    let phi_new = p.lin_comb(1.0, &q, sol.eta);

    let law_residual = if track_law && forcing.is_none() {
        // Telescoping balance of the three-level scheme:
        // Etilde^{n+1} - Etilde^n = -dt (G mu, mu) - 1/4 (L d2, d2)
        // with d2 the second difference and mu = L phi^{n+1} + eta F'(phi*).
        let lsym = model.linear_symbol(&grid);
        let mut mu = apply_symbol(&lsym, &phi_new);
        mu.add_scaled_assign(sol.eta, &force_star);
        let d2 = phi_new
            .lin_comb(1.0, &state.phi, -2.0)
            .lin_comb(1.0, &state.phi_prev, 1.0);
        let e_new = crate::diagnostics::scalar_modified_energy_bdf2(model, &phi_new, &state.phi);
        let e_old =
            crate::diagnostics::scalar_modified_energy_bdf2(model, &state.phi, &state.phi_prev);
        let defect = e_new - e_old + dt * model.g_form(&mu) + 0.25 * quad_form(&lsym, &d2);
        Some(defect.abs() / energy_scale(e_new, e_old))
    } else {
        None
    };

    rotate(state, phi_new, dt, sol.eta);
    Ok(StepReport {
        eta: sol.eta,
        newton_iters: sol.iterations,
        law_residual,
        near_root: sol.near_root,
    })
}

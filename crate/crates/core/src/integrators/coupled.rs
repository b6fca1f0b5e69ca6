//! Steppers for the coupled conserved system, plain and stabilized.
//!
//! The long-range term is implicit: pushing `-sigma Delta^{-1}(v - mean v)`
//! through the mobility Laplacian adds `M_v sigma (I - mean)` to the
//! implicit operator on `v`, and the stabilization shifts add
//! `M S (-Delta)`. Both components share one multiplier, determined from the
//! combined degree-4 equation.

use std::sync::Arc;

use crate::diagnostics::{coupled_modified_energy_bdf2, coupled_quadratic_form};
use crate::error::Result;
use crate::field::Field;
use crate::grid::Grid;
use crate::integrators::StepReport;
use crate::models::{CoupledForcing, CoupledModel};
use crate::multiplier::{
    build_coupled_eta_equation, solve_eta, EtaOptions, EtaSolveReport, SchemeWeights,
};
use crate::spectral::{
    apply_symbol, inverse_laplacian_zero_mean, quad_form, DiagonalOp, Symbol,
};

/// Two components at the current and previous level.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub u: Field,
    pub v: Field,
    pub u_prev: Field,
    pub v_prev: Field,
    pub t: f64,
    pub dt_prev: f64,
    pub eta_last: f64,
    pub step_index: u64,
}

impl CoupledState {
    pub fn new(u0: Field, v0: Field) -> CoupledState {
        crate::grid::check_same_grid(u0.grid(), v0.grid());
        CoupledState {
            u_prev: u0.clone(),
            v_prev: v0.clone(),
            u: u0,
            v: v0,
            t: 0.0,
            dt_prev: 0.0,
            eta_last: 1.0,
            step_index: 0,
        }
    }
}

/// Implicit operator on `u`: `a + w * M_u (eps_u^2 |k|^4 + S_u |k|^2)`.
fn chi_u(model: &CoupledModel, grid: &Arc<Grid>, a: f64, w: f64) -> Result<DiagonalOp> {
    DiagonalOp::new(
        grid,
        a,
        w * model.m_u * model.s_u,
        w * model.m_u * model.eps_u * model.eps_u,
        0.0,
    )
}

/// Implicit operator on `v`; carries the long-range term as
/// `w * M_v sigma (I - mean)`.
fn chi_v(model: &CoupledModel, grid: &Arc<Grid>, a: f64, w: f64) -> Result<DiagonalOp> {
    DiagonalOp::new(
        grid,
        a,
        w * model.m_v * model.s_v,
        w * model.m_v * model.eps_v * model.eps_v,
        w * model.m_v * model.sigma,
    )
}

/// Chemical potential of `u` at the given level with multiplier applied.
fn mu_u(model: &CoupledModel, u: &Field, eta: f64, force_star: &Field) -> Field {
    let mut mu = apply_symbol(&Symbol::neg_laplacian(u.grid()), u)
        .scaled(model.eps_u * model.eps_u);
    mu.add_scaled_assign(model.s_u, u);
    mu.add_scaled_assign(eta, force_star);
    mu
}

fn mu_v(model: &CoupledModel, v: &Field, eta: f64, force_star: &Field) -> Field {
    let mut mu = apply_symbol(&Symbol::neg_laplacian(v.grid()), v)
        .scaled(model.eps_v * model.eps_v);
    mu.add_scaled_assign(model.s_v, v);
    mu.add_scaled_assign(eta, force_star);
    mu.add_scaled_assign(-model.sigma, &inverse_laplacian_zero_mean(v));
    mu
}

/// `dt * (M_u |grad mu_u|^2 + M_v |grad mu_v|^2)`.
fn dissipation(model: &CoupledModel, mu_u: &Field, mu_v: &Field) -> f64 {
    let neg_lap = Symbol::neg_laplacian(mu_u.grid());
    model.m_u * quad_form(&neg_lap, mu_u) + model.m_v * quad_form(&neg_lap, mu_v)
}

fn energy_scale(a: f64, b: f64) -> f64 {
    a.abs().max(b.abs()).max(1e-300)
}

struct Elimination {
    p_u: Field,
    q_u: Field,
    p_v: Field,
    q_v: Field,
    force_star_u: Field,
    force_star_v: Field,
}

/// Shared step-1 machinery: given the implicit operators and explicit data,
/// produce the `p`/`q` splitting for both components.
#[allow(clippy::too_many_arguments)]
fn eliminate(
    model: &CoupledModel,
    grid: &Arc<Grid>,
    chi_u: &DiagonalOp,
    chi_v: &DiagonalOp,
    rhs_u: &Field,
    rhs_v: &Field,
    u_star: &Field,
    v_star: &Field,
) -> Elimination {
    let (force_star_u, force_star_v) = model.nonlinear_force(u_star, v_star);
    let neg_lap = Symbol::neg_laplacian(grid);
    // q = chi^{-1} { M Delta F* } and Delta = -(-Delta)
    let q_u = chi_u.solve(&apply_symbol(&neg_lap, &force_star_u).scaled(-model.m_u));
    let q_v = chi_v.solve(&apply_symbol(&neg_lap, &force_star_v).scaled(-model.m_v));
    Elimination {
        p_u: chi_u.solve(rhs_u),
        q_u,
        p_v: chi_v.solve(rhs_v),
        q_v,
        force_star_u,
        force_star_v,
    }
}

/// Forms the new levels and rotates the state; afterwards `state.u/v` hold
/// the new fields and `state.u_prev/v_prev` the previous ones.
fn finish_step(state: &mut CoupledState, elim: &Elimination, sol: &EtaSolveReport, dt: f64) {
    let u_new = elim.p_u.lin_comb(1.0, &elim.q_u, sol.eta);
    let v_new = elim.p_v.lin_comb(1.0, &elim.q_v, sol.eta);
    state.u_prev = std::mem::replace(&mut state.u, u_new);
    state.v_prev = std::mem::replace(&mut state.v, v_new);
    state.t += dt;
    state.dt_prev = dt;
    state.eta_last = sol.eta;
    state.step_index += 1;
}

/// First-order step; also the startup and the estimator of the adaptive
/// controller.
pub fn step_be1_coupled(
    state: &mut CoupledState,
    model: &CoupledModel,
    dt: f64,
    forcing: Option<&dyn CoupledForcing>,
    eta_opts: &EtaOptions,
    track_law: bool,
) -> Result<StepReport> {
    assert!(dt > 0.0);
    let grid = state.u.grid().clone();
    let chi_u = chi_u(model, &grid, 1.0 / dt, 1.0)?;
    let chi_v = chi_v(model, &grid, 1.0 / dt, 1.0)?;

    let mut rhs_u = state.u.scaled(1.0 / dt);
    let mut rhs_v = state.v.scaled(1.0 / dt);
    if let Some(f) = forcing {
        let (fu, fv) = f.eval(&grid, state.t + dt);
        rhs_u.add_assign(&fu);
        rhs_v.add_assign(&fv);
    }

    let u_star = state.u.clone();
    let v_star = state.v.clone();
    let elim = eliminate(model, &grid, &chi_u, &chi_v, &rhs_u, &rhs_v, &u_star, &v_star);

    let eq = build_coupled_eta_equation(
        model,
        SchemeWeights::TWO_LEVEL,
        &elim.p_u,
        &elim.q_u,
        &elim.p_v,
        &elim.q_v,
        &state.u,
        &state.u_prev,
        &state.v,
        &state.v_prev,
        &elim.force_star_u,
        &elim.force_star_v,
    );
    let sol = solve_eta(&eq, eta_opts)?;

    let need_law = track_law && forcing.is_none();
    let e_old = need_law.then(|| model.total_energy(&state.u, &state.v));
    finish_step(state, &elim, &sol, dt);

    let law_residual = e_old.map(|e_old| {
        let muu = mu_u(model, &state.u, sol.eta, &elim.force_star_u);
        let muv = mu_v(model, &state.v, sol.eta, &elim.force_star_v);
        let du = state.u.lin_comb(1.0, &state.u_prev, -1.0);
        let dv = state.v.lin_comb(1.0, &state.v_prev, -1.0);
        let e_new = model.total_energy(&state.u, &state.v);
        let defect = e_new - e_old
            + dt * dissipation(model, &muu, &muv)
            + 0.5 * coupled_quadratic_form(model, &du, &dv);
        defect.abs() / energy_scale(e_new, e_old)
    });

    Ok(StepReport {
        eta: sol.eta,
        newton_iters: sol.iterations,
        law_residual,
        near_root: sol.near_root,
    })
}

/// First-order step with the multiplier pinned at 1; the coupled analogue
/// of the scalar semi-implicit bootstrap.
pub fn step_be1_semi_implicit_coupled(
    state: &mut CoupledState,
    model: &CoupledModel,
    dt: f64,
    forcing: Option<&dyn CoupledForcing>,
) -> Result<StepReport> {
    assert!(dt > 0.0);
    let grid = state.u.grid().clone();
    let chi_u = chi_u(model, &grid, 1.0 / dt, 1.0)?;
    let chi_v = chi_v(model, &grid, 1.0 / dt, 1.0)?;
    let mut rhs_u = state.u.scaled(1.0 / dt);
    let mut rhs_v = state.v.scaled(1.0 / dt);
    if let Some(f) = forcing {
        let (fu, fv) = f.eval(&grid, state.t + dt);
        rhs_u.add_assign(&fu);
        rhs_v.add_assign(&fv);
    }
    let u_star = state.u.clone();
    let v_star = state.v.clone();
    let elim = eliminate(model, &grid, &chi_u, &chi_v, &rhs_u, &rhs_v, &u_star, &v_star);
    let sol = EtaSolveReport {
        eta: 1.0,
        iterations: 0,
        residual_norm: 0.0,
        converged: true,
        near_root: false,
    };
    finish_step(state, &elim, &sol, dt);
    Ok(StepReport {
        eta: 1.0,
        newton_iters: 0,
        law_residual: None,
        near_root: false,
    })
}

/// Three-level second-order step (plain for `S = 0`, stabilized otherwise).
pub fn step_bdf2_coupled(
    state: &mut CoupledState,
    model: &CoupledModel,
    dt: f64,
    forcing: Option<&dyn CoupledForcing>,
    eta_opts: &EtaOptions,
    track_law: bool,
) -> Result<StepReport> {
    assert!(dt > 0.0);
    let grid = state.u.grid().clone();
    let chi_u = chi_u(model, &grid, 1.5 / dt, 1.0)?;
    let chi_v = chi_v(model, &grid, 1.5 / dt, 1.0)?;

    let mut rhs_u = state.u.lin_comb(2.0 / dt, &state.u_prev, -0.5 / dt);
    let mut rhs_v = state.v.lin_comb(2.0 / dt, &state.v_prev, -0.5 / dt);
    if let Some(f) = forcing {
        let (fu, fv) = f.eval(&grid, state.t + dt);
        rhs_u.add_assign(&fu);
        rhs_v.add_assign(&fv);
    }

    let u_star = state.u.lin_comb(2.0, &state.u_prev, -1.0);
    let v_star = state.v.lin_comb(2.0, &state.v_prev, -1.0);
    let elim = eliminate(model, &grid, &chi_u, &chi_v, &rhs_u, &rhs_v, &u_star, &v_star);

    let eq = build_coupled_eta_equation(
        model,
        SchemeWeights::THREE_LEVEL,
        &elim.p_u,
        &elim.q_u,
        &elim.p_v,
        &elim.q_v,
        &state.u,
        &state.u_prev,
        &state.v,
        &state.v_prev,
        &elim.force_star_u,
        &elim.force_star_v,
    );
    let sol = solve_eta(&eq, eta_opts)?;

    let need_law = track_law && forcing.is_none();
    let law_prep = need_law.then(|| {
        (
            state.u_prev.clone(),
            state.v_prev.clone(),
            coupled_modified_energy_bdf2(model, &state.u, &state.v, &state.u_prev, &state.v_prev),
        )
    });
    finish_step(state, &elim, &sol, dt);

    let law_residual = law_prep.map(|(u_om1, v_om1, e_old)| {
        let muu = mu_u(model, &state.u, sol.eta, &elim.force_star_u);
        let muv = mu_v(model, &state.v, sol.eta, &elim.force_star_v);
        let d2u = state
            .u
            .lin_comb(1.0, &state.u_prev, -2.0)
            .lin_comb(1.0, &u_om1, 1.0);
        let d2v = state
            .v
            .lin_comb(1.0, &state.v_prev, -2.0)
            .lin_comb(1.0, &v_om1, 1.0);
        let e_new =
            coupled_modified_energy_bdf2(model, &state.u, &state.v, &state.u_prev, &state.v_prev);
        let defect = e_new - e_old
            + dt * dissipation(model, &muu, &muv)
            + 0.25 * coupled_quadratic_form(model, &d2u, &d2v);
        defect.abs() / energy_scale(e_new, e_old)
    });

    Ok(StepReport {
        eta: sol.eta,
        newton_iters: sol.iterations,
        law_residual,
        near_root: sol.near_root,
    })
}

/// Variable-step half-step scheme. The explicit level is extrapolated with
/// `(1 + a/2, -a/2)` where `a = dt / dt_prev`; at constant step this is the
/// usual `(3/2, -1/2)` scheme, which is what the fixed-step runs use.
pub fn step_cn_coupled(
    state: &mut CoupledState,
    model: &CoupledModel,
    dt: f64,
    forcing: Option<&dyn CoupledForcing>,
    eta_opts: &EtaOptions,
    track_law: bool,
) -> Result<StepReport> {
    assert!(dt > 0.0);
    let grid = state.u.grid().clone();
    let a_ratio = if state.dt_prev > 0.0 { dt / state.dt_prev } else { 1.0 };

    let chi_u = chi_u(model, &grid, 1.0 / dt, 0.5)?;
    let chi_v = chi_v(model, &grid, 1.0 / dt, 0.5)?;

    // Apply the explicit half of the implicit operator to the current level:
    // rhs = phi/dt - 1/2 * (GL) phi + f(t + dt/2).
    let glu = Symbol::from_fn(
        &grid,
        |kx, ky| {
            let k2 = kx * kx + ky * ky;
            model.m_u * (model.s_u * k2 + model.eps_u * model.eps_u * k2 * k2)
        },
        0.0,
    );
    let glv = {
        let sigma = model.m_v * model.sigma;
        Symbol::from_fn(
            &grid,
            |kx, ky| {
                let k2 = kx * kx + ky * ky;
                model.m_v * (model.s_v * k2 + model.eps_v * model.eps_v * k2 * k2) + sigma
            },
            0.0,
        )
    };
    let mut rhs_u = state.u.scaled(1.0 / dt);
    rhs_u.add_scaled_assign(-0.5, &apply_symbol(&glu, &state.u));
    let mut rhs_v = state.v.scaled(1.0 / dt);
    rhs_v.add_scaled_assign(-0.5, &apply_symbol(&glv, &state.v));
    if let Some(f) = forcing {
        let (fu, fv) = f.eval(&grid, state.t + 0.5 * dt);
        rhs_u.add_assign(&fu);
        rhs_v.add_assign(&fv);
    }

    let u_star = state
        .u
        .lin_comb(1.0 + 0.5 * a_ratio, &state.u_prev, -0.5 * a_ratio);
    let v_star = state
        .v
        .lin_comb(1.0 + 0.5 * a_ratio, &state.v_prev, -0.5 * a_ratio);
    let elim = eliminate(model, &grid, &chi_u, &chi_v, &rhs_u, &rhs_v, &u_star, &v_star);

    let eq = build_coupled_eta_equation(
        model,
        SchemeWeights::TWO_LEVEL,
        &elim.p_u,
        &elim.q_u,
        &elim.p_v,
        &elim.q_v,
        &state.u,
        &state.u_prev,
        &state.v,
        &state.v_prev,
        &elim.force_star_u,
        &elim.force_star_v,
    );
    let sol = solve_eta(&eq, eta_opts)?;

    let need_law = track_law && forcing.is_none();
    let e_old = need_law.then(|| model.total_energy(&state.u, &state.v));
    finish_step(state, &elim, &sol, dt);

    let law_residual = e_old.map(|e_old| {
        // Original energy balance: E^{n+1} - E^n = -dt (M_u |grad mu_u|^2 +
        // M_v |grad mu_v|^2) with half-level potentials.
        let u_half = state.u.lin_comb(0.5, &state.u_prev, 0.5);
        let v_half = state.v.lin_comb(0.5, &state.v_prev, 0.5);
        let muu = mu_u(model, &u_half, sol.eta, &elim.force_star_u);
        let muv = mu_v(model, &v_half, sol.eta, &elim.force_star_v);
        let e_new = model.total_energy(&state.u, &state.v);
        let defect = e_new - e_old + dt * dissipation(model, &muu, &muv);
        defect.abs() / energy_scale(e_new, e_old)
    });

    Ok(StepReport {
        eta: sol.eta,
        newton_iters: sol.iterations,
        law_residual,
        near_root: sol.near_root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::prng::seeded_uniform_field;
    use crate::testing::{rel_linf, smooth_random_field};

    fn test_model() -> CoupledModel {
        CoupledModel::new(0.2, 0.15, 5.0, -0.1, 0.3, 0.0)
    }

    #[test]
    fn symmetric_setup_keeps_components_identical() {
        // sigma = 0, identical parameters and ICs: u and v must stay equal.
        let g = Grid::square(16).unwrap();
        let model = CoupledModel::new(0.2, 0.2, 0.0, 0.0, 0.0, 0.0).with_stabilization(0.5, 0.5);
        let ic = smooth_random_field(&g, 40, 0.4);
        let mut state = CoupledState::new(ic.clone(), ic);
        let dt = 1e-3;
        let opts = EtaOptions::default();
        step_be1_coupled(&mut state, &model, dt, None, &opts, false).unwrap();
        for _ in 0..10 {
            step_bdf2_coupled(&mut state, &model, dt, None, &opts, false).unwrap();
        }
        assert!(rel_linf(&state.v, &state.u) < 1e-12);
    }

    #[test]
    fn means_are_conserved_exactly() {
        let g = Grid::square(16).unwrap();
        let model = test_model().with_stabilization(1.0, 1.0);
        let u0 = seeded_uniform_field(&g, 7, -1.0, 1.0, false);
        let v0 = seeded_uniform_field(&g, 8, -1.0, 1.0, false);
        let (mu0, mv0) = (crate::spectral::mean(&u0), crate::spectral::mean(&v0));
        let mut state = CoupledState::new(u0, v0);
        let dt = 1e-4;
        let opts = EtaOptions::default();
        step_be1_coupled(&mut state, &model, dt, None, &opts, false).unwrap();
        for _ in 0..40 {
            step_bdf2_coupled(&mut state, &model, dt, None, &opts, false).unwrap();
        }
        assert!((crate::spectral::mean(&state.u) - mu0).abs() < 1e-13);
        assert!((crate::spectral::mean(&state.v) - mv0).abs() < 1e-13);
    }

    #[test]
    fn cn_extrapolation_weight_follows_the_step_ratio() {
        // Consistent history from one first-order step, then the same CN step
        // with a fudged previous-step size: the extrapolation ratio must
        // change the result, and the equal-step path must match an explicit
        // (3/2, -1/2) reconstruction of the explicit level.
        let g = Grid::square(16).unwrap();
        let model = test_model();
        let u0 = smooth_random_field(&g, 1, 0.3);
        let v0 = smooth_random_field(&g, 2, 0.3);
        let dt = 1e-3;
        let opts = EtaOptions::default();

        let mut base = CoupledState::new(u0, v0);
        step_be1_coupled(&mut base, &model, dt, None, &opts, false).unwrap();
        assert_eq!(base.dt_prev, dt);

        let mut a = base.clone();
        step_cn_coupled(&mut a, &model, dt, None, &opts, false).unwrap();

        let star = base.u.lin_comb(1.5, &base.u_prev, -0.5);
        let star_direct = base
            .u
            .lin_comb(1.0 + 0.5, &base.u_prev, -0.5);
        assert!(rel_linf(&star_direct, &star) < 1e-15);

        let mut b = base.clone();
        b.dt_prev = 2.0 * dt; // ratio a = 1/2 instead of 1
        step_cn_coupled(&mut b, &model, dt, None, &opts, false).unwrap();
        assert!(rel_linf(&b.u, &a.u) > 1e-12);
    }

    #[test]
    fn bdf2_modified_energy_monotone_on_random_run() {
        let g = Grid::square(32).unwrap();
        let model = test_model().with_stabilization(1.0, 1.0);
        let u0 = seeded_uniform_field(&g, 100, -1.0, 1.0, true);
        let v0 = seeded_uniform_field(&g, 101, -1.0, 1.0, true);
        let mut state = CoupledState::new(u0, v0);
        let dt = 2e-4;
        let opts = EtaOptions::default();
        step_be1_coupled(&mut state, &model, dt, None, &opts, false).unwrap();
        let mut prev = coupled_modified_energy_bdf2(&model, &state.u, &state.v, &state.u_prev, &state.v_prev);
        for _ in 0..30 {
            let rep = step_bdf2_coupled(&mut state, &model, dt, None, &opts, true).unwrap();
            assert!(rep.law_residual.unwrap() < 1e-8);
            let e = coupled_modified_energy_bdf2(&model, &state.u, &state.v, &state.u_prev, &state.v_prev);
            assert!(
                e <= prev + 1e-12 * prev.abs(),
                "modified energy rose: {prev} -> {e}"
            );
            prev = e;
        }
    }

    #[test]
    fn cn_energy_identity_on_random_run() {
        let g = Grid::square(32).unwrap();
        let model = test_model().with_stabilization(2.0, 2.0);
        let u0 = seeded_uniform_field(&g, 200, -1.0, 1.0, true);
        let v0 = seeded_uniform_field(&g, 201, -1.0, 1.0, true);
        let mut state = CoupledState::new(u0, v0);
        let dt = 1e-4;
        let opts = EtaOptions::default();
        step_be1_coupled(&mut state, &model, dt, None, &opts, false).unwrap();
        for _ in 0..30 {
            let rep = step_cn_coupled(&mut state, &model, dt, None, &opts, true).unwrap();
            assert!(rep.law_residual.unwrap() < 1e-8, "{:?}", rep.law_residual);
        }
    }

    #[test]
    fn cn_local_error_is_third_order() {
        // One step at dt vs two steps at dt/2: difference scales like dt^3.
        let g = Grid::square(32).unwrap();
        let model = test_model();
        let u0 = smooth_random_field(&g, 60, 0.3);
        let v0 = smooth_random_field(&g, 61, 0.3);
        let opts = EtaOptions::default();

        let probe = |dt: f64| {
            // Near-exact history at spacing dt from 64 micro steps, then
            // march the same interval with one step vs two half steps.
            let mut fine = CoupledState::new(u0.clone(), v0.clone());
            step_be1_coupled(&mut fine, &model, dt / 64.0, None, &opts, false).unwrap();
            for _ in 0..63 {
                step_cn_coupled(&mut fine, &model, dt / 64.0, None, &opts, false).unwrap();
            }
            let mut seed = CoupledState::new(u0.clone(), v0.clone());
            seed.u = fine.u.clone();
            seed.v = fine.v.clone();
            seed.t = fine.t;
            seed.dt_prev = dt;
            seed.step_index = 1;
            let mut one = seed.clone();
            step_cn_coupled(&mut one, &model, dt, None, &opts, false).unwrap();
            let mut two = seed;
            step_cn_coupled(&mut two, &model, 0.5 * dt, None, &opts, false).unwrap();
            step_cn_coupled(&mut two, &model, 0.5 * dt, None, &opts, false).unwrap();
            let du = one.u.lin_comb(1.0, &two.u, -1.0).linf();
            let dv = one.v.lin_comb(1.0, &two.v, -1.0).linf();
            du.max(dv)
        };

        // Probe in the regime where the nonlinear harmonics are no longer
        // stiff (dt * lambda_max < 1); above that the ratio lags below 8.
        let e1 = probe(1.25e-4);
        let e2 = probe(6.25e-5);
        let ratio = e1 / e2;
        assert!(
            (6.5..9.5).contains(&ratio),
            "local-error ratio {ratio} ({e1} / {e2})"
        );
    }
}

//! Energy bookkeeping, mass tracking, and the convergence-study harness.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::integrators::{
    run_fixed_coupled, run_fixed_scalar, CoupledScheme, CoupledState, RunOptions, ScalarScheme,
    ScalarState,
};
use crate::models::{
    CoupledModel, ExactSolution, ManufacturedCoupled, ManufacturedScalar, ScalarModel,
};
use crate::multiplier::EtaOptions;
use crate::spectral::{inner_product, integrate, quad_form, Symbol};

/// Energy snapshot for one recorded step.
#[derive(Clone, Copy, Debug)]
pub struct EnergyReport {
    pub original: f64,
    pub modified: f64,
    pub dissipation_residual: f64,
}

/// Mean value of a field (the conserved quantity of the conserving flows).
pub fn mass(f: &Field) -> f64 {
    crate::spectral::mean(f)
}

/// Max-norm difference on the collocation points.
pub fn linf_error(numerical: &Field, exact: &Field) -> f64 {
    crate::grid::check_same_grid(numerical.grid(), exact.grid());
    numerical
        .values()
        .iter()
        .zip(exact.values())
        .fold(0.0_f64, |m, (&a, &b)| m.max((a - b).abs()))
}

/// Telescoping energy of the scalar three-level scheme over the pair
/// `(phi^n, phi^{n-1})`:
/// `1/4 (L phi, phi) + 1/4 (L (2phi - prev), 2phi - prev) + 1/2 int (3F(phi) - F(prev))`.
///
/// At equal levels this collapses to the original energy, consistent with it
/// being a second-order approximation of it.
pub fn scalar_modified_energy_bdf2(model: &ScalarModel, phi: &Field, phi_prev: &Field) -> f64 {
    let lsym = model.linear_symbol(phi.grid());
    let extrap = phi.lin_comb(2.0, phi_prev, -1.0);
    0.25 * quad_form(&lsym, phi)
        + 0.25 * quad_form(&lsym, &extrap)
        + 0.5
            * (3.0 * integrate(&model.nonlinear_density(phi))
                - integrate(&model.nonlinear_density(phi_prev)))
}

/// Scheme-selected modified energy for scalar runs; the half-step and
/// first-order schemes dissipate the original energy, so that is what gets
/// reported for them.
pub fn scalar_modified_energy(
    scheme: ScalarScheme,
    model: &ScalarModel,
    phi: &Field,
    phi_prev: &Field,
) -> f64 {
    match scheme {
        ScalarScheme::Bdf2 => scalar_modified_energy_bdf2(model, phi, phi_prev),
        ScalarScheme::Be1 | ScalarScheme::Cn => model.total_energy(phi),
    }
}

/// Quadratic form of the coupled system's implicit part on a pair of
/// increments: `eps_u^2 |grad du|^2 + S_u |du|^2 + (v-part) + sigma`-term.
pub(crate) fn coupled_quadratic_form(model: &CoupledModel, du: &Field, dv: &Field) -> f64 {
    let neg_lap = Symbol::neg_laplacian(du.grid());
    model.eps_u * model.eps_u * quad_form(&neg_lap, du)
        + model.s_u * inner_product(du, du)
        + model.eps_v * model.eps_v * quad_form(&neg_lap, dv)
        + model.s_v * inner_product(dv, dv)
        + model.sigma * model.long_range_form(dv)
}

/// Telescoping energy of the coupled three-level scheme.
pub fn coupled_modified_energy_bdf2(
    model: &CoupledModel,
    u: &Field,
    v: &Field,
    u_prev: &Field,
    v_prev: &Field,
) -> f64 {
    let u_ex = u.lin_comb(2.0, u_prev, -1.0);
    let v_ex = v.lin_comb(2.0, v_prev, -1.0);
    0.25 * coupled_quadratic_form(model, u, v)
        + 0.25 * coupled_quadratic_form(model, &u_ex, &v_ex)
        + 0.5
            * (3.0 * integrate(&model.coupling_density_tilde(u, v))
                - integrate(&model.coupling_density_tilde(u_prev, v_prev)))
}

pub fn coupled_modified_energy(
    scheme: CoupledScheme,
    model: &CoupledModel,
    u: &Field,
    v: &Field,
    u_prev: &Field,
    v_prev: &Field,
) -> f64 {
    match scheme {
        CoupledScheme::Bdf2 => coupled_modified_energy_bdf2(model, u, v, u_prev, v_prev),
        CoupledScheme::Be1 | CoupledScheme::Cn => model.total_energy(u, v),
    }
}

/// One row of an accuracy table.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub dt: f64,
    /// Max-norm error per variable at the final time.
    pub errors: Vec<f64>,
    /// Observed order against the previous (coarser) row, per variable.
    pub orders: Vec<Option<f64>>,
}

/// Accuracy-table results for one model/scheme pair.
#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub model: String,
    pub scheme: String,
    pub t_end: f64,
    pub variables: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    fn push(&mut self, dt: f64, errors: Vec<f64>) {
        let orders = match self.rows.last() {
            None => vec![None; errors.len()],
            Some(prev) => prev
                .errors
                .iter()
                .zip(&errors)
                .map(|(&e0, &e1)| {
                    if e0 > 0.0 && e1 > 0.0 {
                        Some((e0 / e1).ln() / (prev.dt / dt).ln())
                    } else {
                        None
                    }
                })
                .collect(),
        };
        self.rows.push(ConvergenceRow { dt, errors, orders });
    }

    /// Orders observed over the finest `pairs` row pairs, per variable.
    pub fn tail_orders(&self, pairs: usize) -> Vec<f64> {
        let n = self.rows.len();
        let mut out = Vec::new();
        for row in self.rows.iter().skip(n.saturating_sub(pairs)) {
            for o in row.orders.iter().flatten() {
                out.push(*o);
            }
        }
        out
    }
}

/// Marches the forced scalar problem to `t_end` for each step size and
/// compares against the exact profile in the max norm. `dt_list` must be
/// sorted descending. Runs bootstrap with the semi-implicit first-order
/// step (multiplier pinned at 1); solving the multiplier equation on the
/// startup step leaves a seed that distorts the finest rows.
pub fn convergence_study_scalar(
    grid: &Arc<Grid>,
    model: &ScalarModel,
    exact: &ExactSolution,
    scheme: ScalarScheme,
    dt_list: &[f64],
    t_end: f64,
    eta_opts: &EtaOptions,
) -> Result<ConvergenceTable> {
    assert!(
        dt_list.windows(2).all(|w| w[0] > w[1]),
        "dt_list must be strictly decreasing"
    );
    let forcing = ManufacturedScalar {
        model: *model,
        exact: *exact,
    };
    let mut table = ConvergenceTable {
        model: model.kind.name().to_string(),
        scheme: scheme.name().to_string(),
        t_end,
        variables: vec!["phi".to_string()],
        rows: Vec::new(),
    };
    let opts = RunOptions {
        record_every: u64::MAX,
        semi_implicit_startup: true,
        ..RunOptions::default()
    };
    // Rows are independent runs; march them in parallel.
    let results: Vec<Result<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = dt_list
            .iter()
            .map(|&dt| {
                let opts = &opts;
                let forcing = &forcing;
                scope.spawn(move || {
                    let mut state = ScalarState::new(exact.field(grid, 0.0));
                    run_fixed_scalar(
                        &mut state,
                        model,
                        scheme,
                        dt,
                        t_end,
                        Some(forcing),
                        opts,
                        eta_opts,
                        None,
                    )
                    .map_err(|e| Error::RunFailed {
                        dt,
                        source: Box::new(e),
                    })?;
                    Ok(linf_error(&state.phi, &exact.field(grid, state.t)))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("row thread")).collect()
    });
    for (&dt, result) in dt_list.iter().zip(results) {
        table.push(dt, vec![result?]);
    }
    Ok(table)
}

/// Coupled-system analogue; reports errors for both components.
pub fn convergence_study_coupled(
    grid: &Arc<Grid>,
    model: &CoupledModel,
    exact: &ExactSolution,
    scheme: CoupledScheme,
    dt_list: &[f64],
    t_end: f64,
    eta_opts: &EtaOptions,
) -> Result<ConvergenceTable> {
    assert!(
        dt_list.windows(2).all(|w| w[0] > w[1]),
        "dt_list must be strictly decreasing"
    );
    let forcing = ManufacturedCoupled {
        model: *model,
        exact: *exact,
    };
    let mut table = ConvergenceTable {
        model: "coupled".to_string(),
        scheme: scheme.name().to_string(),
        t_end,
        variables: vec!["u".to_string(), "v".to_string()],
        rows: Vec::new(),
    };
    let opts = RunOptions {
        record_every: u64::MAX,
        semi_implicit_startup: true,
        ..RunOptions::default()
    };
    let results: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = dt_list
            .iter()
            .map(|&dt| {
                let opts = &opts;
                let forcing = &forcing;
                scope.spawn(move || {
                    let ic = exact.field(grid, 0.0);
                    let mut state = CoupledState::new(ic.clone(), ic);
                    run_fixed_coupled(
                        &mut state,
                        model,
                        scheme,
                        dt,
                        t_end,
                        Some(forcing),
                        opts,
                        eta_opts,
                        None,
                    )
                    .map_err(|e| Error::RunFailed {
                        dt,
                        source: Box::new(e),
                    })?;
                    let reference = exact.field(grid, state.t);
                    Ok(vec![
                        linf_error(&state.u, &reference),
                        linf_error(&state.v, &reference),
                    ])
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("row thread")).collect()
    });
    for (&dt, result) in dt_list.iter().zip(results) {
        table.push(dt, result?);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_examples() {
        let g = Grid::square(32).unwrap();
        assert!((mass(&Field::constant(&g, 2.5)) - 2.5).abs() < 1e-14);
        assert!(mass(&Field::from_fn(&g, |x, _| x.sin())).abs() < 1e-13);
    }

    #[test]
    fn modified_energy_at_equal_levels_is_original() {
        let g = Grid::square(16).unwrap();
        let model = ScalarModel::allen_cahn(0.4);
        let phi = crate::testing::smooth_random_field(&g, 8, 0.5);
        let e_tilde = scalar_modified_energy_bdf2(&model, &phi, &phi);
        let e = model.total_energy(&phi);
        assert!((e_tilde - e).abs() < 1e-10 * e.abs().max(1.0));
    }

    #[test]
    fn modified_energy_with_zero_density_is_pure_quadratic() {
        // eps so large the well contribution is negligible.
        let g = Grid::square(16).unwrap();
        let model = ScalarModel::allen_cahn(1e8);
        let phi = crate::testing::smooth_random_field(&g, 8, 0.5);
        let prev = crate::testing::smooth_random_field(&g, 9, 0.5);
        let lsym = model.linear_symbol(&g);
        let extrap = phi.lin_comb(2.0, &prev, -1.0);
        let quad = 0.25 * quad_form(&lsym, &phi) + 0.25 * quad_form(&lsym, &extrap);
        let got = scalar_modified_energy_bdf2(&model, &phi, &prev);
        assert!((got - quad).abs() < 1e-12 * quad.abs().max(1.0));
    }

    #[test]
    fn zero_steps_zero_error() {
        let g = Grid::square(16).unwrap();
        let exact = ExactSolution::scalar_default();
        let f = exact.field(&g, 0.3);
        assert_eq!(linf_error(&f, &f), 0.0);
    }

    #[test]
    fn modified_energy_tracks_original_at_second_order() {
        // Etilde^n sits a half step ahead of E^n along a moving trajectory,
        // so the second-order agreement shows against the midpoint energy
        // (E^n + E^{n+1})/2; that gap shrinks ~4x when dt halves.
        let g = Grid::square(32).unwrap();
        let model = ScalarModel::allen_cahn(0.3);
        let exact = ExactSolution::scalar_default();
        let forcing = ManufacturedScalar { model, exact };
        let eta_opts = EtaOptions::default();
        let gap = |dt: f64| {
            let mut state = ScalarState::new(exact.field(&g, 0.0));
            let opts = RunOptions {
                record_every: u64::MAX,
                ..RunOptions::default()
            };
            run_fixed_scalar(
                &mut state,
                &model,
                ScalarScheme::Bdf2,
                dt,
                0.02,
                Some(&forcing),
                &opts,
                &eta_opts,
                None,
            )
            .unwrap();
            let e_tilde = scalar_modified_energy_bdf2(&model, &state.phi, &state.phi_prev);
            let e_here = model.total_energy(&state.phi);
            let mut ahead = state.clone();
            crate::integrators::step_bdf2(&mut ahead, &model, dt, Some(&forcing), &eta_opts, false)
                .unwrap();
            let e_next = model.total_energy(&ahead.phi);
            (e_tilde - 0.5 * (e_here + e_next)).abs()
        };
        let g1 = gap(2e-3);
        let g2 = gap(1e-3);
        let ratio = g1 / g2;
        assert!((3.0..5.5).contains(&ratio), "ratio {ratio} ({g1} / {g2})");
    }
}

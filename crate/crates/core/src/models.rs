//! The four gradient-flow problems: energies, nonlinear densities and
//! forces, mobility operators, and the manufactured solutions with their
//! forcing terms.
//!
//! Conventions: the scalar free energy is `E = 1/2 (L phi, phi) + int F`,
//! the flow is `phi_t = -G (L phi + F'(phi))`. The single-well models carry
//! `1/eps^2` inside the double well, `F = (phi^2-1)^2 / (4 eps^2)`, so the
//! chemical potential reads `-Delta phi + phi(phi^2-1)/eps^2`. The thin-film
//! model uses `L = eps^2 Delta^2`, `G = M I`, and the gradient-dependent
//! density `F = -1/2 ln(1 + |grad phi|^2)`.

use std::sync::Arc;

use crate::field::Field;
use crate::grid::{check_same_grid, Grid};
use crate::spectral::{
    self, apply_symbol, divergence, gradient, inner_product, integrate, quad_form, Symbol,
};

/// Which scalar flow is being solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    AllenCahn,
    CahnHilliard,
    /// Thin-film height equation without slope selection.
    Mbe,
}

impl ScalarKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScalarKind::AllenCahn => "allen-cahn",
            ScalarKind::CahnHilliard => "cahn-hilliard",
            ScalarKind::Mbe => "mbe",
        }
    }
}

/// A single-field gradient flow.
#[derive(Clone, Copy, Debug)]
pub struct ScalarModel {
    pub kind: ScalarKind,
    /// Interface parameter. For Allen-Cahn/Cahn-Hilliard the potential
    /// carries `1/eps^2`; for the thin-film model `eps^2` multiplies the
    /// curvature energy.
    pub eps: f64,
    /// Mobility `M`; only the thin-film model uses it.
    pub mobility: f64,
    /// Optional 2/3-rule truncation of the nonlinear force. Off by default:
    /// the collocation results match plain pointwise evaluation.
    pub dealias: bool,
}

impl ScalarModel {
    pub fn allen_cahn(eps: f64) -> ScalarModel {
        assert!(eps > 0.0, "eps must be positive");
        ScalarModel {
            kind: ScalarKind::AllenCahn,
            eps,
            mobility: 1.0,
            dealias: false,
        }
    }

    pub fn cahn_hilliard(eps: f64) -> ScalarModel {
        assert!(eps > 0.0, "eps must be positive");
        ScalarModel {
            kind: ScalarKind::CahnHilliard,
            eps,
            mobility: 1.0,
            dealias: false,
        }
    }

    pub fn mbe(eps: f64, mobility: f64) -> ScalarModel {
        assert!(eps > 0.0 && mobility > 0.0, "eps and mobility must be positive");
        ScalarModel {
            kind: ScalarKind::Mbe,
            eps,
            mobility,
            dealias: false,
        }
    }

    /// Coefficients `(b, c)` of the composed operator `G L` as the symbol
    /// `b |k|^2 + c |k|^4`.
    pub(crate) fn gl_coeffs(&self) -> (f64, f64) {
        match self.kind {
            ScalarKind::AllenCahn => (1.0, 0.0),
            ScalarKind::CahnHilliard => (0.0, 1.0),
            ScalarKind::Mbe => (0.0, self.mobility * self.eps * self.eps),
        }
    }

    /// The quadratic operator `L` of the energy.
    pub fn linear_symbol(&self, grid: &Arc<Grid>) -> Symbol {
        match self.kind {
            ScalarKind::AllenCahn | ScalarKind::CahnHilliard => Symbol::neg_laplacian(grid),
            ScalarKind::Mbe => Symbol::bilaplacian(grid).scaled(self.eps * self.eps),
        }
    }

    /// Applies the mobility operator `G`.
    pub fn apply_g(&self, f: &Field) -> Field {
        match self.kind {
            ScalarKind::AllenCahn => f.clone(),
            ScalarKind::CahnHilliard => apply_symbol(&Symbol::neg_laplacian(f.grid()), f),
            ScalarKind::Mbe => f.scaled(self.mobility),
        }
    }

    /// `(G f, f)`, the dissipation rate quadratic form.
    pub fn g_form(&self, f: &Field) -> f64 {
        match self.kind {
            ScalarKind::AllenCahn => inner_product(f, f),
            ScalarKind::CahnHilliard => quad_form(&Symbol::neg_laplacian(f.grid()), f),
            ScalarKind::Mbe => self.mobility * inner_product(f, f),
        }
    }

    /// Pointwise nonlinear density `F`. For the thin-film model this depends
    /// on the spectral gradient of `phi`, and is nonpositive everywhere since
    /// the log argument is at least 1.
    pub fn nonlinear_density(&self, phi: &Field) -> Field {
        match self.kind {
            ScalarKind::AllenCahn | ScalarKind::CahnHilliard => {
                let c = 1.0 / (4.0 * self.eps * self.eps);
                phi.map(|p| {
                    let w = p * p - 1.0;
                    c * w * w
                })
            }
            ScalarKind::Mbe => {
                let (gx, gy) = gradient(phi);
                let mut out = gx;
                for (g1, &g2) in out.values_mut().iter_mut().zip(gy.values()) {
                    *g1 = -0.5 * (1.0 + *g1 * *g1 + g2 * g2).ln();
                }
                out
            }
        }
    }

    /// Variational derivative of the nonlinear energy part.
    pub fn nonlinear_force(&self, phi: &Field) -> Field {
        let force = match self.kind {
            ScalarKind::AllenCahn | ScalarKind::CahnHilliard => {
                let c = 1.0 / (self.eps * self.eps);
                phi.map(|p| c * p * (p * p - 1.0))
            }
            ScalarKind::Mbe => {
                let (gx, gy) = gradient(phi);
                let mut fx = gx;
                let mut fy = gy;
                for (a, b) in fx.values_mut().iter_mut().zip(fy.values_mut()) {
                    let w = 1.0 + *a * *a + *b * *b;
                    *a /= w;
                    *b /= w;
                }
                divergence(&fx, &fy)
            }
        };
        if self.dealias {
            apply_symbol(&dealias_mask(force.grid()), &force)
        } else {
            force
        }
    }

    /// Total free energy `1/2 (L phi, phi) + int F`.
    pub fn total_energy(&self, phi: &Field) -> f64 {
        0.5 * quad_form(&self.linear_symbol(phi.grid()), phi) + integrate(&self.nonlinear_density(phi))
    }
}

/// The coupled pair of conserved equations with a long-range term on `v`.
#[derive(Clone, Copy, Debug)]
pub struct CoupledModel {
    pub eps_u: f64,
    pub eps_v: f64,
    /// Long-range interaction strength acting on `v - mean(v)`.
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub m_u: f64,
    pub m_v: f64,
    /// Stabilization shifts moved from the explicit coupling energy into the
    /// implicit quadratic part; zero recovers the plain splitting.
    pub s_u: f64,
    pub s_v: f64,
    pub dealias: bool,
}

impl CoupledModel {
    pub fn new(eps_u: f64, eps_v: f64, sigma: f64, alpha: f64, beta: f64, gamma: f64) -> CoupledModel {
        assert!(eps_u > 0.0 && eps_v > 0.0, "interfacial widths must be positive");
        assert!(sigma >= 0.0, "sigma must be nonnegative");
        CoupledModel {
            eps_u,
            eps_v,
            sigma,
            alpha,
            beta,
            gamma,
            m_u: 1.0,
            m_v: 1.0,
            s_u: 0.0,
            s_v: 0.0,
            dealias: false,
        }
    }

    pub fn with_stabilization(mut self, s_u: f64, s_v: f64) -> CoupledModel {
        assert!(s_u >= 0.0 && s_v >= 0.0, "stabilization must be nonnegative");
        self.s_u = s_u;
        self.s_v = s_v;
        self
    }

    pub fn with_mobilities(mut self, m_u: f64, m_v: f64) -> CoupledModel {
        assert!(m_u > 0.0 && m_v > 0.0, "mobilities must be positive");
        self.m_u = m_u;
        self.m_v = m_v;
        self
    }

    /// Coupling energy density `W(u, v)`.
    pub fn w_point(&self, u: f64, v: f64) -> f64 {
        let du = u * u - 1.0;
        let dv = v * v - 1.0;
        0.25 * du * du + 0.25 * dv * dv
            + self.alpha * u * v
            + self.beta * u * v * v
            + self.gamma * u * u * v
    }

    /// Stabilized-split density `W~ = W - S_u u^2 / 2 - S_v v^2 / 2`.
    pub fn w_tilde_point(&self, u: f64, v: f64) -> f64 {
        self.w_point(u, v) - 0.5 * self.s_u * u * u - 0.5 * self.s_v * v * v
    }

    /// `dW~/du`, the explicit force on `u` under the selected splitting.
    pub fn force_u_point(&self, u: f64, v: f64) -> f64 {
        (u * u - 1.0) * u + self.alpha * v + self.beta * v * v + 2.0 * self.gamma * u * v
            - self.s_u * u
    }

    /// `dW~/dv`.
    pub fn force_v_point(&self, u: f64, v: f64) -> f64 {
        (v * v - 1.0) * v + self.alpha * u + 2.0 * self.beta * u * v + self.gamma * u * u
            - self.s_v * v
    }

    pub fn coupling_density(&self, u: &Field, v: &Field) -> Field {
        check_same_grid(u.grid(), v.grid());
        zip_fields(u, v, |a, b| self.w_point(a, b))
    }

    pub fn coupling_density_tilde(&self, u: &Field, v: &Field) -> Field {
        check_same_grid(u.grid(), v.grid());
        zip_fields(u, v, |a, b| self.w_tilde_point(a, b))
    }

    /// Explicit forces `(dW~/du, dW~/dv)` evaluated pointwise.
    pub fn nonlinear_force(&self, u: &Field, v: &Field) -> (Field, Field) {
        check_same_grid(u.grid(), v.grid());
        let fu = zip_fields(u, v, |a, b| self.force_u_point(a, b));
        let fv = zip_fields(u, v, |a, b| self.force_v_point(a, b));
        if self.dealias {
            let mask = dealias_mask(u.grid());
            (apply_symbol(&mask, &fu), apply_symbol(&mask, &fv))
        } else {
            (fu, fv)
        }
    }

    /// Total free energy including the long-range term, evaluated with the
    /// original density `W` regardless of stabilization.
    pub fn total_energy(&self, u: &Field, v: &Field) -> f64 {
        let grid = u.grid();
        let neg_lap = Symbol::neg_laplacian(grid);
        let quad = 0.5 * self.eps_u * self.eps_u * quad_form(&neg_lap, u)
            + 0.5 * self.eps_v * self.eps_v * quad_form(&neg_lap, v);
        quad + integrate(&self.coupling_density(u, v)) + 0.5 * self.sigma * self.long_range_form(v)
    }

    /// `|(-Delta)^{-1/2}(v - mean v)|^2 = (v - mean v, (-Delta)^{-1}(v - mean v))`.
    pub fn long_range_form(&self, v: &Field) -> f64 {
        let w = spectral::inverse_laplacian_zero_mean(v);
        // (-Delta)^{-1} = -(mean-free inverse Laplacian)
        -inner_product(v, &w)
    }
}

fn zip_fields(a: &Field, b: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Field::from_values(a.grid(), values)
}

/// 2/3-rule truncation mask.
pub fn dealias_mask(grid: &Arc<Grid>) -> Symbol {
    let (nx, ny) = (grid.nx() as f64, grid.ny() as f64);
    let kx_cut = 2.0 * std::f64::consts::PI / grid.lx() * (nx / 3.0);
    let ky_cut = 2.0 * std::f64::consts::PI / grid.ly() * (ny / 3.0);
    Symbol::from_fn(
        grid,
        |kx, ky| {
            if kx.abs() <= kx_cut && ky.abs() <= ky_cut {
                1.0
            } else {
                0.0
            }
        },
        1.0,
    )
}

/// Closed-form space-time profiles used by the accuracy tests:
/// `(amplitude * trig(freq x) * trig(freq y) + offset) * (1 - sin^2(t)/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactSolution {
    pub profile: SpatialProfile,
    pub amplitude: f64,
    pub offset: f64,
    pub freq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpatialProfile {
    /// `sin(freq x) cos(freq y)`
    SinCos,
    /// `sin(freq x) sin(freq y)`
    SinSin,
}

impl ExactSolution {
    /// Profile of the single-field accuracy tests.
    pub fn scalar_default() -> ExactSolution {
        ExactSolution {
            profile: SpatialProfile::SinCos,
            amplitude: 0.25,
            offset: 0.48,
            freq: 2.0,
        }
    }

    /// Profile of the coupled accuracy tests (used for both components).
    pub fn coupled_default() -> ExactSolution {
        ExactSolution {
            profile: SpatialProfile::SinSin,
            amplitude: 0.25,
            offset: 0.48,
            freq: 2.0,
        }
    }

    fn spatial(&self, x: f64, y: f64) -> f64 {
        let s = match self.profile {
            SpatialProfile::SinCos => (self.freq * x).sin() * (self.freq * y).cos(),
            SpatialProfile::SinSin => (self.freq * x).sin() * (self.freq * y).sin(),
        };
        self.amplitude * s + self.offset
    }

    fn time_factor(t: f64) -> f64 {
        1.0 - 0.5 * t.sin() * t.sin()
    }

    fn time_factor_dot(t: f64) -> f64 {
        -0.5 * (2.0 * t).sin()
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.spatial(x, y) * Self::time_factor(t)
    }

    /// The exact profile sampled on the grid at time `t`.
    pub fn field(&self, grid: &Arc<Grid>, t: f64) -> Field {
        Field::from_fn(grid, |x, y| self.value(x, y, t))
    }

    /// Time derivative of the profile at time `t`.
    pub fn dt_field(&self, grid: &Arc<Grid>, t: f64) -> Field {
        let rate = Self::time_factor_dot(t);
        Field::from_fn(grid, |x, y| self.spatial(x, y) * rate)
    }
}

/// Forcing evaluated at a requested time, fed to the steppers.
pub trait ScalarForcing {
    fn eval(&self, grid: &Arc<Grid>, t: f64) -> Field;
}

pub trait CoupledForcing {
    fn eval(&self, grid: &Arc<Grid>, t: f64) -> (Field, Field);
}

/// Forcing that makes `exact` solve the scalar flow identically:
/// `f = d(phi)/dt + G(L phi + F'(phi))` with all operators spectral.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedScalar {
    pub model: ScalarModel,
    pub exact: ExactSolution,
}

impl ScalarForcing for ManufacturedScalar {
    fn eval(&self, grid: &Arc<Grid>, t: f64) -> Field {
        let phi = self.exact.field(grid, t);
        let mut mu = apply_symbol(&self.model.linear_symbol(grid), &phi);
        mu.add_assign(&self.model.nonlinear_force(&phi));
        let mut f = self.exact.dt_field(grid, t);
        f.add_assign(&self.model.apply_g(&mu));
        f
    }
}

/// Forcing pair for the coupled system; both components follow `exact`.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedCoupled {
    pub model: CoupledModel,
    pub exact: ExactSolution,
}

impl CoupledForcing for ManufacturedCoupled {
    fn eval(&self, grid: &Arc<Grid>, t: f64) -> (Field, Field) {
        let m = &self.model;
        let u = self.exact.field(grid, t);
        let v = u.clone();
        let neg_lap = Symbol::neg_laplacian(grid);

        // mu_u = -eps_u^2 Delta u + dW/du (the splitting shift cancels at the
        // continuous level, so use the unstabilized derivative).
        let (fu, fv) = m.nonlinear_force(&u, &v);
        let mut mu_u = apply_symbol(&neg_lap, &u).scaled(m.eps_u * m.eps_u);
        mu_u.add_assign(&fu);
        mu_u.add_scaled_assign(m.s_u, &u);
        let mut mu_v = apply_symbol(&neg_lap, &v).scaled(m.eps_v * m.eps_v);
        mu_v.add_assign(&fv);
        mu_v.add_scaled_assign(m.s_v, &v);
        mu_v.add_scaled_assign(-m.sigma, &spectral::inverse_laplacian_zero_mean(&v));

        // f = d/dt - M Delta mu
        let dudt = self.exact.dt_field(grid, t);
        let mut f_u = apply_symbol(&neg_lap, &mu_u).scaled(m.m_u);
        f_u.add_assign(&dudt);
        let mut f_v = apply_symbol(&neg_lap, &mu_v).scaled(m.m_v);
        f_v.add_assign(&dudt);
        (f_u, f_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{rel_linf, smooth_random_field};

    #[test]
    fn double_well_minimum_is_zero() {
        let g = Grid::square(8).unwrap();
        let m = ScalarModel::allen_cahn(0.5);
        let d = m.nonlinear_density(&Field::constant(&g, 1.0));
        assert!(d.linf() < 1e-15);
        assert!(m.total_energy(&Field::constant(&g, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn mbe_density_of_constant_vanishes_and_is_nonpositive() {
        let g = Grid::square(16).unwrap();
        let m = ScalarModel::mbe(0.1, 1.0);
        assert!(m.nonlinear_density(&Field::constant(&g, 0.7)).linf() < 1e-14);
        let f = smooth_random_field(&g, 3, 5.0);
        let d = m.nonlinear_density(&f);
        assert!(d.max() <= 1e-14, "log density must be nonpositive, max {}", d.max());
        assert!(d.is_finite());
    }

    #[test]
    fn allen_cahn_force_is_odd() {
        let g = Grid::square(8).unwrap();
        let m = ScalarModel::allen_cahn(0.3);
        assert!(m.nonlinear_force(&Field::zeros(&g)).linf() < 1e-15);
        let f = smooth_random_field(&g, 1, 0.8);
        let a = m.nonlinear_force(&f);
        let b = m.nonlinear_force(&f.scaled(-1.0));
        assert!(rel_linf(&b, &a.scaled(-1.0)) < 1e-14);
    }

    #[test]
    fn coupled_constant_cases() {
        let g = Grid::square(8).unwrap();
        let m = CoupledModel::new(0.1, 0.1, 0.0, 0.0, 0.0, 0.0);
        let zero = Field::zeros(&g);
        let d = m.coupling_density(&zero, &zero);
        assert!((d.values()[0] - 0.5).abs() < 1e-15);
        assert!((m.total_energy(&zero, &zero) - 0.5 * g.area()).abs() < 1e-10);

        let m2 = CoupledModel::new(0.1, 0.1, 0.0, 0.7, 0.3, 0.0);
        let one = Field::constant(&g, 1.0);
        let (fu, fv) = m2.nonlinear_force(&one, &zero);
        assert!(fu.linf() < 1e-15);
        assert!((fv.values()[0] - m2.alpha).abs() < 1e-15);
    }

    #[test]
    fn coupled_energy_decouples_without_interaction() {
        let g = Grid::square(16).unwrap();
        let m = CoupledModel::new(0.2, 0.3, 0.0, 0.0, 0.0, 0.0);
        let u = smooth_random_field(&g, 4, 0.5);
        let v = smooth_random_field(&g, 5, 0.5);
        let eu = ScalarModel::allen_cahn(1.0); // same double well, unit eps
        // Single-well energies with matching quadratic weights.
        let single = |f: &Field, eps: f64| {
            0.5 * eps * eps * quad_form(&Symbol::neg_laplacian(&g), f)
                + integrate(&eu.nonlinear_density(f))
        };
        let total = m.total_energy(&u, &v);
        let parts = single(&u, m.eps_u) + single(&v, m.eps_v);
        assert!((total - parts).abs() < 1e-10 * total.abs().max(1.0));
    }

    /// Centered difference of the integrated density against the force inner
    /// product; the defect must shrink at second order in the probe step.
    fn variational_consistency_scalar(model: &ScalarModel) {
        let g = Grid::square(16).unwrap();
        let phi = smooth_random_field(&g, 10, 0.6);
        let h = smooth_random_field(&g, 11, 0.6);
        let expected = inner_product(&model.nonlinear_force(&phi), &h);
        let probe = |e: f64| {
            let plus = integrate(&model.nonlinear_density(&phi.lin_comb(1.0, &h, e)));
            let minus = integrate(&model.nonlinear_density(&phi.lin_comb(1.0, &h, -e)));
            (plus - minus) / (2.0 * e)
        };
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&e| (probe(e) - expected).abs())
            .collect();
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!(
            (3.0..5.0).contains(&r1) && (3.0..5.0).contains(&r2),
            "{:?}: ratios {r1:.2} {r2:.2}, errs {errs:?}",
            model.kind
        );
    }

    #[test]
    fn force_is_variational_derivative_allen_cahn() {
        variational_consistency_scalar(&ScalarModel::allen_cahn(0.4));
    }

    #[test]
    fn force_is_variational_derivative_cahn_hilliard() {
        variational_consistency_scalar(&ScalarModel::cahn_hilliard(0.4));
    }

    #[test]
    fn force_is_variational_derivative_mbe() {
        variational_consistency_scalar(&ScalarModel::mbe(0.2, 1.0));
    }

    #[test]
    fn force_is_variational_derivative_coupled() {
        let g = Grid::square(16).unwrap();
        let m = CoupledModel::new(0.2, 0.15, 3.0, -0.1, 0.75, 0.2).with_stabilization(1.0, 0.5);
        let u = smooth_random_field(&g, 20, 0.5);
        let v = smooth_random_field(&g, 21, 0.5);
        let hu = smooth_random_field(&g, 22, 0.5);
        let hv = smooth_random_field(&g, 23, 0.5);
        let (fu, fv) = m.nonlinear_force(&u, &v);
        let expected = inner_product(&fu, &hu) + inner_product(&fv, &hv);
        let probe = |e: f64| {
            let p = integrate(
                &m.coupling_density_tilde(&u.lin_comb(1.0, &hu, e), &v.lin_comb(1.0, &hv, e)),
            );
            let q = integrate(
                &m.coupling_density_tilde(&u.lin_comb(1.0, &hu, -e), &v.lin_comb(1.0, &hv, -e)),
            );
            (p - q) / (2.0 * e)
        };
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&e| (probe(e) - expected).abs())
            .collect();
        let r1 = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&r1), "ratio {r1}, errs {errs:?}");
    }

    #[test]
    fn scalar_energy_matches_finite_difference_quadrature() {
        // Independent route: FD gradient + plain quadrature, refined once.
        let profile = |x: f64, y: f64| 0.3 * (x.sin() * y.cos()) + 0.1 * (2.0 * x).cos();
        let m = ScalarModel::allen_cahn(0.5);
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let g = Grid::square(n).unwrap();
            let f = Field::from_fn(&g, profile);
            let (gx, gy) = crate::testing::fd_gradient(&f);
            let fd_energy: f64 = g.cell_area()
                * f.values()
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let w = p * p - 1.0;
                        0.5 * (gx.values()[i].powi(2) + gy.values()[i].powi(2))
                            + w * w / (4.0 * m.eps * m.eps)
                    })
                    .sum::<f64>();
            errs.push((fd_energy - m.total_energy(&f)).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((1.8..2.3).contains(&order), "order {order}, errs {errs:?}");
    }

    #[test]
    fn exact_profile_values() {
        let s = ExactSolution::scalar_default();
        assert!((s.value(0.0, 0.0, 0.0) - 0.48).abs() < 1e-15);
        let c = ExactSolution::coupled_default();
        let q = std::f64::consts::FRAC_PI_4;
        assert!((c.value(q, q, 0.0) - 0.73).abs() < 1e-15);
        // At t = pi/2 the time factor is exactly 1/2.
        let half = std::f64::consts::FRAC_PI_2;
        assert!((s.value(q, 0.0, half) - 0.5 * (s.amplitude * (2.0 * q).sin() + s.offset)).abs() < 1e-15);
    }

    #[test]
    fn manufactured_forcing_closes_the_residual() {
        let g = Grid::square(64).unwrap();
        for model in [
            ScalarModel::allen_cahn(0.2),
            ScalarModel::cahn_hilliard(0.3),
        ] {
            let exact = ExactSolution::scalar_default();
            let forcing = ManufacturedScalar { model, exact };
            let t = 0.37;
            // residual = phi_t + G(L phi + F') - f, evaluated spectrally
            let phi = exact.field(&g, t);
            let mut mu = apply_symbol(&model.linear_symbol(&g), &phi);
            mu.add_assign(&model.nonlinear_force(&phi));
            let mut resid = exact.dt_field(&g, t);
            resid.add_assign(&model.apply_g(&mu));
            resid.add_scaled_assign(-1.0, &forcing.eval(&g, t));
            assert!(resid.linf() < 1e-10, "{:?}: {}", model.kind, resid.linf());
        }
    }

    #[test]
    fn forcing_at_time_zero_has_no_transient_term() {
        // d/dt factor is -sin(t)cos(t), zero at t = 0, so f(0) = G mu(phi(0)).
        let g = Grid::square(32).unwrap();
        let model = ScalarModel::allen_cahn(0.2);
        let exact = ExactSolution::scalar_default();
        let f0 = ManufacturedScalar { model, exact }.eval(&g, 0.0);
        let phi = exact.field(&g, 0.0);
        let mut mu = apply_symbol(&model.linear_symbol(&g), &phi);
        mu.add_assign(&model.nonlinear_force(&phi));
        let gmu = model.apply_g(&mu);
        assert!(rel_linf(&f0, &gmu) < 1e-13);
    }

    #[test]
    fn dealias_mask_is_idempotent_projection() {
        let g = Grid::square(16).unwrap();
        let f = crate::io::prng::seeded_uniform_field(&g, 5, -1.0, 1.0, false);
        let mask = dealias_mask(&g);
        let once = apply_symbol(&mask, &f);
        let twice = apply_symbol(&mask, &once);
        assert!(rel_linf(&twice, &once) < 1e-13);
        // Low modes pass through untouched.
        let low = Field::from_fn(&g, |x, y| (2.0 * x).sin() * y.cos());
        assert!(rel_linf(&apply_symbol(&mask, &low), &low) < 1e-12);
    }
}

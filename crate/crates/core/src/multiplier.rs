//! The scalar algebraic equation that pins the step multiplier.
//!
//! Each step, the implicit solve is reduced to `phi^{n+1} = p + eta * q` and
//! `eta` is the root of a scalar residual
//!
//! ```text
//! r(eta) = [weighted F-difference](eta) - eta * (F'(star), [weighted phi-difference](eta))
//! ```
//!
//! with the weights of the time stencil in use. For polynomial densities the
//! residual is assembled as an exact degree-4 polynomial in `eta` by
//! integrating the monomial expansion over the grid; for the
//! gradient-dependent thin-film density it is kept as an evaluable
//! residual/derivative pair over cached gradients. Newton from `eta = 1`
//! finds the root; a bisection pass over `[0, 2]` backs it up, and a
//! rootless equation whose residual minimum is negligible against the
//! equation scale can be accepted at the minimizer (see `EtaOptions`).

use crate::error::{Error, Result};
use crate::field::Field;
use crate::models::{CoupledModel, ScalarModel};
use crate::spectral::gradient;

/// Discrete-difference weights of the time stencil: the new level carries
/// `w_new`, the two history levels `w_hist`. The same weights apply to the
/// F-difference and the phi-difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeWeights {
    pub w_new: f64,
    pub w_hist: [f64; 2],
}

impl SchemeWeights {
    /// Two-level difference `F(new) - F(n)`; used by the half-step and
    /// first-order stencils.
    pub const TWO_LEVEL: SchemeWeights = SchemeWeights {
        w_new: 1.0,
        w_hist: [-1.0, 0.0],
    };

    /// Three-level difference `3 F(new) - 4 F(n) + F(n-1)`.
    pub const THREE_LEVEL: SchemeWeights = SchemeWeights {
        w_new: 3.0,
        w_hist: [-4.0, 1.0],
    };
}

/// The residual, as either exact polynomial coefficients or an evaluator pair.
pub enum EtaEquation {
    Polynomial {
        /// `r(eta) = c[0] + c[1] eta + c[2] eta^2 + c[3] eta^3 + c[4] eta^4`.
        coeffs: [f64; 5],
        /// Magnitude scale of the raw contributions, for degeneracy detection.
        scale: f64,
    },
    Generic(GenericEta),
}

/// Residual and derivative evaluators over `eta`, plus the same degeneracy
/// scale as the polynomial form.
pub struct GenericEta {
    pub residual: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub derivative: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub scale: f64,
}

impl EtaEquation {
    pub fn residual(&self, eta: f64) -> f64 {
        match self {
            EtaEquation::Polynomial { coeffs, .. } => {
                coeffs[0] + eta * (coeffs[1] + eta * (coeffs[2] + eta * (coeffs[3] + eta * coeffs[4])))
            }
            EtaEquation::Generic(g) => (g.residual)(eta),
        }
    }

    pub fn derivative(&self, eta: f64) -> f64 {
        match self {
            EtaEquation::Polynomial { coeffs, .. } => {
                coeffs[1] + eta * (2.0 * coeffs[2] + eta * (3.0 * coeffs[3] + eta * 4.0 * coeffs[4]))
            }
            EtaEquation::Generic(g) => (g.derivative)(eta),
        }
    }

    /// Magnitude of the raw contributions; the reference for degeneracy and
    /// near-root bounds.
    pub fn scale(&self) -> f64 {
        match self {
            EtaEquation::Polynomial { scale, .. } => *scale,
            EtaEquation::Generic(g) => g.scale,
        }
    }

    /// The equation degenerates when every contribution vanishes (a flow with
    /// no nonlinear part); the multiplier is then 1 by definition.
    pub fn is_degenerate(&self) -> bool {
        match self {
            EtaEquation::Polynomial { coeffs, scale } => {
                let cmax = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
                cmax <= 1e-14 * scale.max(1e-300)
            }
            EtaEquation::Generic(g) => {
                let r = (g.residual)(1.0).abs().max((g.residual)(0.0).abs());
                let d = (g.derivative)(1.0).abs();
                r.max(d) <= 1e-14 * g.scale.max(1e-300)
            }
        }
    }

    /// The force inner products vanish but the F-difference does not: the
    /// step equation cannot be satisfied by any multiplier.
    fn is_inconsistent(&self) -> bool {
        match self {
            EtaEquation::Polynomial { coeffs, scale } => {
                let floor = 1e-14 * scale.max(1e-300);
                coeffs[1..].iter().all(|c| c.abs() <= floor) && coeffs[0].abs() > floor
            }
            EtaEquation::Generic(_) => false,
        }
    }
}

/// Outcome of a multiplier solve.
#[derive(Clone, Copy, Debug)]
pub struct EtaSolveReport {
    pub eta: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// True when the equation had no real root within tolerance and the
    /// residual-minimizing multiplier was accepted under the near-root bound.
    pub near_root: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Root-loss policy. The equation can momentarily lose its real root
    /// when the explicit energy part is stationary along the flow (the two
    /// roots straddling 1 collide and lift off). When set, a rootless
    /// equation whose residual minimum is below `near_root_tol * scale`
    /// is accepted at the minimizer; `None` reports NonConvergence instead.
    pub near_root_tol: Option<f64>,
}

impl Default for EtaOptions {
    fn default() -> Self {
        // The equation is scalar and cheap; a tight tolerance keeps the
        // discrete energy balance at roundoff. The near-root bound only
        // admits defects at the 1e-9-of-scale level, invisible next to the
        // per-step dissipation whenever the fallback can trigger at all.
        EtaOptions {
            tol: 1e-12,
            max_iter: 50,
            near_root_tol: Some(1e-9),
        }
    }
}

impl EtaOptions {
    /// Strict variant: root-loss is always an error.
    pub fn strict() -> EtaOptions {
        EtaOptions {
            near_root_tol: None,
            ..EtaOptions::default()
        }
    }
}

/// Newton iteration from `eta = 1`, converged when
/// `|r(eta)| <= tol * (1 + |r(1)|)`. Degenerate equations return 1 directly.
/// A failed Newton gets one bisection pass over `[0, 2]`, then (policy
/// permitting) the near-root acceptance, before reporting non-convergence.
pub fn solve_eta(eq: &EtaEquation, opts: &EtaOptions) -> Result<EtaSolveReport> {
    assert!(opts.tol > 0.0 && opts.max_iter >= 1);
    if eq.is_degenerate() {
        return Ok(EtaSolveReport {
            eta: 1.0,
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
            near_root: false,
        });
    }
    if eq.is_inconsistent() {
        return Err(Error::InconsistentEquation);
    }

    let r1 = eq.residual(1.0);
    let target = opts.tol * (1.0 + r1.abs());

    // Iterate to the machine stall rather than stopping at the residual
    // target: stopping early leaves a one-sided multiplier offset of
    // target/|r'| that accumulates as a systematic trajectory bias.
    let mut eta = 1.0;
    let mut r = r1;
    let mut best = (1.0, r1.abs());
    let mut hit_target_at = if r1.abs() <= target { Some(0) } else { None };
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let dr = eq.derivative(eta);
        if dr.abs() < 1e-14 {
            break;
        }
        let delta = r / dr;
        eta -= delta;
        if !eta.is_finite() {
            return Err(Error::NonFiniteIterate { iteration: it });
        }
        r = eq.residual(eta);
        if (-3.0..=5.0).contains(&eta) && r.abs() < best.1 {
            best = (eta, r.abs());
        }
        if hit_target_at.is_none() && best.1 <= target {
            hit_target_at = Some(iterations);
        }
        if delta.abs() <= 1e-15 * eta.abs().max(1.0) {
            break;
        }
    }
    if best.1 <= target {
        return Ok(EtaSolveReport {
            eta: best.0,
            iterations: hit_target_at.unwrap_or(iterations),
            residual_norm: best.1,
            converged: true,
            near_root: false,
        });
    }

    if let Some(report) = bisect(eq, target, opts.max_iter) {
        return Ok(report);
    }

    if let Some(near_tol) = opts.near_root_tol {
        let (eta_min, r_min) = minimize_residual(eq, best.0);
        if r_min <= near_tol * eq.scale().max(f64::MIN_POSITIVE) {
            return Ok(EtaSolveReport {
                eta: eta_min,
                iterations: opts.max_iter,
                residual_norm: r_min,
                converged: true,
                near_root: true,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: r.abs(),
    })
}

/// Locates the minimizer of `|r|` near `seed` by a coarse scan over
/// `[seed - 1, seed + 1]` (widened to cover `[-1, 3]`) plus golden-section
/// refinement.
fn minimize_residual(eq: &EtaEquation, seed: f64) -> (f64, f64) {
    let lo = (-1.0_f64).min(seed - 1.0);
    let hi = 3.0_f64.max(seed + 1.0);
    let n = 800;
    let step = (hi - lo) / n as f64;
    let mut best = (seed, eq.residual(seed).abs());
    for i in 0..=n {
        let x = lo + i as f64 * step;
        let r = eq.residual(x).abs();
        if r < best.1 {
            best = (x, r);
        }
    }
    // Golden-section on |r| around the best cell.
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = eq.residual(x1).abs();
    let mut f2 = eq.residual(x2).abs();
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eq.residual(x1).abs();
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eq.residual(x2).abs();
        }
    }
    let mid = 0.5 * (a + b);
    let rm = eq.residual(mid).abs();
    if rm < best.1 {
        (mid, rm)
    } else {
        best
    }
}

fn bisect(eq: &EtaEquation, target: f64, newton_iters: usize) -> Option<EtaSolveReport> {
    let (mut lo, mut hi) = (0.0_f64, 2.0_f64);
    let (mut rlo, rhi) = (eq.residual(lo), eq.residual(hi));
    if rlo == 0.0 {
        return Some(EtaSolveReport {
            eta: lo,
            iterations: newton_iters,
            residual_norm: 0.0,
            converged: true,
            near_root: false,
        });
    }
    if rlo.signum() == rhi.signum() {
        return None;
    }
    let mut mid = 1.0;
    let mut rmid;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        rmid = eq.residual(mid);
        if rmid == 0.0 || hi - lo < f64::EPSILON * 4.0 {
            break;
        }
        if rmid.signum() == rlo.signum() {
            lo = mid;
            rlo = rmid;
        } else {
            hi = mid;
        }
    }
    let r = eq.residual(mid);
    if r.abs() <= target {
        Some(EtaSolveReport {
            eta: mid,
            iterations: newton_iters + 200,
            residual_norm: r.abs(),
            converged: true,
            near_root: false,
        })
    } else {
        None
    }
}

/// Assembles the residual polynomial for a double-well scalar model:
/// `phi^{n+1} = p + eta q` against history levels `phi_n`, `phi_nm1`, with
/// `force_star = F'(phi*)` already evaluated.
pub fn build_scalar_eta_equation(
    model: &ScalarModel,
    weights: SchemeWeights,
    p: &Field,
    q: &Field,
    phi_n: &Field,
    phi_nm1: &Field,
    force_star: &Field,
) -> EtaEquation {
    match model.kind {
        crate::models::ScalarKind::AllenCahn | crate::models::ScalarKind::CahnHilliard => {
            let quarter = 1.0 / (4.0 * model.eps * model.eps);
            let cell = p.grid().cell_area();
            let (w0, w1, w2) = (weights.w_new, weights.w_hist[0], weights.w_hist[1]);

            // Pointwise expansion of F(p + eta q): with s^2 - 1 = A + B eta
            // + C eta^2, F = (A + B eta + C eta^2)^2 / (4 eps^2). The
            // near-cancelling pieces of c0 and c1 (weighted F-difference and
            // force-weighted state difference) are combined per point before
            // summation; summing them as separate whole-grid integrals first
            // leaves cancellation noise that an ill-conditioned root (flat
            // residual near a stationary state) then amplifies into the
            // multiplier.
            let mut coeffs = [0.0_f64; 5];
            let mut scale_acc = 0.0_f64;
            let well = |x: f64| {
                let w = x * x - 1.0;
                quarter * w * w
            };
            for i in 0..p.len() {
                let (pv, qv) = (p.values()[i], q.values()[i]);
                let (xn, xm) = (phi_n.values()[i], phi_nm1.values()[i]);
                let fs = force_star.values()[i];
                let a = pv * pv - 1.0;
                let b = 2.0 * pv * qv;
                let c = qv * qv;

                let f_combo = w0 * well(pv) + w1 * well(xn) + w2 * well(xm);
                let state_combo = w0 * pv + w1 * xn + w2 * xm;

                coeffs[0] += f_combo;
                coeffs[1] += quarter * w0 * 2.0 * a * b - fs * state_combo;
                coeffs[2] += quarter * w0 * (b * b + 2.0 * a * c) - w0 * fs * qv;
                coeffs[3] += quarter * w0 * 2.0 * b * c;
                coeffs[4] += quarter * w0 * c * c;
                scale_acc += well(pv).abs().max(well(xn).abs()) + fs.abs() * pv.abs().max(xn.abs());
            }
            for v in coeffs.iter_mut() {
                *v *= cell;
            }
            EtaEquation::Polynomial {
                coeffs,
                scale: cell * scale_acc * (w0.abs() + w1.abs() + w2.abs()),
            }
        }
        crate::models::ScalarKind::Mbe => {
            build_mbe_eta_equation(weights, p, q, phi_n, phi_nm1, force_star)
        }
    }
}

/// Gradient-density residual for the thin-film model, evaluated from cached
/// gradients. The weighted log-density difference and the force-weighted
/// state difference are combined per point (see the polynomial assembler for
/// why).
fn build_mbe_eta_equation(
    weights: SchemeWeights,
    p: &Field,
    q: &Field,
    phi_n: &Field,
    phi_nm1: &Field,
    force_star: &Field,
) -> EtaEquation {
    let cell = p.grid().cell_area();
    let (w0, w1, w2) = (weights.w_new, weights.w_hist[0], weights.w_hist[1]);
    let log_density = |gx: f64, gy: f64| -0.5 * (1.0 + gx * gx + gy * gy).ln();

    let (px, py) = gradient(p);
    let (qx, qy) = gradient(q);
    let (nx, ny) = gradient(phi_n);
    let (mx, my) = gradient(phi_nm1);

    let npts = p.len();
    // Per-point history density combination and the force-weighted state
    // combination, both O(dt)-small by cancellation.
    let mut hist: Vec<f64> = Vec::with_capacity(npts);
    let mut lin_base = 0.0_f64;
    let mut lin_q = 0.0_f64;
    let mut scale_acc = 0.0_f64;
    for i in 0..npts {
        let f_n = log_density(nx.values()[i], ny.values()[i]);
        let f_m = log_density(mx.values()[i], my.values()[i]);
        hist.push(w1 * f_n + w2 * f_m);
        let fs = force_star.values()[i];
        let state_combo =
            w0 * p.values()[i] + w1 * phi_n.values()[i] + w2 * phi_nm1.values()[i];
        lin_base += fs * state_combo;
        lin_q += fs * q.values()[i];
        scale_acc += f_n.abs() + fs.abs() * phi_n.values()[i].abs();
    }
    lin_base *= cell;
    lin_q *= cell * w0;
    let scale = cell * scale_acc * (w0.abs() + w1.abs() + w2.abs());

    let px_v: Vec<f64> = px.values().to_vec();
    let py_v: Vec<f64> = py.values().to_vec();
    let qx_v: Vec<f64> = qx.values().to_vec();
    let qy_v: Vec<f64> = qy.values().to_vec();

    let (rpx, rpy, rqx, rqy, rhist) = (px_v.clone(), py_v.clone(), qx_v.clone(), qy_v.clone(), hist);
    let residual = move |eta: f64| {
        let mut sum = 0.0;
        for i in 0..rpx.len() {
            let gx = rpx[i] + eta * rqx[i];
            let gy = rpy[i] + eta * rqy[i];
            sum += w0 * (-0.5 * (1.0 + gx * gx + gy * gy).ln()) + rhist[i];
        }
        cell * sum - eta * (lin_base + eta * lin_q)
    };
    let derivative = move |eta: f64| {
        let mut sum = 0.0;
        for i in 0..px_v.len() {
            let gx = px_v[i] + eta * qx_v[i];
            let gy = py_v[i] + eta * qy_v[i];
            sum += (gx * qx_v[i] + gy * qy_v[i]) / (1.0 + gx * gx + gy * gy);
        }
        -w0 * cell * sum - lin_base - 2.0 * eta * lin_q
    };

    EtaEquation::Generic(GenericEta {
        residual: Box::new(residual),
        derivative: Box::new(derivative),
        scale,
    })
}

/// Assembles the degree-4 residual for the coupled system with
/// `u^{n+1} = p_u + eta q_u`, `v^{n+1} = p_v + eta q_v` and the stabilized
/// split density selected by the model.
#[allow(clippy::too_many_arguments)]
pub fn build_coupled_eta_equation(
    model: &CoupledModel,
    weights: SchemeWeights,
    p_u: &Field,
    q_u: &Field,
    p_v: &Field,
    q_v: &Field,
    u_n: &Field,
    u_nm1: &Field,
    v_n: &Field,
    v_nm1: &Field,
    force_star_u: &Field,
    force_star_v: &Field,
) -> EtaEquation {
    let cell = p_u.grid().cell_area();
    let (w0, w1, w2) = (weights.w_new, weights.w_hist[0], weights.w_hist[1]);

    // Pointwise eta-expansion of W~(p_u + eta q_u, p_v + eta q_v), with the
    // weighted density difference and the force-weighted state differences
    // combined per point before summation (see the scalar assembler).
    let mut coeffs = [0.0_f64; 5];
    let mut scale_acc = 0.0_f64;
    for i in 0..p_u.len() {
        let (pu, qu) = (p_u.values()[i], q_u.values()[i]);
        let (pv, qv) = (p_v.values()[i], q_v.values()[i]);
        let (un, vn) = (u_n.values()[i], v_n.values()[i]);
        let (um, vm) = (u_nm1.values()[i], v_nm1.values()[i]);
        let (fsu, fsv) = (force_star_u.values()[i], force_star_v.values()[i]);

        let w_p = model.w_tilde_point(pu, pv);
        let w_n = model.w_tilde_point(un, vn);
        let w_m = model.w_tilde_point(um, vm);
        coeffs[0] += w0 * w_p + w1 * w_n + w2 * w_m;

        let combo_u = w0 * pu + w1 * un + w2 * um;
        let combo_v = w0 * pv + w1 * vn + w2 * vm;
        coeffs[1] -= fsu * combo_u + fsv * combo_v;
        coeffs[2] -= w0 * (fsu * qu + fsv * qv);

        // eta-monomial coefficients of W~(pu + eta qu, pv + eta qv), degree
        // one and up (the constant part is w_p above).
        let au = pu * pu - 1.0;
        let bu = 2.0 * pu * qu;
        let cu = qu * qu;
        let av = pv * pv - 1.0;
        let bv = 2.0 * pv * qv;
        let cv = qv * qv;
        coeffs[1] += w0
            * (0.5 * au * bu + 0.5 * av * bv
                + model.alpha * (pu * qv + qu * pv)
                + model.beta * (2.0 * pu * pv * qv + qu * pv * pv)
                + model.gamma * (pu * pu * qv + 2.0 * pu * qu * pv)
                - model.s_u * pu * qu
                - model.s_v * pv * qv);
        coeffs[2] += w0
            * (0.25 * (bu * bu + 2.0 * au * cu) + 0.25 * (bv * bv + 2.0 * av * cv)
                + model.alpha * qu * qv
                + model.beta * (pu * qv * qv + 2.0 * qu * pv * qv)
                + model.gamma * (2.0 * pu * qu * qv + qu * qu * pv)
                - 0.5 * (model.s_u * cu + model.s_v * cv));
        coeffs[3] += w0
            * (0.5 * bu * cu + 0.5 * bv * cv
                + model.beta * qu * qv * qv
                + model.gamma * qu * qu * qv);
        coeffs[4] += w0 * 0.25 * (cu * cu + cv * cv);

        scale_acc +=
            w_p.abs().max(w_n.abs()) + fsu.abs() * pu.abs().max(un.abs()) + fsv.abs() * pv.abs().max(vn.abs());
    }
    for v in coeffs.iter_mut() {
        *v *= cell;
    }
    EtaEquation::Polynomial {
        coeffs,
        scale: cell * scale_acc * (w0.abs() + w1.abs() + w2.abs()),
    }
}

//! Helpers shared by unit and integration tests: band-limited random fields
//! and finite-difference oracles kept independent of the spectral code paths
//! they are used to cross-check.

use std::sync::Arc;

use crate::field::Field;
use crate::grid::Grid;
use crate::io::prng::uniform_01;

/// Random trigonometric polynomial with modes `|j|, |m| <= 3`, seeded and
/// grid-resolution independent (the same seed gives the same continuum
/// function on any grid).
pub fn smooth_random_field(grid: &Arc<Grid>, seed: u64, amplitude: f64) -> Field {
    let max_mode = 3i64;
    let mut terms = Vec::new();
    let mut counter = 0u64;
    for j in 0..=max_mode {
        for m in -max_mode..=max_mode {
            if j == 0 && m < 0 {
                continue;
            }
            let a = 2.0 * uniform_01(seed, counter) - 1.0;
            let b = 2.0 * uniform_01(seed, counter + 1) - 1.0;
            counter += 2;
            terms.push((j as f64, m as f64, a, b));
        }
    }
    let norm = amplitude / terms.len() as f64 * 2.0;
    Field::from_fn(grid, |x, y| {
        terms
            .iter()
            .map(|&(j, m, a, b)| {
                let phase = j * x + m * y;
                a * phase.cos() + b * phase.sin()
            })
            .sum::<f64>()
            * norm
    })
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Centered second-order finite-difference `-Delta` on the periodic grid.
pub fn fd_neg_laplacian(f: &Field) -> Field {
    let grid = f.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let hx = grid.lx() / nx as f64;
    let hy = grid.ly() / ny as f64;
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let c = v[iy * nx + ix];
            let xm = v[iy * nx + wrap(ix as i64 - 1, nx)];
            let xp = v[iy * nx + wrap(ix as i64 + 1, nx)];
            let ym = v[wrap(iy as i64 - 1, ny) * nx + ix];
            let yp = v[wrap(iy as i64 + 1, ny) * nx + ix];
            out[iy * nx + ix] = -((xp - 2.0 * c + xm) / (hx * hx) + (yp - 2.0 * c + ym) / (hy * hy));
        }
    }
    Field::from_values(grid, out)
}

/// Centered second-order finite-difference gradient on the periodic grid.
pub fn fd_gradient(f: &Field) -> (Field, Field) {
    let grid = f.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let hx = grid.lx() / nx as f64;
    let hy = grid.ly() / ny as f64;
    let v = f.values();
    let mut gx = vec![0.0; v.len()];
    let mut gy = vec![0.0; v.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let xm = v[iy * nx + wrap(ix as i64 - 1, nx)];
            let xp = v[iy * nx + wrap(ix as i64 + 1, nx)];
            let ym = v[wrap(iy as i64 - 1, ny) * nx + ix];
            let yp = v[wrap(iy as i64 + 1, ny) * nx + ix];
            gx[iy * nx + ix] = (xp - xm) / (2.0 * hx);
            gy[iy * nx + ix] = (yp - ym) / (2.0 * hy);
        }
    }
    (Field::from_values(grid, gx), Field::from_values(grid, gy))
}

/// White noise low-passed to `|k| <= kmax`, rescaled to unit max amplitude.
/// Random, zero-mean, and rough — but with interfaces the grid can resolve.
pub fn band_limited_uniform(grid: &Arc<Grid>, seed: u64, offset: u64, kmax: f64) -> Field {
    let raw = crate::io::prng::seeded_uniform_field_offset(grid, seed, offset, -1.0, 1.0, true);
    let mask = crate::spectral::Symbol::from_fn(
        grid,
        |kx, ky| {
            if kx * kx + ky * ky <= kmax * kmax {
                1.0
            } else {
                0.0
            }
        },
        0.0,
    );
    let f = crate::spectral::apply_symbol(&mask, &raw);
    let m = f.linf().max(1e-300);
    f.scaled(1.0 / m)
}

/// Independent root oracle for multiplier equations: dense scan of the
/// residual over `[-10, 10]` with one million samples, bisection refinement
/// of every sign change, and selection of the root closest to 1.
pub fn dense_scan_root_near_one(eq: &crate::multiplier::EtaEquation) -> Option<f64> {
    let n = 1_000_000;
    let (lo, hi) = (-10.0_f64, 10.0_f64);
    let step = (hi - lo) / n as f64;
    let mut best: Option<f64> = None;
    let mut prev = eq.residual(lo);
    for i in 1..=n {
        let x = lo + i as f64 * step;
        let r = eq.residual(x);
        if prev == 0.0 || prev.signum() != r.signum() {
            let (mut a, mut b) = (x - step, x);
            let mut ra = eq.residual(a);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let rm = eq.residual(m);
                if rm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if rm.signum() == ra.signum() {
                    a = m;
                    ra = rm;
                } else {
                    b = m;
                }
            }
            let root = 0.5 * (a + b);
            best = match best {
                None => Some(root),
                Some(r0) if (root - 1.0).abs() < (r0 - 1.0).abs() => Some(root),
                keep => keep,
            };
        }
        prev = r;
    }
    best
}

/// Max-norm relative difference against a reference field.
pub fn rel_linf(a: &Field, reference: &Field) -> f64 {
    let scale = reference.linf().max(1e-300);
    a.values()
        .iter()
        .zip(reference.values())
        .fold(0.0_f64, |m, (&x, &y)| m.max((x - y).abs()))
        / scale
}

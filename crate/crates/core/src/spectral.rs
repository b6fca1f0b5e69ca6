//! Fourier transforms, differential operators as per-mode multipliers, and
//! the direct inversion of the constant-coefficient implicit operators.
//!
//! Real fields are transformed with Hermitian-symmetric half storage: only
//! the `nx/2 + 1` non-negative x-bins are kept, each row holding the full
//! signed-ky line. First derivatives zero the Nyquist bins (the collocation
//! derivative of the Nyquist mode vanishes at the grid points), so
//! `divergence` is the exact negative adjoint of `gradient` in the discrete
//! inner product.

use std::sync::Arc;

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{check_same_grid, Grid};

/// Half-spectrum coefficients of a real field: `ny` rows of `nx/2 + 1`
/// complex bins, row-major with kx fastest.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<Grid>,
    data: Vec<Complex<f64>>,
}

impl Spectrum {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

/// Forward transform of a real field into half-spectrum storage.
pub fn forward(f: &Field) -> Spectrum {
    let grid = Arc::clone(f.grid());
    let (nx, ny, nxh) = (grid.nx(), grid.ny(), grid.nxh());
    let mut data = vec![Complex::new(0.0, 0.0); nxh * ny];

    // FFT along x, keeping the non-negative bins.
    let mut row = vec![Complex::new(0.0, 0.0); nx];
    for iy in 0..ny {
        for ix in 0..nx {
            row[ix] = Complex::new(f.values()[iy * nx + ix], 0.0);
        }
        grid.fft_x().process(&mut row);
        data[iy * nxh..iy * nxh + nxh].copy_from_slice(&row[..nxh]);
    }

    // FFT along y, column by column.
    let mut col = vec![Complex::new(0.0, 0.0); ny];
    for ikx in 0..nxh {
        for iy in 0..ny {
            col[iy] = data[iy * nxh + ikx];
        }
        grid.fft_y().process(&mut col);
        for iy in 0..ny {
            data[iy * nxh + ikx] = col[iy];
        }
    }

    Spectrum { grid, data }
}

/// Inverse transform back to a real field (normalized by `1/(nx*ny)`).
pub fn inverse(s: &Spectrum) -> Field {
    let grid = Arc::clone(&s.grid);
    let (nx, ny, nxh) = (grid.nx(), grid.ny(), grid.nxh());
    let mut work = s.data.clone();

    let mut col = vec![Complex::new(0.0, 0.0); ny];
    for ikx in 0..nxh {
        for iy in 0..ny {
            col[iy] = work[iy * nxh + ikx];
        }
        grid.ifft_y().process(&mut col);
        for iy in 0..ny {
            work[iy * nxh + ikx] = col[iy];
        }
    }

    let norm = 1.0 / (nx * ny) as f64;
    let mut values = vec![0.0; nx * ny];
    let mut row = vec![Complex::new(0.0, 0.0); nx];
    for iy in 0..ny {
        row[..nxh].copy_from_slice(&work[iy * nxh..iy * nxh + nxh]);
        // Mirror the missing negative-kx bins from Hermitian symmetry.
        for j in 1..nx / 2 {
            row[nx - j] = work[iy * nxh + j].conj();
        }
        grid.ifft_x().process(&mut row);
        for ix in 0..nx {
            values[iy * nx + ix] = row[ix].re * norm;
        }
    }

    Field::from_values(&grid, values)
}

/// Real per-mode multiplier over the half-spectrum layout.
///
/// The zero-mode entry is always set explicitly by the constructor, since
/// that is where operators like the inverse Laplacian need a convention.
#[derive(Clone, Debug)]
pub struct Symbol {
    grid: Arc<Grid>,
    mult: Vec<f64>,
}

impl Symbol {
    /// Builds a symbol from a function of the signed wavenumbers, with the
    /// zero mode pinned to `zero_mode`.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64, zero_mode: f64) -> Symbol {
        let (ny, nxh) = (grid.ny(), grid.nxh());
        let mut mult = vec![0.0; nxh * ny];
        for iy in 0..ny {
            let ky = grid.ky(iy);
            for ikx in 0..nxh {
                mult[iy * nxh + ikx] = f(grid.kx(ikx), ky);
            }
        }
        mult[0] = zero_mode;
        assert!(mult.iter().all(|m| m.is_finite()), "symbol must be finite");
        Symbol {
            grid: Arc::clone(grid),
            mult,
        }
    }

    pub fn identity(grid: &Arc<Grid>) -> Symbol {
        Symbol::from_fn(grid, |_, _| 1.0, 1.0)
    }

    /// `-Delta`, i.e. multiplication by `|k|^2`.
    pub fn neg_laplacian(grid: &Arc<Grid>) -> Symbol {
        Symbol::from_fn(grid, |kx, ky| kx * kx + ky * ky, 0.0)
    }

    /// `Delta^2`, i.e. multiplication by `|k|^4`.
    pub fn bilaplacian(grid: &Arc<Grid>) -> Symbol {
        Symbol::from_fn(grid, |kx, ky| (kx * kx + ky * ky).powi(2), 0.0)
    }

    /// Mean-free inverse Laplacian: `-1/|k|^2` away from the zero mode, 0 on it.
    pub fn inverse_laplacian_zero_mean(grid: &Arc<Grid>) -> Symbol {
        Symbol::from_fn(grid, |kx, ky| -1.0 / (kx * kx + ky * ky), 0.0)
    }

    /// Projection that removes the mean: 1 away from the zero mode, 0 on it.
    pub fn mean_free_projection(grid: &Arc<Grid>) -> Symbol {
        Symbol::from_fn(grid, |_, _| 1.0, 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn scaled(&self, a: f64) -> Symbol {
        Symbol {
            grid: Arc::clone(&self.grid),
            mult: self.mult.iter().map(|&m| a * m).collect(),
        }
    }

    /// Pointwise product of two symbols (operator composition).
    pub fn compose(&self, other: &Symbol) -> Symbol {
        check_same_grid(&self.grid, &other.grid);
        Symbol {
            grid: Arc::clone(&self.grid),
            mult: self
                .mult
                .iter()
                .zip(&other.mult)
                .map(|(&a, &b)| a * b)
                .collect(),
        }
    }

    pub fn add_scaled(&self, a: f64, other: &Symbol) -> Symbol {
        check_same_grid(&self.grid, &other.grid);
        Symbol {
            grid: Arc::clone(&self.grid),
            mult: self
                .mult
                .iter()
                .zip(&other.mult)
                .map(|(&x, &y)| x + a * y)
                .collect(),
        }
    }

    pub fn apply_spectrum(&self, s: &mut Spectrum) {
        check_same_grid(&self.grid, &s.grid);
        for (c, &m) in s.data.iter_mut().zip(&self.mult) {
            *c *= m;
        }
    }
}

/// Applies a per-mode multiplier to a field: inverse(mult * forward(f)).
pub fn apply_symbol(s: &Symbol, f: &Field) -> Field {
    check_same_grid(s.grid(), f.grid());
    let mut spec = forward(f);
    s.apply_spectrum(&mut spec);
    inverse(&spec)
}

/// Quadratic form `(apply_symbol(s, f), f)`; the workhorse for energies.
pub fn quad_form(s: &Symbol, f: &Field) -> f64 {
    inner_product(&apply_symbol(s, f), f)
}

fn derivative_spectrum_x(spec: &Spectrum) -> Spectrum {
    let grid = Arc::clone(&spec.grid);
    let (nx, ny, nxh) = (grid.nx(), grid.ny(), grid.nxh());
    let mut out = spec.clone();
    for iy in 0..ny {
        for ikx in 0..nxh {
            // Collocation derivative of the Nyquist bin vanishes.
            let k = if ikx == nx / 2 { 0.0 } else { grid.kx(ikx) };
            let c = out.data[iy * nxh + ikx];
            out.data[iy * nxh + ikx] = Complex::new(-c.im * k, c.re * k);
        }
    }
    out
}

fn derivative_spectrum_y(spec: &Spectrum) -> Spectrum {
    let grid = Arc::clone(&spec.grid);
    let (ny, nxh) = (grid.ny(), grid.nxh());
    let mut out = spec.clone();
    for iy in 0..ny {
        let k = if iy == ny / 2 { 0.0 } else { grid.ky(iy) };
        for ikx in 0..nxh {
            let c = out.data[iy * nxh + ikx];
            out.data[iy * nxh + ikx] = Complex::new(-c.im * k, c.re * k);
        }
    }
    out
}

/// Spectral gradient `(df/dx, df/dy)`.
pub fn gradient(f: &Field) -> (Field, Field) {
    let spec = forward(f);
    (
        inverse(&derivative_spectrum_x(&spec)),
        inverse(&derivative_spectrum_y(&spec)),
    )
}

/// Spectral divergence of a vector field.
pub fn divergence(fx: &Field, fy: &Field) -> Field {
    check_same_grid(fx.grid(), fy.grid());
    let sx = derivative_spectrum_x(&forward(fx));
    let mut sy = derivative_spectrum_y(&forward(fy));
    for (a, b) in sy.data.iter_mut().zip(&sx.data) {
        *a += b;
    }
    inverse(&sy)
}

/// Solves `Delta g = f - mean(f)` for the zero-mean `g`.
pub fn inverse_laplacian_zero_mean(f: &Field) -> Field {
    apply_symbol(&Symbol::inverse_laplacian_zero_mean(f.grid()), f)
}

/// `integral of f` over the domain; the trapezoid rule on a periodic grid.
pub fn integrate(f: &Field) -> f64 {
    f.grid().cell_area() * f.values().iter().sum::<f64>()
}

/// Discrete `L^2` inner product `(f, g)`.
pub fn inner_product(f: &Field, g: &Field) -> f64 {
    check_same_grid(f.grid(), g.grid());
    let dot: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(&a, &b)| a * b)
        .sum();
    f.grid().cell_area() * dot
}

pub fn l2_norm(f: &Field) -> f64 {
    inner_product(f, f).sqrt()
}

pub fn mean(f: &Field) -> f64 {
    integrate(f) / f.grid().area()
}

/// Constant-coefficient operator `a*I + b*(-Delta) + c*Delta^2 + d*(I - mean)`
/// held as its per-mode divisor, invertible in one spectral sweep.
#[derive(Clone, Debug)]
pub struct DiagonalOp {
    divisor: Symbol,
}

impl DiagonalOp {
    pub fn new(grid: &Arc<Grid>, a: f64, b: f64, c: f64, d: f64) -> Result<DiagonalOp> {
        let divisor = Symbol::from_fn(
            grid,
            |kx, ky| {
                let k2 = kx * kx + ky * ky;
                a + b * k2 + c * k2 * k2 + d
            },
            a,
        );
        for (idx, &m) in divisor.mult.iter().enumerate() {
            if m == 0.0 {
                let nxh = grid.nxh();
                return Err(Error::ZeroDivisor {
                    kx: (idx % nxh) as i64,
                    ky: {
                        let iy = idx / nxh;
                        if iy <= grid.ny() / 2 {
                            iy as i64
                        } else {
                            iy as i64 - grid.ny() as i64
                        }
                    },
                });
            }
        }
        Ok(DiagonalOp { divisor })
    }

    /// Wraps an already-assembled divisor symbol. Errors if any mode is zero.
    pub fn from_symbol(divisor: Symbol) -> Result<DiagonalOp> {
        if divisor.mult.iter().any(|&m| m == 0.0) {
            return Err(Error::ZeroDivisor { kx: 0, ky: 0 });
        }
        Ok(DiagonalOp { divisor })
    }

    /// Applies the forward operator (multiplication by the divisor).
    pub fn apply(&self, f: &Field) -> Field {
        apply_symbol(&self.divisor, f)
    }

    /// Applies the inverse (division by the divisor); exact per mode.
    pub fn solve(&self, rhs: &Field) -> Field {
        check_same_grid(self.divisor.grid(), rhs.grid());
        let mut spec = forward(rhs);
        for (c, &m) in spec.data.iter_mut().zip(&self.divisor.mult) {
            *c /= m;
        }
        inverse(&spec)
    }

    /// Solves with the right-hand side already in spectral form.
    pub fn solve_spectrum(&self, rhs: &Spectrum) -> Field {
        check_same_grid(self.divisor.grid(), rhs.grid());
        let mut spec = rhs.clone();
        for (c, &m) in spec.data.iter_mut().zip(&self.divisor.mult) {
            *c /= m;
        }
        inverse(&spec)
    }
}

/// One-call form of the diagonal solve for `(a, b, c, d)` coefficients.
pub fn solve_diagonal(a: f64, b: f64, c: f64, d: f64, rhs: &Field) -> Result<Field> {
    Ok(DiagonalOp::new(rhs.grid(), a, b, c, d)?.solve(rhs))
}

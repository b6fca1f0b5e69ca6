use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, lx) x [0, ly)` with `nx * ny` collocation
/// points, plus the FFT plans shared by every transform on it.
///
/// Layout is row-major with x fastest: value `(ix, iy)` lives at
/// `iy * nx + ix`. Grids are immutable after construction and handed around
/// behind an `Arc`.
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    /// Signed wavenumbers 2*pi*j/lx in standard FFT order (0..nx/2, -nx/2+1..-1),
    /// with the Nyquist index holding +nx/2.
    kx: Vec<f64>,
    ky: Vec<f64>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl Grid {
    /// Builds a grid. `nx` and `ny` must be even and at least 4; `lx`, `ly`
    /// must be positive and finite.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Arc<Grid>> {
        if nx < 4 || ny < 4 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "mode counts must be even and >= 4, got {nx} x {ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite()) || lx <= 0.0 || ly <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        let wavenumbers = |n: usize, l: f64| -> Vec<f64> {
            (0..n)
                .map(|j| {
                    let signed = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
                    2.0 * std::f64::consts::PI * signed as f64 / l
                })
                .collect()
        };
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            nx,
            ny,
            lx,
            ly,
            kx: wavenumbers(nx, lx),
            ky: wavenumbers(ny, ly),
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        }))
    }

    /// Square grid on the default domain `[0, 2*pi)^2`.
    pub fn square(n: usize) -> Result<Arc<Grid>> {
        let l = 2.0 * std::f64::consts::PI;
        Grid::new(n, n, l, l)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area of one grid cell, `lx * ly / (nx * ny)`.
    pub fn cell_area(&self) -> f64 {
        self.lx * self.ly / (self.nx * self.ny) as f64
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Collocation point coordinates for flat index `idx`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let ix = idx % self.nx;
        let iy = idx / self.nx;
        (
            ix as f64 * self.lx / self.nx as f64,
            iy as f64 * self.ly / self.ny as f64,
        )
    }

    /// Signed x-wavenumber for FFT bin `j`.
    pub fn kx(&self, j: usize) -> f64 {
        self.kx[j]
    }

    /// Signed y-wavenumber for FFT bin `m`.
    pub fn ky(&self, m: usize) -> f64 {
        self.ky[m]
    }

    /// Number of retained x-bins in the half-spectrum layout (`nx/2 + 1`).
    pub(crate) fn nxh(&self) -> usize {
        self.nx / 2 + 1
    }

    pub(crate) fn fft_x(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_x
    }

    pub(crate) fn ifft_x(&self) -> &Arc<dyn Fft<f64>> {
        &self.ifft_x
    }

    pub(crate) fn fft_y(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_y
    }

    pub(crate) fn ifft_y(&self) -> &Arc<dyn Fft<f64>> {
        &self.ifft_y
    }

    /// Two grids are compatible when they have the same shape and domain.
    /// `Arc` identity short-circuits the common case.
    pub fn same_as(self: &Arc<Grid>, other: &Arc<Grid>) -> bool {
        Arc::ptr_eq(self, other)
            || (self.nx == other.nx
                && self.ny == other.ny
                && self.lx == other.lx
                && self.ly == other.ly)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .finish()
    }
}

/// Panics unless both fields live on compatible grids.
#[track_caller]
pub(crate) fn check_same_grid(a: &Arc<Grid>, b: &Arc<Grid>) {
    assert!(
        a.same_as(b),
        "grid mismatch: {:?} vs {:?}",
        a.as_ref(),
        b.as_ref()
    );
}

//! Pseudo-spectral solvers for dissipative phase-field dynamics on periodic
//! 2D grids.
//!
//! The crate couples a Fourier collocation core (`grid`, `field`, `spectral`)
//! with time steppers that determine a scalar multiplier each step so the
//! discrete energy balance of the underlying flow holds exactly
//! (`multiplier`, `integrators`). Four model families are built in
//! (`models`): Allen-Cahn, Cahn-Hilliard, the thin-film height equation
//! without slope selection, and a coupled pair of conserved equations with a
//! long-range interaction term. `diagnostics` carries the energy bookkeeping
//! and convergence-study harness, and `io` the config/CSV/snapshot formats
//! used by the `lagflow` binary.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod integrators;
pub mod io;
pub mod models;
pub mod multiplier;
pub mod spectral;

#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::Grid;

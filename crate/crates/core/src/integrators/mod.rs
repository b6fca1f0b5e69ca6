//! Time steppers built around the per-step scalar multiplier: first-order
//! startup/estimator, half-step and three-level second-order stencils for
//! the scalar models, their coupled-system counterparts (plain and
//! stabilized), the variable-step half-step scheme, and the adaptive
//! controller driving it.

pub mod adaptive;
pub mod coupled;
pub mod runner;
pub mod scalar;

pub use adaptive::{adapt_step, run_adaptive, AdaptiveParams};
pub use coupled::{
    step_be1_coupled, step_be1_semi_implicit_coupled, step_bdf2_coupled, step_cn_coupled,
    CoupledState,
};
pub use runner::{
    run_fixed_coupled, run_fixed_scalar, CoupledScheme, RunOptions, ScalarScheme, SnapshotSink,
    Trajectory, TrajectoryRecord,
};
pub use scalar::{step_bdf2, step_be1, step_be1_semi_implicit, step_cn, ScalarState};

/// Per-step outcome handed back by every stepper.
#[derive(Clone, Copy, Debug)]
pub struct StepReport {
    pub eta: f64,
    pub newton_iters: usize,
    /// Relative defect of the scheme's exact discrete energy identity,
    /// computed only on request and only when no forcing term distorts it.
    pub law_residual: Option<f64>,
    /// The multiplier equation lost its real root this step and the
    /// residual-minimizing value was accepted.
    pub near_root: bool,
}

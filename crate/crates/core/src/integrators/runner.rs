//! Fixed-step marching with startup handling, diagnostics records, and
//! snapshot emission.

use crate::diagnostics::{coupled_modified_energy, mass, scalar_modified_energy};
use crate::error::Result;
use crate::field::Field;
use crate::integrators::coupled::{
    step_be1_coupled, step_bdf2_coupled, step_cn_coupled, CoupledState,
};
use crate::integrators::scalar::{step_bdf2, step_be1, step_cn, ScalarState};
use crate::integrators::StepReport;
use crate::models::{CoupledForcing, CoupledModel, ScalarForcing, ScalarModel};
use crate::multiplier::EtaOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarScheme {
    Be1,
    Cn,
    Bdf2,
}

impl ScalarScheme {
    pub fn name(&self) -> &'static str {
        match self {
            ScalarScheme::Be1 => "be1",
            ScalarScheme::Cn => "cn",
            ScalarScheme::Bdf2 => "bdf2",
        }
    }

    fn needs_history(&self) -> bool {
        matches!(self, ScalarScheme::Cn | ScalarScheme::Bdf2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoupledScheme {
    Be1,
    /// The half-step scheme in its variable-step form; at constant dt this
    /// is the plain fixed-step scheme.
    Cn,
    Bdf2,
}

impl CoupledScheme {
    pub fn name(&self) -> &'static str {
        match self {
            CoupledScheme::Be1 => "be1",
            CoupledScheme::Cn => "cn",
            CoupledScheme::Bdf2 => "bdf2",
        }
    }

    fn needs_history(&self) -> bool {
        matches!(self, CoupledScheme::Cn | CoupledScheme::Bdf2)
    }
}

/// One diagnostics row per attempted step.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub eta: f64,
    pub energy: f64,
    pub modified_energy: f64,
    pub mass_u: f64,
    pub mass_v: Option<f64>,
    pub newton_iters: usize,
    pub accepted: bool,
    pub law_residual: Option<f64>,
    pub near_root: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Steps the adaptive controller had to accept at the floor step size.
    pub forced_accepts: u64,
    /// Steps accepted through the near-root policy of the multiplier solve.
    pub near_root_accepts: u64,
    /// Reduced-step bridge steps taken by the non-convergence rescue.
    pub rescue_substeps: u64,
}

impl Trajectory {
    pub fn accepted(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(|r| r.accepted)
    }
}

/// Knobs shared by all run drivers.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Record every k-th accepted step (the final step is always recorded).
    pub record_every: u64,
    /// Evaluate the per-step energy-identity defect (adds transforms).
    pub track_law: bool,
    /// Times at which the snapshot sink fires. Adaptive runs land on them
    /// exactly; fixed-step runs fire at the first step past each.
    pub snapshot_times: Vec<f64>,
    /// Also fire the snapshot sink every k-th accepted step (0 = never).
    pub snapshot_every: u64,
    /// On multiplier non-convergence, bridge the failed interval with
    /// reduced half-step substeps instead of aborting. Off by default:
    /// non-convergence then propagates with the step index.
    pub rescue_substeps: bool,
    /// Bootstrap two-level schemes with the multiplier pinned at 1 instead
    /// of solving its equation on the startup step (accuracy studies).
    pub semi_implicit_startup: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_every: 1,
            track_law: false,
            snapshot_times: Vec::new(),
            snapshot_every: 0,
            rescue_substeps: false,
            semi_implicit_startup: false,
        }
    }
}

/// Receives `(t, named fields)` when a snapshot time is crossed.
pub type SnapshotSink<'a> = &'a mut dyn FnMut(f64, &[(&str, &Field)]) -> Result<()>;

pub(crate) struct SnapshotSchedule {
    times: Vec<f64>,
    next: usize,
}

impl SnapshotSchedule {
    pub(crate) fn new(mut times: Vec<f64>) -> SnapshotSchedule {
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        SnapshotSchedule { times, next: 0 }
    }

    /// Next pending snapshot time, if any.
    pub(crate) fn upcoming(&self) -> Option<f64> {
        self.times.get(self.next).copied()
    }

    /// True when `t` has reached or passed the pending time.
    pub(crate) fn due(&mut self, t: f64) -> bool {
        match self.upcoming() {
            Some(target) if t >= target - 1e-9 * target.abs().max(1.0) => {
                self.next += 1;
                true
            }
            _ => false,
        }
    }
}

fn time_is_done(t: f64, t_end: f64, dt: f64) -> bool {
    t >= t_end - 1e-9 * dt
}

/// Shortens the last step to land on `t_end` exactly.
fn effective_dt(t: f64, t_end: f64, dt: f64) -> f64 {
    let remaining = t_end - t;
    if remaining < dt * (1.0 + 1e-9) {
        remaining
    } else {
        dt
    }
}

fn scalar_record(
    state: &ScalarState,
    scheme: ScalarScheme,
    model: &ScalarModel,
    dt: f64,
    report: &StepReport,
) -> TrajectoryRecord {
    TrajectoryRecord {
        step: state.step_index,
        t: state.t,
        dt,
        eta: report.eta,
        energy: model.total_energy(&state.phi),
        modified_energy: scalar_modified_energy(scheme, model, &state.phi, &state.phi_prev),
        mass_u: mass(&state.phi),
        mass_v: None,
        newton_iters: report.newton_iters,
        accepted: true,
        law_residual: report.law_residual,
        near_root: report.near_root,
    }
}

pub(crate) fn coupled_record(
    state: &CoupledState,
    scheme: CoupledScheme,
    model: &CoupledModel,
    dt: f64,
    report: &StepReport,
    accepted: bool,
) -> TrajectoryRecord {
    TrajectoryRecord {
        step: state.step_index,
        t: state.t,
        dt,
        eta: report.eta,
        energy: model.total_energy(&state.u, &state.v),
        modified_energy: coupled_modified_energy(
            scheme,
            model,
            &state.u,
            &state.v,
            &state.u_prev,
            &state.v_prev,
        ),
        mass_u: mass(&state.u),
        mass_v: Some(mass(&state.v)),
        newton_iters: report.newton_iters,
        accepted,
        law_residual: report.law_residual,
        near_root: report.near_root,
    }
}

/// Deepest halving the non-convergence rescue attempts before giving up.
const MAX_RESCUE_HALVINGS: u32 = 14;

/// Fixed-step scalar run. Two-level schemes start with one first-order step;
/// a three-level run whose last step must be shortened finishes with the
/// variable-step half-step scheme instead. With `rescue_substeps` on, an
/// interval whose multiplier equation has no root is bridged by half-step
/// substeps at `dt / 2^m`, and the following nominal step uses the
/// variable-step form to re-enter the three-level stencil.
#[allow(clippy::too_many_arguments)]
pub fn run_fixed_scalar(
    state: &mut ScalarState,
    model: &ScalarModel,
    scheme: ScalarScheme,
    dt: f64,
    t_end: f64,
    forcing: Option<&dyn ScalarForcing>,
    opts: &RunOptions,
    eta_opts: &EtaOptions,
    mut snapshots: Option<SnapshotSink>,
) -> Result<Trajectory> {
    assert!(dt > 0.0 && t_end > state.t);
    let mut trajectory = Trajectory::default();
    let mut schedule = SnapshotSchedule::new(opts.snapshot_times.clone());
    let mut steps_taken: u64 = 0;
    let mut resume_with_cn = false;

    while !time_is_done(state.t, t_end, dt) {
        let dt_k = effective_dt(state.t, t_end, dt);
        let shortened = (dt_k - dt).abs() > 1e-9 * dt;
        let startup = scheme.needs_history() && state.step_index == 0;
        let final_step = time_is_done(state.t + dt_k, t_end, dt);
        let record_now =
            opts.record_every != u64::MAX && (steps_taken % opts.record_every == 0 || final_step);
        let track = opts.track_law && record_now;

        let attempt = if startup {
            if opts.semi_implicit_startup {
                crate::integrators::scalar::step_be1_semi_implicit(state, model, dt_k, forcing)
            } else {
                step_be1(state, model, dt_k, forcing, eta_opts, track)
            }
        } else {
            match scheme {
                ScalarScheme::Be1 => step_be1(state, model, dt_k, forcing, eta_opts, track),
                ScalarScheme::Cn => step_cn(state, model, dt_k, forcing, eta_opts, track),
                ScalarScheme::Bdf2 if shortened || resume_with_cn => {
                    step_cn(state, model, dt_k, forcing, eta_opts, track)
                }
                ScalarScheme::Bdf2 => step_bdf2(state, model, dt_k, forcing, eta_opts, track),
            }
        };

        let report = match attempt {
            Ok(report) => {
                resume_with_cn = false;
                report
            }
            Err(e) if e.is_nonconvergence() && opts.rescue_substeps && !startup => {
                // The failed stepper leaves the state untouched; bridge the
                // interval with reduced half-step substeps.
                let target = state.t + dt_k;
                let mut bridged = None;
                for m in 1..=MAX_RESCUE_HALVINGS {
                    let sub = dt_k / (1u64 << m) as f64;
                    let mut trial = state.clone();
                    let mut count = 0u64;
                    let mut nears = 0u64;
                    let mut last = None;
                    let mut failed = false;
                    while trial.t < target - 1e-9 * sub {
                        let s = sub.min(target - trial.t);
                        match step_cn(&mut trial, model, s, forcing, eta_opts, track) {
                            Ok(rep) => {
                                count += 1;
                                nears += rep.near_root as u64;
                                last = Some((s, rep));
                            }
                            Err(err) if err.is_nonconvergence() => {
                                failed = true;
                                break;
                            }
                            Err(err) => return Err(err.at_step(trial.step_index)),
                        }
                    }
                    if !failed {
                        bridged = Some((trial, count, nears, last));
                        break;
                    }
                }
                let (trial, count, nears, last) =
                    bridged.ok_or_else(|| e.at_step(state.step_index))?;
                *state = trial;
                trajectory.rescue_substeps += count;
                trajectory.near_root_accepts += nears;
                resume_with_cn = true;
                steps_taken += 1;
                if record_now {
                    let (s, rep) = last.expect("bridge took at least one step");
                    trajectory
                        .records
                        .push(scalar_record(state, scheme, model, s, &rep));
                }
                fire_snapshots_scalar(
                    state,
                    opts,
                    &mut schedule,
                    &mut snapshots,
                    steps_taken,
                )?;
                continue;
            }
            Err(e) => return Err(e.at_step(state.step_index)),
        };
        steps_taken += 1;
        trajectory.near_root_accepts += report.near_root as u64;

        if record_now {
            trajectory
                .records
                .push(scalar_record(state, scheme, model, dt_k, &report));
        }
        fire_snapshots_scalar(state, opts, &mut schedule, &mut snapshots, steps_taken)?;
    }
    Ok(trajectory)
}

fn fire_snapshots_scalar(
    state: &ScalarState,
    opts: &RunOptions,
    schedule: &mut SnapshotSchedule,
    snapshots: &mut Option<SnapshotSink>,
    steps_taken: u64,
) -> Result<()> {
    if let Some(sink) = snapshots.as_mut() {
        let mut fire = opts.snapshot_every > 0 && steps_taken % opts.snapshot_every == 0;
        while schedule.due(state.t) {
            fire = true;
        }
        if fire {
            sink(state.t, &[("phi", &state.phi)])?;
        }
    }
    Ok(())
}

/// Fixed-step coupled run with the same startup, shortening, and rescue
/// rules as the scalar driver.
#[allow(clippy::too_many_arguments)]
pub fn run_fixed_coupled(
    state: &mut CoupledState,
    model: &CoupledModel,
    scheme: CoupledScheme,
    dt: f64,
    t_end: f64,
    forcing: Option<&dyn CoupledForcing>,
    opts: &RunOptions,
    eta_opts: &EtaOptions,
    mut snapshots: Option<SnapshotSink>,
) -> Result<Trajectory> {
    assert!(dt > 0.0 && t_end > state.t);
    let mut trajectory = Trajectory::default();
    let mut schedule = SnapshotSchedule::new(opts.snapshot_times.clone());
    let mut steps_taken: u64 = 0;
    let mut resume_with_cn = false;

    while !time_is_done(state.t, t_end, dt) {
        let dt_k = effective_dt(state.t, t_end, dt);
        let shortened = (dt_k - dt).abs() > 1e-9 * dt;
        let startup = scheme.needs_history() && state.step_index == 0;
        let final_step = time_is_done(state.t + dt_k, t_end, dt);
        let record_now =
            opts.record_every != u64::MAX && (steps_taken % opts.record_every == 0 || final_step);
        let track = opts.track_law && record_now;

        let attempt = if startup {
            if opts.semi_implicit_startup {
                crate::integrators::coupled::step_be1_semi_implicit_coupled(
                    state, model, dt_k, forcing,
                )
            } else {
                step_be1_coupled(state, model, dt_k, forcing, eta_opts, track)
            }
        } else {
            match scheme {
                CoupledScheme::Be1 => {
                    step_be1_coupled(state, model, dt_k, forcing, eta_opts, track)
                }
                CoupledScheme::Cn => step_cn_coupled(state, model, dt_k, forcing, eta_opts, track),
                CoupledScheme::Bdf2 if shortened || resume_with_cn => {
                    step_cn_coupled(state, model, dt_k, forcing, eta_opts, track)
                }
                CoupledScheme::Bdf2 => {
                    step_bdf2_coupled(state, model, dt_k, forcing, eta_opts, track)
                }
            }
        };

        let report = match attempt {
            Ok(report) => {
                resume_with_cn = false;
                report
            }
            Err(e) if e.is_nonconvergence() && opts.rescue_substeps && !startup => {
                let target = state.t + dt_k;
                let mut bridged = None;
                for m in 1..=MAX_RESCUE_HALVINGS {
                    let sub = dt_k / (1u64 << m) as f64;
                    let mut trial = state.clone();
                    let mut count = 0u64;
                    let mut nears = 0u64;
                    let mut last = None;
                    let mut failed = false;
                    while trial.t < target - 1e-9 * sub {
                        let s = sub.min(target - trial.t);
                        match step_cn_coupled(&mut trial, model, s, forcing, eta_opts, track) {
                            Ok(rep) => {
                                count += 1;
                                nears += rep.near_root as u64;
                                last = Some((s, rep));
                            }
                            Err(err) if err.is_nonconvergence() => {
                                failed = true;
                                break;
                            }
                            Err(err) => return Err(err.at_step(trial.step_index)),
                        }
                    }
                    if !failed {
                        bridged = Some((trial, count, nears, last));
                        break;
                    }
                }
                let (trial, count, nears, last) =
                    bridged.ok_or_else(|| e.at_step(state.step_index))?;
                *state = trial;
                trajectory.rescue_substeps += count;
                trajectory.near_root_accepts += nears;
                resume_with_cn = true;
                steps_taken += 1;
                if record_now {
                    let (s, rep) = last.expect("bridge took at least one step");
                    trajectory
                        .records
                        .push(coupled_record(state, scheme, model, s, &rep, true));
                }
                fire_snapshots_coupled(state, opts, &mut schedule, &mut snapshots, steps_taken)?;
                continue;
            }
            Err(e) => return Err(e.at_step(state.step_index)),
        };
        steps_taken += 1;
        trajectory.near_root_accepts += report.near_root as u64;

        if record_now {
            trajectory
                .records
                .push(coupled_record(state, scheme, model, dt_k, &report, true));
        }
        fire_snapshots_coupled(state, opts, &mut schedule, &mut snapshots, steps_taken)?;
    }
    Ok(trajectory)
}

fn fire_snapshots_coupled(
    state: &CoupledState,
    opts: &RunOptions,
    schedule: &mut SnapshotSchedule,
    snapshots: &mut Option<SnapshotSink>,
    steps_taken: u64,
) -> Result<()> {
    if let Some(sink) = snapshots.as_mut() {
        let mut fire = opts.snapshot_every > 0 && steps_taken % opts.snapshot_every == 0;
        while schedule.due(state.t) {
            fire = true;
        }
        if fire {
            sink(state.t, &[("u", &state.u), ("v", &state.v)])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::testing::smooth_random_field;

    #[test]
    fn t_end_equal_to_dt_takes_one_step() {
        let g = Grid::square(8).unwrap();
        let model = ScalarModel::allen_cahn(0.5);
        let mut state = ScalarState::new(smooth_random_field(&g, 1, 0.1));
        let traj = run_fixed_scalar(
            &mut state,
            &model,
            ScalarScheme::Be1,
            0.01,
            0.01,
            None,
            &RunOptions::default(),
            &EtaOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(state.step_index, 1);
        assert!((state.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn partial_last_step_lands_on_t_end() {
        let g = Grid::square(8).unwrap();
        let model = ScalarModel::allen_cahn(0.5);
        let mut state = ScalarState::new(smooth_random_field(&g, 2, 0.1));
        run_fixed_scalar(
            &mut state,
            &model,
            ScalarScheme::Bdf2,
            3e-3,
            0.01, // not divisible: 3 steps + shortened 1e-3 step
            None,
            &RunOptions::default(),
            &EtaOptions::default(),
            None,
        )
        .unwrap();
        assert!((state.t - 0.01).abs() < 1e-12);
        assert_eq!(state.step_index, 4);
    }

    #[test]
    fn record_cadence_counts_rows() {
        let g = Grid::square(8).unwrap();
        let model = ScalarModel::allen_cahn(0.5);
        let mut state = ScalarState::new(smooth_random_field(&g, 3, 0.1));
        let opts = RunOptions {
            record_every: 5,
            ..RunOptions::default()
        };
        let traj = run_fixed_scalar(
            &mut state,
            &model,
            ScalarScheme::Cn,
            1e-3,
            0.02, // 20 steps -> records at steps 1, 6, 11, 16 and the final
            None,
            &opts,
            &EtaOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(traj.records.len(), 5);
        assert!(traj.records.last().unwrap().t >= 0.02 - 1e-12);
    }

    #[test]
    fn snapshots_fire_at_crossings() {
        let g = Grid::square(8).unwrap();
        let model = ScalarModel::allen_cahn(0.5);
        let mut state = ScalarState::new(smooth_random_field(&g, 4, 0.1));
        let opts = RunOptions {
            snapshot_times: vec![0.005, 0.01],
            ..RunOptions::default()
        };
        let mut seen = Vec::new();
        let mut sink = |t: f64, fields: &[(&str, &Field)]| {
            assert_eq!(fields.len(), 1);
            seen.push(t);
            Ok(())
        };
        run_fixed_scalar(
            &mut state,
            &model,
            ScalarScheme::Be1,
            1e-3,
            0.01,
            None,
            &opts,
            &EtaOptions::default(),
            Some(&mut sink),
        )
        .unwrap();
        assert_eq!(seen.len(), 2);
        assert!((seen[0] - 0.005).abs() < 1e-9);
        assert!((seen[1] - 0.01).abs() < 1e-9);
    }
}

//! Turns a parsed config plus a job kind into an executed experiment with
//! files on disk: config echo, diagnostics CSV, accuracy tables, raw
//! snapshots and PGM previews.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::diagnostics::{convergence_study_coupled, convergence_study_scalar, ConvergenceTable};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::integrators::{
    run_adaptive, run_fixed_coupled, run_fixed_scalar, CoupledState, RunOptions, ScalarState,
    Trajectory,
};
use crate::io::config::{IcConfig, RunConfig, SchemeName, Timing};
use crate::io::output::{
    write_convergence_csv, write_energy_csv, write_pgm, write_snapshot, SnapshotHeader,
};
use crate::io::presets::Job;
use crate::io::prng::seeded_uniform_field_offset;
use crate::models::{ExactSolution, ManufacturedCoupled, ManufacturedScalar};
use crate::multiplier::EtaOptions;

/// Scalar initial condition; component 0. Coupled runs use components 0
/// and 1, drawn from disjoint counter ranges of the same seed.
fn initial_field(config: &RunConfig, grid: &Arc<Grid>, component: u64) -> Result<Field> {
    match &config.ic {
        IcConfig::Random {
            lo,
            hi,
            shift,
            zero_mean,
        } => {
            let mut f = seeded_uniform_field_offset(
                grid,
                config.seed,
                component * grid.len() as u64,
                *lo,
                *hi,
                *zero_mean,
            );
            f.shift_assign(*shift);
            Ok(f)
        }
        IcConfig::Manufactured => {
            let exact = if config.model.is_coupled() {
                ExactSolution::coupled_default()
            } else {
                ExactSolution::scalar_default()
            };
            Ok(exact.field(grid, 0.0))
        }
        IcConfig::File { path } => crate::io::output::read_snapshot_on_grid(path, grid),
    }
}

fn grid_of(config: &RunConfig) -> Result<Arc<Grid>> {
    Grid::new(config.nx, config.ny, config.lx, config.ly)
}

fn run_options(config: &RunConfig, track_law: bool) -> RunOptions {
    RunOptions {
        record_every: config.record_every,
        track_law,
        snapshot_times: config.snapshot_times.clone(),
        snapshot_every: config.snapshot_every,
        rescue_substeps: config.rescue,
        semi_implicit_startup: false,
    }
}

fn ensure_output_dir(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::io(config.output_dir.clone(), e))?;
    let echo = config.output_dir.join("config_echo.cfg");
    fs::write(&echo, config.to_text()).map_err(|e| Error::io(echo.clone(), e))
}

/// Writes both the raw snapshot and a PGM preview for each named field.
fn snapshot_writer<'a>(
    config: &'a RunConfig,
    grid: &'a Arc<Grid>,
) -> impl FnMut(f64, &[(&str, &Field)]) -> Result<()> + 'a {
    let dir = config.output_dir.clone();
    let grid = Arc::clone(grid);
    move |t, fields| {
        for (name, field) in fields {
            let stem = format!("{name}_t{t:.6}");
            let header = SnapshotHeader {
                nx: grid.nx(),
                ny: grid.ny(),
                lx: grid.lx(),
                ly: grid.ly(),
                t,
                variable: name.to_string(),
            };
            write_snapshot(field, &header, &dir.join(format!("{stem}.f64")))?;
            write_pgm(field, &dir.join(format!("{stem}.pgm")))?;
        }
        Ok(())
    }
}

fn eta_range(trajectory: &Trajectory) -> (f64, f64) {
    trajectory
        .accepted()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.eta), hi.max(r.eta))
        })
}

/// Runs one simulation (fixed or adaptive) and writes `energy.csv` plus any
/// requested snapshots. Returns the trajectory and a summary line.
pub fn run_simulation(config: &RunConfig) -> Result<(Trajectory, String)> {
    ensure_output_dir(config)?;
    let grid = grid_of(config)?;
    let manufactured = matches!(config.ic, IcConfig::Manufactured);
    let opts = run_options(config, false);
    let eta_opts = EtaOptions::default();

    let trajectory = if let Some(model) = config.model.scalar_model() {
        let mut state = ScalarState::new(initial_field(config, &grid, 0)?);
        let forcing = ManufacturedScalar {
            model,
            exact: ExactSolution::scalar_default(),
        };
        let forcing_ref: Option<&dyn crate::models::ScalarForcing> =
            manufactured.then_some(&forcing as &dyn crate::models::ScalarForcing);
        let dt = match config.timing {
            Timing::Fixed { dt } => dt,
            _ => return Err(Error::Config("simulate requires a fixed `dt`".into())),
        };
        let mut sink = snapshot_writer(config, &grid);
        run_fixed_scalar(
            &mut state,
            &model,
            config.scheme.to_scalar(),
            dt,
            config.t_end,
            forcing_ref,
            &opts,
            &eta_opts,
            Some(&mut sink),
        )?
    } else {
        let model = config.model.coupled_model().expect("coupled");
        let u0 = initial_field(config, &grid, 0)?;
        let v0 = initial_field(config, &grid, 1)?;
        let mut state = CoupledState::new(u0, v0);
        let forcing = ManufacturedCoupled {
            model,
            exact: ExactSolution::coupled_default(),
        };
        let forcing_ref: Option<&dyn crate::models::CoupledForcing> =
            manufactured.then_some(&forcing as &dyn crate::models::CoupledForcing);
        let mut sink = snapshot_writer(config, &grid);
        match &config.timing {
            Timing::Fixed { dt } => run_fixed_coupled(
                &mut state,
                &model,
                config.scheme.to_coupled(),
                *dt,
                config.t_end,
                forcing_ref,
                &opts,
                &eta_opts,
                Some(&mut sink),
            )?,
            Timing::Adaptive(params) => run_adaptive(
                &mut state,
                &model,
                params,
                config.t_end,
                &opts,
                &eta_opts,
                Some(&mut sink),
            )?,
            Timing::Sweep => {
                return Err(Error::Config("simulate requires `dt` or an adaptive block".into()))
            }
        }
    };

    write_energy_csv(&trajectory, &config.output_dir.join("energy.csv"))?;
    let accepted = trajectory.accepted().count();
    let rejected = trajectory.records.len() - accepted;
    let (eta_lo, eta_hi) = eta_range(&trajectory);
    let last_energy = trajectory
        .accepted()
        .last()
        .map(|r| r.energy)
        .unwrap_or(f64::NAN);
    let mut summary = format!(
        "{} steps to t = {} (rejected {rejected}), final energy {last_energy:.6e}, eta in [{eta_lo:.4}, {eta_hi:.4}]",
        accepted, config.t_end
    );
    if trajectory.forced_accepts > 0 {
        summary.push_str(&format!(
            "; warning: {} step(s) force-accepted at dt_min",
            trajectory.forced_accepts
        ));
    }
    Ok((trajectory, summary))
}

/// Runs the convergence study for each scheme and writes one merged CSV in
/// the published-table layout.
pub fn run_accuracy(config: &RunConfig, schemes: &[SchemeName]) -> Result<(Vec<ConvergenceTable>, String)> {
    ensure_output_dir(config)?;
    if config.dt_list.is_empty() {
        return Err(Error::Config("accuracy runs need a `dt_list`".into()));
    }
    let grid = grid_of(config)?;
    let eta_opts = EtaOptions::default();
    let mut tables = Vec::new();
    for scheme in schemes {
        let table = if let Some(model) = config.model.scalar_model() {
            convergence_study_scalar(
                &grid,
                &model,
                &ExactSolution::scalar_default(),
                scheme.to_scalar(),
                &config.dt_list,
                config.t_end,
                &eta_opts,
            )?
        } else {
            let model = config.model.coupled_model().expect("coupled");
            convergence_study_coupled(
                &grid,
                &model,
                &ExactSolution::coupled_default(),
                scheme.to_coupled(),
                &config.dt_list,
                config.t_end,
                &eta_opts,
            )?
        };
        write_convergence_csv(
            &table,
            &config
                .output_dir
                .join(format!("accuracy_{}.csv", scheme.as_str())),
        )?;
        tables.push(table);
    }
    write_merged_accuracy_csv(&tables, &config.output_dir.join("accuracy.csv"))?;

    let mut parts = Vec::new();
    for t in &tables {
        let finest = t.rows.last().expect("nonempty table");
        let orders: Vec<String> = finest
            .orders
            .iter()
            .map(|o| o.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()))
            .collect();
        parts.push(format!(
            "{}: finest dt {:.3e} errors {:?} orders [{}]",
            t.scheme,
            finest.dt,
            finest.errors,
            orders.join(", ")
        ));
    }
    Ok((tables, parts.join("; ")))
}

fn write_merged_accuracy_csv(tables: &[ConvergenceTable], path: &Path) -> Result<()> {
    use std::io::Write;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    let mut header = String::from("dt");
    for t in tables {
        for v in &t.variables {
            header.push_str(&format!(",{}_{}_linf,{}_{}_order", t.scheme, v, t.scheme, v));
        }
    }
    writeln!(w, "{header}").map_err(io_err)?;
    let rows = tables.first().map(|t| t.rows.len()).unwrap_or(0);
    for i in 0..rows {
        let mut line = format!("{:.16e}", tables[0].rows[i].dt);
        for t in tables {
            let row = &t.rows[i];
            for (err, order) in row.errors.iter().zip(&row.orders) {
                line.push_str(&format!(",{err:.6e}"));
                match order {
                    Some(o) => line.push_str(&format!(",{o:.3}")),
                    None => line.push(','),
                }
            }
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// One fixed-step run per `dt_list` entry from the same seeded initial data;
/// writes one energy CSV per step size.
pub fn run_stab_sweep(config: &RunConfig) -> Result<(Vec<(f64, f64)>, String)> {
    ensure_output_dir(config)?;
    if config.dt_list.is_empty() {
        return Err(Error::Config("a step-size sweep needs a `dt_list`".into()));
    }
    let model = config
        .model
        .coupled_model()
        .ok_or_else(|| Error::Config("the step-size sweep drives the coupled model".into()))?;
    let grid = grid_of(config)?;
    let eta_opts = EtaOptions::default();
    let opts = run_options(config, false);

    let mut finals = Vec::new();
    for &dt in &config.dt_list {
        let u0 = initial_field(config, &grid, 0)?;
        let v0 = initial_field(config, &grid, 1)?;
        let mut state = CoupledState::new(u0, v0);
        let trajectory = run_fixed_coupled(
            &mut state,
            &model,
            config.scheme.to_coupled(),
            dt,
            config.t_end,
            None,
            &opts,
            &eta_opts,
            None,
        )
        .map_err(|e| Error::RunFailed {
            dt,
            source: Box::new(e),
        })?;
        write_energy_csv(
            &trajectory,
            &config.output_dir.join(format!("energy_dt{dt:e}.csv")),
        )?;
        finals.push((dt, model.total_energy(&state.u, &state.v)));
    }
    let listing: Vec<String> = finals
        .iter()
        .map(|(dt, e)| format!("dt {dt:e} -> E(T) = {e:.6e}"))
        .collect();
    Ok((finals, listing.join(", ")))
}

/// Entry point shared by the CLI subcommands and preset execution.
pub fn run_job(config: &RunConfig, job: &Job) -> Result<String> {
    match job {
        Job::Accuracy { schemes } => run_accuracy(config, schemes).map(|(_, s)| s),
        Job::Simulate => run_simulation(config).map(|(_, s)| s),
        Job::StabSweep => run_stab_sweep(config).map(|(_, s)| s),
    }
}

/// Output directory resolution for preset runs: flag > config default.
pub fn override_output_dir(config: &mut RunConfig, dir: Option<PathBuf>) {
    if let Some(dir) = dir {
        config.output_dir = dir;
    }
}

//! Command-line front end: accuracy studies, single simulations, adaptive
//! runs, and the named preset experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lagflow::io::config::{parse_config_with_overrides, RunConfig, SchemeName, Timing};
use lagflow::io::driver::{override_output_dir, run_job};
use lagflow::io::presets::{preset, Job, PRESET_NAMES};
use lagflow::Error;

#[derive(Parser)]
#[command(
    name = "lagflow",
    about = "Pseudo-spectral solvers for dissipative phase-field flows",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study against the manufactured solution (needs dt_list).
    Accuracy {
        #[arg(long)]
        config: PathBuf,
        /// Additional key=value overrides applied on top of the config.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Run both second-order schemes instead of the configured one.
        #[arg(long)]
        both_schemes: bool,
    },
    /// March one configured run (fixed step).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// March one configured run with the adaptive controller.
    Adaptive {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Run a named preset experiment.
    Preset {
        /// One of the built-in experiment names.
        name: String,
        /// Redirect outputs (defaults to the preset's own directory).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
}

fn read_config(path: &PathBuf, sets: &[String]) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    parse_config_with_overrides(&text, sets)
}

/// The number of worker threads requested via LAGFLOW_THREADS. Transforms
/// currently execute serially (any cap is honored; results are
/// bit-reproducible for every value), but the variable is validated here so
/// misconfigurations fail loudly.
fn validate_thread_env() -> Result<(), Error> {
    match std::env::var("LAGFLOW_THREADS") {
        Err(_) => Ok(()),
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(()),
            _ => Err(Error::Config(format!(
                "LAGFLOW_THREADS must be a positive integer, got `{v}`"
            ))),
        },
    }
}

fn run() -> Result<String, Error> {
    validate_thread_env()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Accuracy {
            config,
            sets,
            both_schemes,
        } => {
            let cfg = read_config(&config, &sets)?;
            let schemes = if both_schemes {
                vec![SchemeName::Bdf2, SchemeName::Cn]
            } else {
                vec![cfg.scheme]
            };
            let summary = run_job(&cfg, &Job::Accuracy { schemes })?;
            Ok(format!("accuracy: {summary}"))
        }
        Command::Simulate { config, sets } => {
            let cfg = read_config(&config, &sets)?;
            let summary = run_job(&cfg, &Job::Simulate)?;
            Ok(format!("simulate: {summary}"))
        }
        Command::Adaptive { config, sets } => {
            let cfg = read_config(&config, &sets)?;
            if !matches!(cfg.timing, Timing::Adaptive(_)) {
                return Err(Error::Config(
                    "the adaptive subcommand needs an `adaptive.*` block in the config".into(),
                ));
            }
            let summary = run_job(&cfg, &Job::Simulate)?;
            Ok(format!("adaptive: {summary}"))
        }
        Command::Preset {
            name,
            output_dir,
            sets,
        } => {
            let p = preset(&name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset `{name}`; valid names: {}",
                    PRESET_NAMES.join(", ")
                ))
            })?;
            let mut cfg = parse_config_with_overrides(&p.config, &sets)?;
            override_output_dir(&mut cfg, output_dir);
            let summary = run_job(&cfg, &p.job)?;
            Ok(format!("preset {name}: {summary}"))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_nonconvergence() {
                ExitCode::from(3)
            } else if matches!(e, Error::Config(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures surfaced by the solver suite.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("diagonal solve has a zero divisor at mode (kx={kx}, ky={ky})")]
    ZeroDivisor { kx: i64, ky: i64 },

    #[error(
        "multiplier equation did not converge after {iterations} iterations \
         (|residual| = {residual:.3e}); reduce the time step"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("multiplier iterate became non-finite at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },

    #[error("multiplier equation is inconsistent: the force terms vanish but the energy difference does not")]
    InconsistentEquation,

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("run with dt = {dt:.3e} failed: {source}")]
    RunFailed {
        dt: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot format error in {path}: {reason}")]
    SnapshotFormat { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn at_step(self, step: u64) -> Error {
        Error::StepFailed {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure is (or wraps) a multiplier non-convergence.
    pub fn is_nonconvergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. }
            | Error::NonFiniteIterate { .. }
            | Error::InconsistentEquation => true,
            Error::StepFailed { source, .. } | Error::RunFailed { source, .. } => {
                source.is_nonconvergence()
            }
            _ => false,
        }
    }
}

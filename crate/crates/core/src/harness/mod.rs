//! Experiment recipes, CSV output, aggregation and replay verification.

pub mod format;
pub mod replay;
pub mod run;
pub mod spec;

use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigLoadError;
use crate::icl::IclError;
use crate::ppo::{ParamFileError, PpoError};
use crate::world::EnvError;

pub use format::fmt_sig6;
pub use replay::{replay_dir, replay_files, replay_runs, ReplayReport, StepRow, SummaryRow};
pub use run::{
    aggregate, run_experiment, run_id, run_one, run_training, sweep_sensors, write_curve_csv, write_exchanges_jsonl,
    write_sensors_csv, write_steps_csv, write_summary_csv, write_sweep_csv, RunRecord, SweepRow, STEPS_HEADER,
};
pub use spec::{load_config, ExperimentSpec, PolicyKind};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Load { path: PathBuf, source: ConfigLoadError },
    #[error(transparent)]
    Config(#[from] ConfigLoadError),
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Params { path: PathBuf, source: ParamFileError },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Icl(#[from] IclError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error("replay divergence at step {step} (run {run_id}): {detail}")]
    ReplayDivergence { run_id: String, step: usize, detail: String },
}

impl HarnessError {
    /// 2 for I/O failures, 1 for everything the user can fix in the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } => 2,
            HarnessError::Params {
                source: ParamFileError::Io(_),
                ..
            } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}

//! Experiment harness: configuration files, baseline preparation, training
//! runs, evaluation, verification and plot export.

mod baseline;
mod evaluate;
mod plot;
mod training;
mod verify;


use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use baseline::{cmd_baseline, load_baseline, BaselineMeta, BASELINE_DIR};
pub use evaluate::{cmd_evaluate, evaluation_header, EvaluationResult};
pub use plot::{cmd_plot, PlotResult, PLOT_SERIES_HEADER};
pub use training::{
    cmd_train, detect_unlearning, learning_curve_header, SeedOutcome, TrainResult, MOVING_AVERAGE_WINDOW,
};
pub use verify::{cmd_verify, learning_smoke, CheckResult, VerifyOptions, VerifyReport, REFERENCE_CRITICAL_RA};

use crate::env::{EnvConfig, EnvError};
use crate::nets::{NetError, NetworkSpec};
use crate::ppo::{PpoError, PpoHyper};
use crate::solver::{SnapshotError, SolverConfig, SolverError};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{file}: {message}")]
    Schema { file: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Grad(#[from] crate::grad::GradError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Checkpoint(#[from] crate::nets::CheckpointError),
    #[error("plot rendering failed: {0}")]
    Plot(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LabError + '_ {
    move |source| LabError::Io { path: path.to_path_buf(), source }
}

/// Harness settings that are not part of any library module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    /// Episode budget per seed.
    pub episodes: usize,
    pub out_dir: PathBuf,
    /// Uncontrolled simulation length before control starts.
    pub baseline_horizon: f64,
    /// Trailing window over which the baseline Nusselt number is averaged.
    pub baseline_average_window: f64,
    pub baseline_seed: u64,
    pub baseline_amplitude: f64,
    pub checkpoint_every: usize,
    pub record_wall_time: bool,
    /// Train seeds on separate threads.
    pub parallel_seeds: bool,
    /// Actuation indices after which evaluation writes field snapshots.
    pub snapshot_actuations: Vec<usize>,
    /// Also export evaluation snapshots as CSV.
    pub snapshot_csv: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1],
            episodes: 300,
            out_dir: PathBuf::from("runs/default"),
            baseline_horizon: 500.0,
            baseline_average_window: 100.0,
            baseline_seed: 0,
            baseline_amplitude: 0.1,
            checkpoint_every: 25,
            record_wall_time: false,
            parallel_seeds: false,
            snapshot_actuations: Vec::new(),
            snapshot_csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub solver: SolverConfig,
    pub env: EnvConfig,
    pub network: NetworkSpec,
    pub ppo: PpoHyper,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        self.solver.validate()?;
        self.env.validate()?;
        self.network.validate()?;
        self.ppo.validate()?;
        if self.env.n_segments > self.solver.nx {
            return Err(LabError::Config(format!(
                "{} segments do not fit on {} grid columns",
                self.env.n_segments, self.solver.nx
            )));
        }
        let r = &self.run;
        if !(r.baseline_horizon > 0.0 && r.baseline_average_window > 0.0 && r.baseline_average_window <= r.baseline_horizon) {
            return Err(LabError::Config("baseline window must be positive and no longer than the horizon".into()));
        }
        if !(r.baseline_amplitude >= 0.0 && r.baseline_amplitude.is_finite()) {
            return Err(LabError::Config("baseline_amplitude must be non-negative".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Learning-curve label of the configured architecture.
    pub fn variant(&self) -> String {
        let base = self.network.trunk.label();
        if self.env.pe_enabled {
            format!("PE-{base}")
        } else {
            base.to_string()
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), LabError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

//! Request and response bodies of the rbcflow job service.

use std::path::PathBuf;

use rbcflow_core::lab::{ExperimentConfig, LabError, VerifyOptions};
use rbcflow_core::nets::ActMode;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

/// Work the service can run. Paths are resolved by the server process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobRequest {
    Baseline {
        config: ExperimentConfig,
        out: PathBuf,
    },
    Train {
        config: ExperimentConfig,
        out: PathBuf,
    },
    Evaluate {
        config: ExperimentConfig,
        checkpoint: PathBuf,
        #[serde(default)]
        mode: ActMode,
        #[serde(default)]
        seed: u64,
        out: PathBuf,
    },
    Verify {
        config: ExperimentConfig,
        #[serde(default)]
        options: VerifyOptions,
        out: Option<PathBuf>,
    },
    Plot {
        runs: Vec<PathBuf>,
        out: PathBuf,
    },
}

impl JobRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Baseline { .. } => "baseline",
            Self::Train { .. } => "train",
            Self::Evaluate { .. } => "evaluate",
            Self::Verify { .. } => "verify",
            Self::Plot { .. } => "plot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl JobStatus {
    pub fn finished(self) -> bool {
        matches!(self, Self::Succeeded | Self::Failed)
    }
}

/// Usage problems (bad input, missing prerequisites) versus failures while running.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobError {
    pub kind: ErrorKind,
    pub message: String,
}

impl From<&LabError> for JobError {
    fn from(e: &LabError) -> Self {
        let kind = match e {
            LabError::Usage(_) | LabError::Config(_) | LabError::Schema { .. } => ErrorKind::Usage,
            _ => ErrorKind::Failure,
        };
        Self { kind, message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInfo {
    pub id: Uuid,
    pub kind: String,
    pub status: JobStatus,
    /// Command output (baseline metadata, train summary, evaluation or
    /// verification report, plot file list) once succeeded.
    pub result: Option<serde_json::Value>,
    pub error: Option<JobError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
}

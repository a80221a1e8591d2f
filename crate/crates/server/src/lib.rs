//! HTTP/JSON job service. Each submitted command runs on the blocking pool;
//! clients poll the job until it finishes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rbcflow_api::{ApiError, Health, JobError, JobInfo, JobRequest, JobStatus};
use rbcflow_core::lab::{self, LabError};
use tokio::net::TcpListener;
use uuid::Uuid;

#[derive(Default)]
struct Jobs {
    order: Vec<Uuid>,
    by_id: HashMap<Uuid, JobInfo>,
}

#[derive(Clone, Default)]
pub struct AppState {
    jobs: Arc<Mutex<Jobs>>,
}

impl AppState {
    fn update(&self, id: Uuid, f: impl FnOnce(&mut JobInfo)) {
        if let Some(job) = self.jobs.lock().expect("job table poisoned").by_id.get_mut(&id) {
            f(job);
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("result serializes")
}

/// Run one command to completion on the calling thread.
pub fn run_job(request: &JobRequest) -> Result<serde_json::Value, LabError> {
    match request {
        JobRequest::Baseline { config, out } => lab::cmd_baseline(config, out).map(|r| to_json(&r)),
        JobRequest::Train { config, out } => lab::cmd_train(config, out).map(|r| to_json(&r)),
        JobRequest::Evaluate { config, checkpoint, mode, seed, out } => {
            lab::cmd_evaluate(config, checkpoint, *mode, *seed, out).map(|r| to_json(&r))
        }
        JobRequest::Verify { config, options, out } => {
            lab::cmd_verify(config, options, out.as_deref()).map(|r| to_json(&r))
        }
        JobRequest::Plot { runs, out } => lab::cmd_plot(runs, out).map(|r| to_json(&r)),
    }
}

fn api_error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ApiError { error: message.into() })).into_response()
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

async fn submit(State(state): State<AppState>, body: Result<Json<JobRequest>, JsonRejection>) -> Response {
    let request = match body {
        Ok(Json(r)) => r,
        Err(e) => return api_error(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()),
    };
    let id = Uuid::new_v4();
    let info = JobInfo { id, kind: request.kind().into(), status: JobStatus::Queued, result: None, error: None };
    {
        let mut jobs = state.jobs.lock().expect("job table poisoned");
        jobs.order.push(id);
        jobs.by_id.insert(id, info.clone());
    }
    tracing::info!(%id, kind = request.kind(), "job submitted");
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        worker.update(id, |j| j.status = JobStatus::Running);
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run_job(&request)));
        worker.update(id, |j| match outcome {
            Ok(Ok(value)) => {
                j.status = JobStatus::Succeeded;
                j.result = Some(value);
            }
            Ok(Err(e)) => {
                j.status = JobStatus::Failed;
                j.error = Some(JobError::from(&e));
            }
            Err(_) => {
                j.status = JobStatus::Failed;
                j.error = Some(JobError { kind: rbcflow_api::ErrorKind::Failure, message: "job panicked".into() });
            }
        });
        tracing::info!(%id, "job finished");
    });
    (StatusCode::ACCEPTED, Json(info)).into_response()
}

async fn list(State(state): State<AppState>) -> Json<Vec<JobInfo>> {
    let jobs = state.jobs.lock().expect("job table poisoned");
    Json(jobs.order.iter().map(|id| jobs.by_id[id].clone()).collect())
}

async fn status(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Ok(id) = Uuid::parse_str(&id) else {
        return api_error(StatusCode::BAD_REQUEST, format!("malformed job id {id}"));
    };
    match state.jobs.lock().expect("job table poisoned").by_id.get(&id) {
        Some(job) => Json(job.clone()).into_response(),
        None => api_error(StatusCode::NOT_FOUND, format!("no job {id}")),
    }
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/jobs", post(submit).get(list))
        .route("/v1/jobs/{id}", get(status))
        .with_state(AppState::default())
}

pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

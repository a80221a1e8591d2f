use std::time::Duration;

use rbcflow_api::{ErrorKind, JobRequest, JobStatus};
use rbcflow_client::{Client, ClientError};
use rbcflow_core::lab::{BaselineMeta, ExperimentConfig};

async fn start() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(rbcflow_server::serve(listener));
    Client::new(format!("http://{addr}"))
}

fn tiny() -> ExperimentConfig {
    ExperimentConfig::from_toml(
        r#"
[solver]
nx = 20
ny = 17
dt = 0.01
rayleigh = 1000.0

[env]
action_duration = 0.5
probe_columns = 8

[run]
baseline_horizon = 20.0
baseline_average_window = 5.0
"#,
    )
    .unwrap()
}

#[tokio::test]
async fn health_reports_ok() {
    let client = start().await;
    let h = client.health().await.unwrap();
    assert_eq!(h.status, "ok");
}

#[tokio::test]
async fn baseline_job_runs_to_completion() {
    let client = start().await;
    let dir = tempfile::tempdir().unwrap();
    let request = JobRequest::Baseline { config: tiny(), out: dir.path().to_path_buf() };
    let job = client.submit(&request).await.unwrap();
    assert_eq!(job.kind, "baseline");
    let done = client.wait(job.id, Duration::from_millis(20)).await.unwrap();
    assert_eq!(done.status, JobStatus::Succeeded, "{:?}", done.error);
    let meta: BaselineMeta = serde_json::from_value(done.result.unwrap()).unwrap();
    assert!((meta.nu_base - 1.0).abs() < 0.01);
    assert!(dir.path().join("baseline/snapshot.bin").exists());
    let listed = client.jobs().await.unwrap();
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0].id, job.id);
}

#[tokio::test]
async fn usage_errors_are_classified() {
    let client = start().await;
    let dir = tempfile::tempdir().unwrap();
    let request = JobRequest::Train { config: tiny(), out: dir.path().to_path_buf() };
    let done = client.run(&request, Duration::from_millis(20)).await.unwrap();
    assert_eq!(done.status, JobStatus::Failed);
    let err = done.error.unwrap();
    assert_eq!(err.kind, ErrorKind::Usage);
    assert!(err.message.contains("baseline"));
}

#[tokio::test]
async fn unknown_and_malformed_requests() {
    let client = start().await;
    match client.job(uuid::Uuid::nil()).await {
        Err(ClientError::Server { status, .. }) => assert_eq!(status, 404),
        other => panic!("unexpected {other:?}"),
    }
    let raw = reqwest::Client::new()
        .post(format!("{}/v1/jobs", client.base_url()))
        .header("content-type", "application/json")
        .body(r#"{"kind":"launch"}"#)
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status().as_u16(), 422);
    let body: rbcflow_api::ApiError = raw.json().await.unwrap();
    assert!(!body.error.is_empty());
}

//! Thin async client for the rbcflow job service.

use std::time::Duration;

pub use rbcflow_api as api;
use rbcflow_api::{ApiError, Health, JobInfo, JobRequest};
use uuid::Uuid;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request to {url} failed: {source}")]
    Transport { url: String, source: reqwest::Error },
    #[error("server returned {status}: {message}")]
    Server { status: u16, message: String },
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        Self { base, http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: serde::de::DeserializeOwned>(&self, url: &str, resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            let message = serde_json::from_str::<ApiError>(&text).map(|e| e.error).unwrap_or(text);
            return Err(ClientError::Server { status: status.as_u16(), message });
        }
        resp.json().await.map_err(|source| ClientError::Transport { url: url.into(), source })
    }

    async fn get<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let url = format!("{}{path}", self.base);
        let resp = self.http.get(&url).send().await.map_err(|source| ClientError::Transport { url: url.clone(), source })?;
        self.decode(&url, resp).await
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.get("/health").await
    }

    pub async fn submit(&self, request: &JobRequest) -> Result<JobInfo, ClientError> {
        let url = format!("{}/v1/jobs", self.base);
        let resp = self
            .http
            .post(&url)
            .json(request)
            .send()
            .await
            .map_err(|source| ClientError::Transport { url: url.clone(), source })?;
        self.decode(&url, resp).await
    }

    pub async fn job(&self, id: Uuid) -> Result<JobInfo, ClientError> {
        self.get(&format!("/v1/jobs/{id}")).await
    }

    pub async fn jobs(&self) -> Result<Vec<JobInfo>, ClientError> {
        self.get("/v1/jobs").await
    }

    /// Poll until the job succeeds or fails.
    pub async fn wait(&self, id: Uuid, poll: Duration) -> Result<JobInfo, ClientError> {
        loop {
            let job = self.job(id).await?;
            if job.status.finished() {
                return Ok(job);
            }
            tokio::time::sleep(poll).await;
        }
    }

    /// Submit and wait.
    pub async fn run(&self, request: &JobRequest, poll: Duration) -> Result<JobInfo, ClientError> {
        let job = self.submit(request).await?;
        self.wait(job.id, poll).await
    }
}

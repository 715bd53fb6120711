//! Thin async client for the packed-inference service.

use std::time::Duration;

use packhe::wire::{
    CompareRequest, CompareResponse, ErrorBody, InferRequest, InferResponse, MatMulRequest, MatMulResponse,
};
use packhe::{BackendParams, ErrorKind};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),

    #[error("service error ({status}): {}", body.message)]
    Service { status: u16, body: ErrorBody },
}

impl ClientError {
    /// Transport failures count as I/O.
    pub fn kind(&self) -> ErrorKind {
        match self {
            ClientError::Transport(_) => ErrorKind::Io,
            ClientError::Service { body, .. } => body.kind,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` like `http://127.0.0.1:8080`. Requests never time out:
    /// interleaved runs of the large profiles take a long time.
    pub fn new(base: impl Into<String>) -> Result<Self> {
        let http = reqwest::Client::builder().connect_timeout(Duration::from_secs(10)).build()?;
        Ok(Client { base: base.into().trim_end_matches('/').to_string(), http })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str(&text)
            .unwrap_or(ErrorBody { kind: ErrorKind::Internal, message: text });
        Err(ClientError::Service { status: status.as_u16(), body })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        Self::decode(self.http.get(format!("{}{path}", self.base)).send().await?).await
    }

    async fn post<Q: Serialize, T: DeserializeOwned>(&self, path: &str, body: &Q) -> Result<T> {
        Self::decode(self.http.post(format!("{}{path}", self.base)).json(body).send().await?).await
    }

    pub async fn health(&self) -> Result<String> {
        self.get("/health").await
    }

    pub async fn profiles(&self) -> Result<Vec<BackendParams>> {
        self.get("/v1/profiles").await
    }

    pub async fn infer(&self, req: &InferRequest) -> Result<InferResponse> {
        self.post("/v1/infer", req).await
    }

    pub async fn compare(&self, req: &CompareRequest) -> Result<CompareResponse> {
        self.post("/v1/compare", req).await
    }

    pub async fn matmul(&self, req: &MatMulRequest) -> Result<MatMulResponse> {
        self.post("/v1/matmul", req).await
    }
}

//! HTTP/JSON front for the packed-inference engine.
//!
//! | route            | body                | reply                |
//! |------------------|---------------------|----------------------|
//! | `GET /health`    |                     | `"ok"`               |
//! | `GET /v1/profiles` |                   | list of parameters   |
//! | `POST /v1/infer` | [`InferRequest`]    | [`InferResponse`]    |
//! | `POST /v1/compare` | [`CompareRequest`] | [`CompareResponse`] |
//! | `POST /v1/matmul` | [`MatMulRequest`]  | [`MatMulResponse`]   |
//!
//! Failures reply with an [`ErrorBody`]. Evaluation runs on a dedicated
//! rayon pool, off the async runtime.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use packhe::wire::{CompareRequest, ErrorBody, InferRequest, MatMulRequest};
use packhe::{BackendParams, Error, ErrorKind, Profiles};
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub mod ops;

pub use ops::Engine;

/// Large enough for evaluation keys and interleaved images of the big
/// profiles.
pub const BODY_LIMIT: usize = 4 << 30;

pub struct AppState {
    engine: Engine,
    pool: rayon::ThreadPool,
}

impl AppState {
    /// `threads == 0` lets rayon pick.
    pub fn new(profiles: Profiles, threads: usize) -> std::io::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("packhe-eval-{i}"))
            .build()
            .map_err(std::io::Error::other)?;
        Ok(AppState { engine: Engine::new(profiles), pool })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }
}

pub struct ApiError(ErrorBody);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(ErrorBody::from(&e))
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(ErrorBody { kind: ErrorKind::Invalid, message: e.body_text() })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.kind {
            ErrorKind::Capacity => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Invalid => StatusCode::BAD_REQUEST,
            ErrorKind::Io | ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.0)).into_response()
    }
}

type Reply<T> = Result<Json<T>, ApiError>;

async fn run<T, F>(state: Arc<AppState>, f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> packhe::Result<T> + Send + 'static,
{
    let joined = tokio::task::spawn_blocking(move || state.pool.install(|| f(&state.engine))).await;
    match joined {
        Ok(result) => Ok(Json(result?)),
        Err(e) => Err(ApiError(ErrorBody { kind: ErrorKind::Internal, message: e.to_string() })),
    }
}

async fn health() -> Json<&'static str> {
    Json("ok")
}

async fn profiles(State(state): State<Arc<AppState>>) -> Json<Vec<BackendParams>> {
    Json(state.engine.profiles().iter().cloned().collect())
}

async fn infer(
    State(state): State<Arc<AppState>>,
    body: Result<Json<InferRequest>, JsonRejection>,
) -> Reply<impl Serialize> {
    let Json(req) = body?;
    tracing::info!(profile = %req.profile, backend = %req.backend, packing = %req.packing, "infer");
    run(state, move |e| e.infer(&req)).await
}

async fn compare(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CompareRequest>, JsonRejection>,
) -> Reply<impl Serialize> {
    let Json(req) = body?;
    tracing::info!(profile = %req.profile, estimate_only = req.estimate_only, "compare");
    run(state, move |e| e.compare(&req)).await
}

async fn matmul(
    State(state): State<Arc<AppState>>,
    body: Result<Json<MatMulRequest>, JsonRejection>,
) -> Reply<impl Serialize> {
    let Json(req) = body?;
    tracing::info!(profile = %req.profile, backend = %req.backend, "matmul");
    run(state, move |e| e.matmul(&req)).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/profiles", get(profiles))
        .route("/v1/infer", post(infer))
        .route("/v1/compare", post(compare))
        .route("/v1/matmul", post(matmul))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `addr` and serves in a background task. Returns the bound
/// address, which differs from `addr` when port 0 was asked for.
pub async fn spawn(addr: SocketAddr, state: AppState) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(serve(listener, Arc::new(state)));
    Ok((local, handle))
}

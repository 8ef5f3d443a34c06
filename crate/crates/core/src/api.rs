//! Stateless HTTP/JSON facade over the built-in datasets and the scenario
//! runner.
//!
//! Every response body that carries a result is produced by
//! [`report::execute`](crate::report::execute) with JSON output, so it is
//! byte-identical to what the CLI prints for the same spec.

use std::net::SocketAddr;

use axum::body::to_bytes;
use axum::extract::{Path, Request};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::error::Category;
use tower_http::cors::CorsLayer;

use crate::dataset::{builtin, builtin_ids};
use crate::error::{Error, Violation};
use crate::report::{execute, to_json, Experiment, Format};
use crate::scenario::{DatasetRef, ScenarioSpec};

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    ValidationFailed,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::ValidationFailed => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    /// Offending field paths, when the error can be pinned to fields.
    pub details: Vec<Violation>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            details: Vec::new(),
        }
    }

    fn with_details(mut self, details: Vec<Violation>) -> Self {
        self.details = details;
        self
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        if err.is_validation() {
            let details = err.violations().to_vec();
            ApiError::new(ErrorCode::ValidationFailed, err.to_string()).with_details(details)
        } else {
            log::error!("evaluation failed: {err}");
            ApiError::new(ErrorCode::Internal, err.to_string())
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = to_json(&self).unwrap_or_else(|_| String::from("{}\n"));
        (self.code.status(), json_headers(), body).into_response()
    }
}

fn json_headers() -> [(header::HeaderName, &'static str); 1] {
    [(header::CONTENT_TYPE, "application/json")]
}

fn json(body: String) -> Response {
    (StatusCode::OK, json_headers(), body).into_response()
}

pub fn router() -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/datasets", get(list_datasets))
        .route("/api/v1/datasets/{id}", get(get_dataset))
        .route("/api/v1/scenarios:run", post(run_scenario))
        .route("/api/v1/sweeps", post(run_sweep))
        .route("/api/v1/price-tables", post(run_price_table))
        .route("/api/v1/timing", post(run_timing))
        .route("/api/v1/comparisons", post(run_comparison))
        .fallback(not_found)
        .layer(CorsLayer::permissive())
}

async fn healthz() -> Response {
    json("{\"status\":\"ok\"}".into())
}

async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

async fn list_datasets() -> Result<Response, ApiError> {
    Ok(json(to_json(&builtin_ids()).map_err(ApiError::from)?))
}

async fn get_dataset(Path(id): Path<String>) -> Result<Response, ApiError> {
    let ds = builtin(&id)
        .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("unknown dataset `{id}`")))?;
    Ok(json(ds.to_json()?))
}

async fn run_scenario(req: Request) -> Result<Response, ApiError> {
    evaluate(Experiment::Run, req).await
}

async fn run_sweep(req: Request) -> Result<Response, ApiError> {
    evaluate(Experiment::Sweep, req).await
}

async fn run_price_table(req: Request) -> Result<Response, ApiError> {
    evaluate(Experiment::PriceTable, req).await
}

async fn run_timing(req: Request) -> Result<Response, ApiError> {
    evaluate(Experiment::Timing, req).await
}

async fn run_comparison(req: Request) -> Result<Response, ApiError> {
    evaluate(Experiment::Compare, req).await
}

fn require_json(headers: &HeaderMap) -> Result<(), ApiError> {
    let ok = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .is_some_and(|v| v.trim().eq_ignore_ascii_case("application/json"));
    if ok {
        Ok(())
    } else {
        Err(ApiError::new(
            ErrorCode::BadRequest,
            "content-type must be application/json",
        ))
    }
}

async fn read_spec(req: Request) -> Result<ScenarioSpec, ApiError> {
    require_json(req.headers())?;
    let bytes = to_bytes(req.into_body(), MAX_BODY_BYTES)
        .await
        .map_err(|_| {
            ApiError::new(
                ErrorCode::ValidationFailed,
                format!("request body exceeds {MAX_BODY_BYTES} bytes"),
            )
        })?;
    let spec: ScenarioSpec = serde_json::from_slice(&bytes).map_err(|e| {
        let code = match e.classify() {
            Category::Data => ErrorCode::ValidationFailed,
            _ => ErrorCode::BadRequest,
        };
        ApiError::new(code, format!("scenario body: {e}"))
    })?;
    if let DatasetRef::Named(name) = &spec.dataset {
        // Only built-ins and bare names from the dataset directory; the
        // server never opens client-chosen file paths.
        if builtin(name).is_none()
            && (name.contains(['/', '\\']) || name.starts_with('.'))
        {
            return Err(ApiError::new(
                ErrorCode::ValidationFailed,
                format!("dataset `{name}` is not available on this server"),
            )
            .with_details(vec![Violation::new(
                "dataset",
                "file paths are not accepted over HTTP",
            )]));
        }
    }
    Ok(spec)
}

async fn evaluate(experiment: Experiment, req: Request) -> Result<Response, ApiError> {
    let spec = read_spec(req).await?;
    let body = tokio::task::spawn_blocking(move || execute(experiment, &spec, Format::Json))
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, format!("evaluation task failed: {e}")))??;
    Ok(json(body))
}

/// Serves the API until the process is stopped.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router()).await
}

//! HTTP facade over the pipeline and decision engine.
//!
//! Routes: `POST /v1/values`, `POST /v1/decide`, `POST /v1/explain`,
//! `GET /healthz`. Success bodies are the library results serialized with
//! `serde_json::to_string`. Errors are `{"error": ..., "code": ...}`.

mod config;

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use kaleido_core::decision::{decide, WeightOverrides};
use kaleido_core::{Backend, Error, Pipeline, ScoredCandidate, SystemParams, ValueEntry, ValueKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use config::{ServiceConfig, BACKEND_URL_ENV};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub code: String,
}

#[derive(Debug)]
pub struct Failure {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Failure {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::Backend(_) | Error::EmptyExplanation => (StatusCode::BAD_GATEWAY, "backend_error"),
            Error::InvalidParams { .. } => (StatusCode::BAD_REQUEST, "invalid_params"),
            Error::NoEffectiveEvidence => (StatusCode::BAD_REQUEST, "no_effective_evidence"),
            Error::InvalidInput(_) | Error::DegenerateDistribution | Error::Codec(_) => {
                (StatusCode::BAD_REQUEST, "invalid_input")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Failure::new(status, code, e.to_string())
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let body = serde_json::to_string(&ApiError {
            error: self.message,
            code: self.code.to_string(),
        })
        .expect("error body serializes");
        json_response(self.status, body)
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response()
}

#[derive(Clone)]
pub struct AppState {
    backend: Arc<dyn Backend>,
    params: SystemParams,
    timeout: Duration,
    permits: Arc<Semaphore>,
}

impl AppState {
    pub fn new(backend: Arc<dyn Backend>, params: SystemParams, timeout: Duration, max_concurrent: usize) -> Self {
        AppState {
            backend,
            params,
            timeout,
            permits: Arc::new(Semaphore::new(max_concurrent.max(1))),
        }
    }

    pub fn from_config(cfg: &ServiceConfig) -> kaleido_core::Result<Self> {
        cfg.validate()?;
        Ok(AppState::new(cfg.backend.connect()?, cfg.params, cfg.request_timeout(), cfg.max_concurrent))
    }

    /// Run blocking work under the concurrency bound and request timeout.
    async fn run<T, F>(&self, work: F) -> Result<T, Failure>
    where
        T: Send + 'static,
        F: FnOnce(Arc<dyn Backend>) -> kaleido_core::Result<T> + Send + 'static,
    {
        let _permit = self
            .permits
            .clone()
            .acquire_owned()
            .await
            .map_err(|_| Failure::new(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "service is shutting down"))?;
        let backend = self.backend.clone();
        let task = tokio::task::spawn_blocking(move || work(backend));
        match tokio::time::timeout(self.timeout, task).await {
            Err(_) => Err(Failure::new(StatusCode::GATEWAY_TIMEOUT, "timeout", "request timed out")),
            Ok(Err(join)) => Err(Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", join.to_string())),
            Ok(Ok(result)) => result.map_err(Failure::from),
        }
    }
}

fn parse_json(body: &Bytes) -> Result<Value, Failure> {
    serde_json::from_slice(body).map_err(|e| Failure::new(StatusCode::BAD_REQUEST, "bad_json", e.to_string()))
}

fn field<T: for<'de> Deserialize<'de>>(v: &Value, name: &str, code: &'static str) -> Result<Option<T>, Failure> {
    match v.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(raw) => serde_json::from_value(raw.clone())
            .map(Some)
            .map_err(|e| Failure::new(StatusCode::BAD_REQUEST, code, format!("{name}: {e}"))),
    }
}

fn required_action(v: &Value) -> Result<String, Failure> {
    match v.get("action") {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
        _ => Err(Failure::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "empty_action",
            "action must be a non-empty string",
        )),
    }
}

fn to_body<T: Serialize>(value: &T) -> Result<Response, Failure> {
    let body = serde_json::to_string(value)
        .map_err(|e| Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    Ok(json_response(StatusCode::OK, body))
}

async fn values(State(state): State<AppState>, body: Bytes) -> Result<Response, Failure> {
    let v = parse_json(&body)?;
    if !v.is_object() {
        return Err(Failure::new(StatusCode::BAD_REQUEST, "bad_json", "request body must be an object"));
    }
    let action = required_action(&v)?;
    let params: SystemParams = field(&v, "params", "invalid_params")?.unwrap_or(state.params);
    params.validate().map_err(Failure::from)?;
    let out = state
        .run(move |b| Pipeline::new(&b).generate_values(&action, &params))
        .await?;
    to_body(&out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecideRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub candidates: Vec<ScoredCandidate>,
    #[serde(default)]
    pub weights: WeightOverrides,
    #[serde(default)]
    pub binary: bool,
}

async fn decide_route(body: Bytes) -> Result<Response, Failure> {
    let v = parse_json(&body)?;
    let req: DecideRequest =
        serde_json::from_value(v).map_err(|e| Failure::new(StatusCode::BAD_REQUEST, "invalid_input", e.to_string()))?;
    let result = decide(&req.candidates, &req.weights, req.binary)?;
    to_body(&result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainResponse {
    pub explanation: String,
}

async fn explain(State(state): State<AppState>, body: Bytes) -> Result<Response, Failure> {
    let v = parse_json(&body)?;
    let action = required_action(&v)?;
    let kind: ValueKind = field(&v, "kind", "invalid_input")?
        .ok_or_else(|| Failure::new(StatusCode::BAD_REQUEST, "invalid_input", "kind is required"))?;
    let text: String = field(&v, "text", "invalid_input")?.unwrap_or_default();
    let entry = ValueEntry::new(kind, text)?;
    let explanation = state
        .run(move |b| Pipeline::new(&b).explain(&action, &entry))
        .await?;
    to_body(&ExplainResponse { explanation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub backend: String,
}

async fn healthz(State(state): State<AppState>) -> Response {
    let backend = state.backend.clone();
    let mode = backend.mode().as_str().to_string();
    let ok = tokio::time::timeout(state.timeout, tokio::task::spawn_blocking(move || backend.health()))
        .await
        .map(|r| matches!(r, Ok(Ok(()))))
        .unwrap_or(false);
    let (status, word) = if ok {
        (StatusCode::OK, "ok")
    } else {
        (StatusCode::SERVICE_UNAVAILABLE, "unavailable")
    };
    let body = serde_json::to_string(&Health {
        status: word.to_string(),
        backend: mode,
    })
    .expect("health serializes");
    json_response(status, body)
}

fn cors(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE]),
    )
}

pub fn router(state: AppState, cors_origins: &[String]) -> Router {
    let app = Router::new()
        .route("/v1/values", post(values))
        .route("/v1/decide", post(decide_route))
        .route("/v1/explain", post(explain))
        .route("/healthz", get(healthz))
        .with_state(state);
    match cors(cors_origins) {
        Some(layer) => app.layer(layer),
        None => app,
    }
}

/// Bind and serve until `shutdown` resolves.
pub async fn serve(cfg: ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), BoxError> {
    let state = AppState::from_config(&cfg)?;
    let app = router(state, &cfg.cors_origins);
    let listener = tokio::net::TcpListener::bind(&cfg.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

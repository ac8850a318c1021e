//! HTTP JSON API over the analysis pipeline.
//!
//! | method | path            | body                  |
//! |--------|-----------------|-----------------------|
//! | GET    | `/api/datasets` |                       |
//! | POST   | `/api/analyze`  | [`AnalyzeRequest`]    |
//! | GET    | `/health`       |                       |
//!
//! Thresholds are not part of the API. Every test against a threshold needs
//! only the returned intervals, so clients apply them locally.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use contra_core::analysis::{DEFAULT_SAMPLES, MIN_SAMPLES};
use contra_core::data::{records_from_raw, RawRecord, RowError, BUNDLED_NAMES};
use contra_core::report::{Precision, Report};
use contra_core::{analyze, bundled_dataset, AnalysisConfig, Dataset, SignView, Warning};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

/// Upper bound on `samples` per request.
pub const MAX_SAMPLES: usize = 10_000_000;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Datasets the service can analyze by name.
#[derive(Debug, Clone, Default)]
pub struct AppState {
    pub registry: Arc<Vec<Dataset>>,
}

impl AppState {
    pub fn new(datasets: Vec<Dataset>) -> Self {
        Self {
            registry: Arc::new(datasets),
        }
    }

    /// The bundled tpc and plaque tables.
    pub fn bundled() -> Self {
        Self::new(
            BUNDLED_NAMES
                .iter()
                .map(|n| bundled_dataset(n).expect("bundled data parses"))
                .collect(),
        )
    }

    fn dataset(&self, name: &str) -> Option<&Dataset> {
        self.registry.iter().find(|d| d.name == name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Allowed CORS origin; any origin when `None`.
    pub cors_origin: Option<String>,
    /// Directory of static UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub records: usize,
}

/// Either `dataset` or `records` must be given.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    #[serde(default)]
    pub dataset: Option<String>,
    /// Inline study rows using the CSV column names as keys.
    #[serde(default)]
    pub records: Option<Vec<serde_json::Value>>,
    #[serde(default)]
    pub samples: Option<usize>,
    /// Drawn at random (and returned) when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sign: Option<SignView>,
    #[serde(default)]
    pub full_precision: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WarningReport {
    #[serde(flatten)]
    pub warning: Warning,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeResponse {
    #[serde(flatten)]
    pub report: Report,
    pub warnings: Vec<WarningReport>,
    pub timing_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    /// Malformed or invalid inline records.
    #[error("invalid records")]
    InvalidRecords(Vec<RowError>),
    #[error("{0}")]
    BadRequest(String),
    /// Well-formed request with unusable parameters.
    #[error("{0}")]
    Unprocessable(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: String,
    #[serde(skip_serializing_if = "<[RowError]>::is_empty")]
    errors: &'a [RowError],
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::InvalidRecords(_) | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let errors = match &self {
            ApiError::InvalidRecords(e) => e.as_slice(),
            _ => &[],
        };
        let body = ErrorBody {
            error: self.to_string(),
            errors,
        };
        (status, Json(body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/datasets", get(list_datasets))
        .route("/api/analyze", post(run_analysis))
        .route("/health", get(health))
        .with_state(state)
}

/// [`router`] plus CORS and, optionally, the static UI bundle.
pub fn app(state: AppState, opts: &ServeOptions) -> Router {
    let origin = match opts.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(o)) => AllowOrigin::exact(o),
        _ => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods(tower_http::cors::Any)
        .allow_headers(tower_http::cors::Any);
    let mut app = router(state);
    if let Some(dir) = &opts.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(cors)
}

/// Serves until `shutdown` resolves, then stops accepting connections and
/// drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    opts: ServeOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app(state, &opts))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves; see [`serve`].
pub async fn bind_and_serve(
    addr: SocketAddr,
    state: AppState,
    opts: ServeOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    serve(TcpListener::bind(addr).await?, state, opts, shutdown).await
}

async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetInfo>> {
    Json(
        state
            .registry
            .iter()
            .map(|d| DatasetInfo {
                name: d.name.clone(),
                records: d.len(),
            })
            .collect(),
    )
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: VERSION.into(),
    })
}

fn inline_dataset(values: Vec<serde_json::Value>) -> Result<Dataset, ApiError> {
    let mut errors = Vec::new();
    let mut raw = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        match serde_json::from_value::<RawRecord>(v) {
            Ok(r) => raw.push(r),
            Err(e) => errors.push(RowError {
                row: i + 1,
                field: "record".into(),
                message: e.to_string(),
            }),
        }
    }
    if !errors.is_empty() {
        return Err(ApiError::InvalidRecords(errors));
    }
    records_from_raw("inline", raw).map_err(|r| ApiError::InvalidRecords(r.errors))
}

/// Resolves the request into a dataset and configuration without running it.
pub fn prepare(
    state: &AppState,
    req: AnalyzeRequest,
) -> Result<(Dataset, AnalysisConfig, Precision), ApiError> {
    let samples = req.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples < MIN_SAMPLES {
        return Err(ApiError::Unprocessable(format!(
            "K below minimum: {samples} samples requested, at least {MIN_SAMPLES} required"
        )));
    }
    if samples > MAX_SAMPLES {
        return Err(ApiError::Unprocessable(format!(
            "K above maximum: {samples} samples requested, at most {MAX_SAMPLES} allowed"
        )));
    }
    let dataset = match (req.dataset, req.records) {
        (Some(_), Some(_)) => {
            return Err(ApiError::Unprocessable(
                "give either `dataset` or `records`, not both".into(),
            ))
        }
        (None, None) => {
            return Err(ApiError::Unprocessable(
                "one of `dataset` or `records` is required".into(),
            ))
        }
        (Some(name), None) => state
            .dataset(&name)
            .cloned()
            .ok_or_else(|| ApiError::Unprocessable(format!("unknown dataset `{name}`")))?,
        (None, Some(values)) => inline_dataset(values)?,
    };
    let mut config = AnalysisConfig::new(samples, req.seed.unwrap_or_else(rand::random));
    config.sign_view = req.sign;
    let precision = if req.full_precision {
        Precision::Full
    } else {
        Precision::Significant6
    };
    Ok((dataset, config, precision))
}

async fn run_analysis(
    State(state): State<AppState>,
    body: Result<Json<AnalyzeRequest>, JsonRejection>,
) -> Result<Json<AnalyzeResponse>, ApiError> {
    let Json(req) = body.map_err(|e| match e {
        JsonRejection::JsonDataError(e) => ApiError::Unprocessable(e.body_text()),
        other => ApiError::BadRequest(other.body_text()),
    })?;
    let (dataset, config, precision) = prepare(&state, req)?;
    let started = Instant::now();
    let result = tokio::task::spawn_blocking(move || analyze(&dataset, &config))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| match e {
            contra_core::Error::DegenerateDraws { .. } | contra_core::Error::InvalidArgument(_) => {
                ApiError::Unprocessable(e.to_string())
            }
            other => ApiError::Internal(other.to_string()),
        })?;
    let timing_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(Json(AnalyzeResponse {
        report: Report::new(&result, precision),
        warnings: result
            .warnings
            .iter()
            .map(|w| WarningReport {
                warning: w.clone(),
                message: w.to_string(),
            })
            .collect(),
        timing_ms,
    }))
}

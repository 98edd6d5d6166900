//! Command implementations behind the `mss` binary: the HTTP router over a
//! loaded artifact and the accuracy-benchmark configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mss_core::graph::{bucket_by_hour, parse_edge_stream, EdgeSchema};
use mss_core::oracle::{
    chance_level, run_accuracy_experiment, synth_dynamic_sbm, AccuracyTable, BenchMethod, ExperimentConfig, SbmConfig,
};
use mss_core::service::{AbstractRequest, ApiError, FilterRequest, KnnRequest, Service, SnapshotOptions};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

/// Wraps [`ApiError`] so it renders as a JSON body with its HTTP status.
pub struct ApiResponseError(pub ApiError);

impl IntoResponse for ApiResponseError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

impl From<ApiError> for ApiResponseError {
    fn from(e: ApiError) -> Self {
        Self(e)
    }
}

impl From<JsonRejection> for ApiResponseError {
    fn from(e: JsonRejection) -> Self {
        Self(ApiError::bad_request(e.body_text()))
    }
}

impl From<QueryRejection> for ApiResponseError {
    fn from(e: QueryRejection) -> Self {
        Self(ApiError::bad_request(e.body_text()))
    }
}

type Reply<T> = Result<Json<T>, ApiResponseError>;

/// Runs request work off the async executor; snapshot clustering and k-NN
/// can take a while on large artifacts.
async fn blocking<T, F>(svc: Arc<Service>, f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| {
            ApiError {
                status: 500,
                error: "internal".into(),
                message: e.to_string(),
            }
        })?
        .map(Json)
        .map_err(ApiResponseError)
}

#[derive(Debug, Default, Deserialize)]
struct MetricsParams {
    session: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct SessionParams {
    id: Option<String>,
    cluster: Option<bool>,
}

async fn snapshot(
    State(svc): State<Arc<Service>>,
    UrlPath((level, k)): UrlPath<(u32, u32)>,
    opts: Result<Query<SnapshotOptions>, QueryRejection>,
) -> Response {
    let opts = match opts {
        Ok(Query(o)) => o,
        Err(e) => return ApiResponseError::from(e).into_response(),
    };
    blocking(svc, move |s| s.snapshot(level, k, &opts)).await.into_response()
}

async fn metrics(
    State(svc): State<Arc<Service>>,
    UrlPath((level, k)): UrlPath<(u32, u32)>,
    params: Result<Query<MetricsParams>, QueryRejection>,
) -> Response {
    let params = match params {
        Ok(Query(p)) => p,
        Err(e) => return ApiResponseError::from(e).into_response(),
    };
    blocking(svc, move |s| s.metrics(level, k, params.session.as_deref()))
        .await
        .into_response()
}

async fn knn(State(svc): State<Arc<Service>>, body: Result<Json<KnnRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => blocking(svc, move |s| s.knn(&req)).await.into_response(),
        Err(e) => ApiResponseError::from(e).into_response(),
    }
}

async fn filter(State(svc): State<Arc<Service>>, body: Result<Json<FilterRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => blocking(svc, move |s| s.filter(&req)).await.into_response(),
        Err(e) => ApiResponseError::from(e).into_response(),
    }
}

async fn abstract_views(
    State(svc): State<Arc<Service>>,
    body: Result<Json<AbstractRequest>, JsonRejection>,
) -> Response {
    match body {
        Ok(Json(req)) => blocking(svc, move |s| s.abstract_views(&req)).await.into_response(),
        Err(e) => ApiResponseError::from(e).into_response(),
    }
}

async fn session(State(svc): State<Arc<Service>>, params: Result<Query<SessionParams>, QueryRejection>) -> Response {
    match params {
        Ok(Query(p)) => Json(svc.session_state(p.id.as_deref(), p.cluster)).into_response(),
        Err(e) => ApiResponseError::from(e).into_response(),
    }
}

async fn not_found() -> ApiResponseError {
    ApiResponseError(ApiError::not_found("no such endpoint"))
}

/// Builds the `/api` router. `cors_origin` restricts cross-origin requests
/// to one origin; `None` allows any origin.
pub fn router(svc: Arc<Service>, cors_origin: Option<&str>) -> anyhow::Result<Router> {
    let cors = match cors_origin {
        Some(origin) => CorsLayer::new()
            .allow_origin(AllowOrigin::exact(
                HeaderValue::from_str(origin).with_context(|| format!("invalid CORS origin {origin:?}"))?,
            ))
            .allow_methods(tower_http::cors::Any)
            .allow_headers(tower_http::cors::Any),
        None => CorsLayer::permissive(),
    };
    Ok(Router::new()
        .route("/api/bootstrap", get(|State(s): State<Arc<Service>>| async move { Json(s.bootstrap()) }))
        .route("/api/hierarchy", get(|State(s): State<Arc<Service>>| async move { Json(s.hierarchy()) }))
        .route("/api/layout", get(|State(s): State<Arc<Service>>| async move { Json(s.layout()) }))
        .route("/api/snapshot/:level/:k", get(snapshot))
        .route("/api/metrics/:level/:k", get(metrics))
        .route("/api/knn", post(knn))
        .route("/api/filter", post(filter))
        .route("/api/abstract", post(abstract_views))
        .route("/api/session", get(session))
        .fallback(not_found)
        .layer(cors)
        .with_state(svc))
}

fn default_methods() -> Vec<BenchMethod> {
    let mut m = BenchMethod::PAPER.to_vec();
    m.push(BenchMethod::RandomVector);
    m
}

fn default_bucket_width() -> u64 {
    3600
}

fn default_schema() -> EdgeSchema {
    EdgeSchema::positional('\t', false, false)
}

/// Configuration of `mss eval`. Without `input` the benchmark runs on a
/// synthetic dynamic stochastic block model described by `[sbm]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<BenchMethod>,
    #[serde(default)]
    pub sbm: SbmConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    /// Edge file to evaluate on instead of the synthetic graph.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "default_schema")]
    pub schema: EdgeSchema,
    #[serde(default = "default_bucket_width")]
    pub bucket_width: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            sbm: SbmConfig::default(),
            experiment: ExperimentConfig::default(),
            input: None,
            schema: default_schema(),
            bucket_width: default_bucket_width(),
        }
    }
}

impl EvalConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if let Some(input) = cfg.input.as_mut().filter(|p| p.is_relative()) {
            *input = path.parent().unwrap_or(Path::new(".")).join(&*input);
        }
        if cfg.methods.is_empty() {
            bail!("at least one method is required");
        }
        Ok(cfg)
    }
}

/// Result of an evaluation run: the accuracy table and, per window length,
/// the `(length, mean, std)` accuracy of a random ranking on the same graph.
pub struct EvalOutcome {
    pub table: AccuracyTable,
    pub chance: Vec<(usize, f64, f64)>,
}

pub fn run_eval(cfg: &EvalConfig) -> anyhow::Result<EvalOutcome> {
    let dg = match &cfg.input {
        Some(path) => {
            let file = std::fs::File::open(path).with_context(|| format!("cannot read input {}", path.display()))?;
            let parsed = parse_edge_stream(std::io::BufReader::new(file), &cfg.schema)?;
            if !parsed.errors.is_empty() {
                tracing::warn!(skipped = parsed.errors.len(), "malformed input lines skipped");
            }
            bucket_by_hour(&parsed.edges, cfg.bucket_width)?
        }
        None => synth_dynamic_sbm(&cfg.sbm)?,
    };
    let table = run_accuracy_experiment(&dg, &cfg.methods, &cfg.experiment)?;
    let chance = cfg
        .experiment
        .lengths
        .iter()
        .map(|&l| {
            let (mean, sd) = chance_level(dg.len() - l, cfg.experiment.k, cfg.experiment.runs);
            (l, mean, sd)
        })
        .collect();
    Ok(EvalOutcome { table, chance })
}

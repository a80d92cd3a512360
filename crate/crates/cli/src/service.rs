//! HTTP inference endpoint over a loaded checkpoint.
//!
//! Routes:
//! - `POST /api/infer`   `{description}` → predicted recipe, nearest dataset colors, token ids
//! - `POST /api/delta-e` `{a, b, metric?}` → color difference between two colors
//! - `GET  /api/model`   → checkpoint metadata
//! - `GET  /api/health`  → `{"status":"ok"}`
//!
//! Everything else falls through to the static UI directory when one is configured.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tenn_core::experiment::{nearest_colors, DEFAULT_NEAREST_K};
use tenn_core::{Checkpoint, Error, Metric, Pipeline, Rgb};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

const MAX_K: usize = 20;

pub struct ServiceState {
    checkpoint: Checkpoint,
    pipeline: Pipeline,
}

impl ServiceState {
    pub fn new(checkpoint: Checkpoint) -> tenn_core::Result<Self> {
        let pipeline = checkpoint.to_pipeline()?;
        Ok(ServiceState {
            checkpoint,
            pipeline,
        })
    }

    pub fn model_version(&self) -> &str {
        &self.checkpoint.metadata.version
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub description: String,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestEntry {
    pub name: String,
    pub rgb: Rgb,
    pub hex: String,
    pub delta_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResponse {
    pub rgb: Rgb,
    pub hex: String,
    pub nearest: Vec<NearestEntry>,
    pub tokens: Vec<u32>,
    pub model_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub param_count: usize,
    pub layer_dims: Vec<usize>,
    pub scaler_method: String,
    pub vocab_size: usize,
    pub max_len: usize,
    pub dataset_size: usize,
    pub model_version: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ColorInput {
    Hex(String),
    Channels(Rgb),
}

impl ColorInput {
    fn resolve(&self) -> tenn_core::Result<Rgb> {
        match self {
            ColorInput::Hex(s) => s.parse(),
            ColorInput::Channels(c) => Ok(*c),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct DeltaERequest {
    pub a: ColorInput,
    pub b: ColorInput,
    #[serde(default)]
    pub metric: Metric,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::BadRequest(format!("invalid JSON body: {e}")))
}

/// Pure function of the state and request; shared by the HTTP handler and tests.
pub fn infer(state: &ServiceState, req: &InferenceRequest) -> Result<InferenceResponse, ApiError> {
    let (ids, scaled) = match state.pipeline.encode(&req.description) {
        Ok(v) => v,
        Err(e @ Error::EmptyDescription) => return Err(ApiError::BadRequest(e.to_string())),
        Err(e) => return Err(ApiError::Internal(e.to_string())),
    };
    let rgb = state
        .pipeline
        .network
        .predict_rgb(&scaled)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let k = req.k.unwrap_or(DEFAULT_NEAREST_K).clamp(1, MAX_K);
    let nearest = nearest_colors(&state.checkpoint.palette, rgb, k, Metric::Ciede2000)
        .into_iter()
        .map(|(s, d)| NearestEntry {
            name: s.description.clone(),
            rgb: s.recipe,
            hex: s.recipe.hex(),
            delta_e: d,
        })
        .collect();
    Ok(InferenceResponse {
        rgb,
        hex: rgb.hex(),
        nearest,
        tokens: ids.0,
        model_version: state.model_version().to_string(),
    })
}

pub fn model_info(state: &ServiceState) -> ModelInfo {
    let ckpt = &state.checkpoint;
    ModelInfo {
        param_count: state.pipeline.network.parameter_count(),
        layer_dims: ckpt.config.layer_dims.clone(),
        scaler_method: ckpt.scaler_params.method().to_string(),
        vocab_size: ckpt.vocabulary.tokens().len(),
        max_len: ckpt.vocabulary.max_len(),
        dataset_size: ckpt.metadata.dataset_size,
        model_version: state.model_version().to_string(),
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn model(State(state): State<Arc<ServiceState>>) -> Json<ModelInfo> {
    Json(model_info(&state))
}

async fn infer_handler(
    State(state): State<Arc<ServiceState>>,
    body: Bytes,
) -> Result<Json<InferenceResponse>, ApiError> {
    let req: InferenceRequest = parse_body(&body)?;
    infer(&state, &req).map(Json)
}

async fn delta_e_handler(body: Bytes) -> Result<Json<serde_json::Value>, ApiError> {
    let req: DeltaERequest = parse_body(&body)?;
    let a = req
        .a
        .resolve()
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let b = req
        .b
        .resolve()
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(json!({
        "delta_e": req.metric.between_rgb(a, b),
        "metric": req.metric,
    })))
}

pub fn router(state: Arc<ServiceState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/model", get(model))
        .route("/api/infer", post(infer_handler))
        .route("/api/delta-e", post(delta_e_handler))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}

pub async fn serve(
    state: ServiceState,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state), static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

//! HTTP facade under `/api`. Handlers are thin: parsing and status codes
//! here, the work in [`crate::ops`] on blocking threads.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gasketlab_core::lattice::fixtures;
use gasketlab_search::catalog::{Catalog, CatalogQuery, QueryPage};
use gasketlab_search::config::SearchConfig;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use crate::error::ServiceError;
use crate::ops::{analysis_report, graph_report, resolve_ifs, IfsInput, RenderRequest};
use crate::session::{SessionManager, SessionStatus};

pub struct AppState {
    pub catalog: Arc<Mutex<Catalog>>,
    pub sessions: SessionManager,
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any)
        .expose_headers(Any);
    Router::new()
        .route("/api/analyze", post(analyze))
        .route("/api/render", get(render))
        .route("/api/search/start", post(search_start))
        .route("/api/search/stop", post(search_stop))
        .route("/api/search/status", get(search_status))
        .route("/api/catalog", get(catalog))
        .route("/api/neighbor-graph", get(neighbor_graph))
        .route("/api/fixtures", get(list_fixtures))
        .layer(cors)
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    body.map(|Json(b)| b)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct AnalyzeBody {
    ifs: IfsInput,
    max_candidates: Option<usize>,
}

async fn analyze(body: Result<Json<AnalyzeBody>, JsonRejection>) -> Result<Response, ServiceError> {
    let body = json_body(body)?;
    let ifs = body.ifs.resolve()?;
    let report = blocking(move || analysis_report(&ifs, body.max_candidates)).await?;
    Ok(Json(report).into_response())
}

fn param<T: FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ServiceError> {
    q.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ServiceError::BadRequest(format!("bad value {v:?} for {key}")))
        })
        .transpose()
}

/// Builds a render request from query parameters; the same fields as the
/// CLI `render` flags.
pub fn render_request(q: &HashMap<String, String>) -> Result<RenderRequest, ServiceError> {
    let ifs = q
        .get("ifs")
        .cloned()
        .ok_or_else(|| ServiceError::BadRequest("missing ifs parameter".into()))?;
    Ok(RenderRequest {
        ifs,
        cx: param(q, "cx")?,
        cy: param(q, "cy")?,
        half: param(q, "half")?,
        px: param(q, "px")?,
        py: param(q, "py")?,
        mode: param(q, "mode")?.unwrap_or_default(),
        depth: param(q, "depth")?,
        format: param(q, "format")?.unwrap_or_default(),
    })
}

async fn render(Query(q): Query<HashMap<String, String>>) -> Result<Response, ServiceError> {
    let req = render_request(&q)?;
    let (bytes, content_type) = blocking(move || req.render_bytes()).await?;
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Started {
    session_id: u64,
}

async fn search_start(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SearchConfig>, JsonRejection>,
) -> Result<Json<Started>, ServiceError> {
    let cfg = json_body(body)?;
    let session_id = state.sessions.start(cfg)?;
    Ok(Json(Started { session_id }))
}

async fn search_stop(State(state): State<Arc<AppState>>) -> Json<SessionStatus> {
    Json(state.sessions.stop())
}

async fn search_status(State(state): State<Arc<AppState>>) -> Json<SessionStatus> {
    Json(state.sessions.status())
}

async fn catalog(
    State(state): State<Arc<AppState>>,
    Query(pairs): Query<Vec<(String, String)>>,
) -> Result<Json<QueryPage>, ServiceError> {
    let query = CatalogQuery::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    let page = state.catalog.lock().unwrap().query(&query)?;
    Ok(Json(page))
}

async fn neighbor_graph(Query(q): Query<HashMap<String, String>>) -> Result<Response, ServiceError> {
    let text = q
        .get("ifs")
        .cloned()
        .ok_or_else(|| ServiceError::BadRequest("missing ifs parameter".into()))?;
    let ifs = resolve_ifs(&text)?;
    let pruned = param(&q, "pruned")?.unwrap_or(true);
    let with_neighborhoods = param(&q, "neighborhoods")?.unwrap_or(false);
    let format: String = param(&q, "format")?.unwrap_or_else(|| "json".into());
    let report = blocking(move || graph_report(&ifs, pruned, with_neighborhoods)).await?;
    match format.as_str() {
        "json" => Ok(Json(report).into_response()),
        "dot" => Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz")], report.dot).into_response()),
        other => Err(ServiceError::BadRequest(format!(
            "unknown format {other:?} (expected json or dot)"
        ))),
    }
}

async fn list_fixtures() -> Json<serde_json::Value> {
    Json(json!(fixtures::NAMED
        .iter()
        .map(|(name, ifs)| json!({ "name": name, "ifs": ifs }))
        .collect::<Vec<_>>()))
}

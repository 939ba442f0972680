use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gasketlab_core::analysis::AnalysisError;
use gasketlab_core::graph::GraphError;
use gasketlab_core::lattice::ParseIfsError;
use gasketlab_core::neighborhood::NeighborhoodError;
use gasketlab_core::render::RenderError;
use gasketlab_search::catalog::{CatalogError, QueryError};
use gasketlab_search::config::ConfigError;
use gasketlab_search::engine::SearchError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot parse IFS {input:?}: {source}")]
    Parse { input: String, source: ParseIfsError },
    #[error("{0}")]
    BadRequest(String),
    #[error("too complex: {count} exceeds the limit {limit} (estimated {estimate} candidates)")]
    Complexity {
        count: usize,
        limit: usize,
        estimate: u64,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("search session {0} is already running")]
    Conflict(u64),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Search(SearchError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    /// Maps a core analysis failure, attaching the candidate estimate for
    /// complexity failures.
    pub fn from_analysis(e: AnalysisError, estimate: u64) -> Self {
        match e.complexity() {
            Some((count, limit)) => ServiceError::Complexity {
                count,
                limit,
                estimate,
            },
            None => ServiceError::Internal(e.to_string()),
        }
    }

    pub fn from_graph(e: GraphError, estimate: u64) -> Self {
        let GraphError::ComplexityExceeded { count, limit } = e;
        ServiceError::Complexity {
            count,
            limit,
            estimate,
        }
    }

    pub fn from_neighborhoods(e: NeighborhoodError, estimate: u64) -> Self {
        let NeighborhoodError::ComplexityExceeded { count, limit } = e;
        ServiceError::Complexity {
            count,
            limit,
            estimate,
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Parse { .. }
            | ServiceError::BadRequest(_)
            | ServiceError::Render(_)
            | ServiceError::Query(_)
            | ServiceError::Config(_) => StatusCode::BAD_REQUEST,
            ServiceError::Complexity { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Catalog(_) | ServiceError::Search(_) | ServiceError::Internal(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ServiceError::Parse { .. } => "parse",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Complexity { .. } => "complexity_exceeded",
            ServiceError::Render(_) => "render",
            ServiceError::Query(_) => "query",
            ServiceError::Config(_) => "config",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Catalog(_) => "catalog",
            ServiceError::Search(_) => "search",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<SearchError> for ServiceError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Config(c) => ServiceError::Config(c),
            SearchError::Checkpoint(msg) => ServiceError::BadRequest(format!("checkpoint: {msg}")),
            other => ServiceError::Search(other),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        match &self {
            ServiceError::Complexity {
                count,
                limit,
                estimate,
            } => {
                body["count"] = json!(count);
                body["limit"] = json!(limit);
                body["estimate"] = json!(estimate);
            }
            ServiceError::Query(QueryError::UnknownKey { valid, .. }) => {
                body["validKeys"] = json!(valid);
            }
            ServiceError::Conflict(id) => body["sessionId"] = json!(id),
            _ => {}
        }
        (self.status(), Json(body)).into_response()
    }
}

//! HTTP front for search.
//!
//! `GET /api/search?q=<wish>&k=<1..50>&validate=<bool>` runs the pipeline,
//! `GET /api/health` reports the corpus size and embedding setup, and any
//! other path is served from the static UI directory when one is given.
//!
//! Searches run on the blocking pool because provider clients are
//! synchronous. Build the [`Searcher`] before entering the runtime: blocking
//! HTTP clients refuse to be created inside one.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use forge_core::search::{SearchError, SearchRequest, Searcher, DEFAULT_K, MAX_K};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

#[derive(Clone)]
pub struct AppState {
    searcher: Arc<Searcher>,
}

impl AppState {
    pub fn new(searcher: Searcher) -> Self {
        Self {
            searcher: Arc::new(searcher),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
struct SearchParams {
    q: Option<String>,
    k: Option<String>,
    validate: Option<String>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn parse_request(params: SearchParams) -> Result<SearchRequest, String> {
    let wish = params.q.unwrap_or_default();
    if wish.trim().is_empty() {
        return Err("q must be a nonempty wish".into());
    }
    let k = match params.k.as_deref() {
        None | Some("") => DEFAULT_K,
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|k| (1..=MAX_K).contains(k))
            .ok_or_else(|| format!("k must be an integer in 1..={MAX_K}"))?,
    };
    let validate = match params.validate.as_deref() {
        None | Some("") => true,
        Some("true") | Some("1") => true,
        Some("false") | Some("0") => false,
        Some(_) => return Err("validate must be true or false".into()),
    };
    Ok(SearchRequest {
        k,
        validate,
        ..SearchRequest::new(wish)
    })
}

async fn search(State(state): State<AppState>, Query(params): Query<SearchParams>) -> Response {
    let request = match parse_request(params) {
        Ok(r) => r,
        Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
    };
    let searcher = state.searcher.clone();
    let outcome = tokio::task::spawn_blocking(move || searcher.search(&request)).await;
    match outcome {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(SearchError::BadRequest(msg))) => error(StatusCode::BAD_REQUEST, msg),
        Ok(Err(SearchError::ServiceUnavailable(e))) => {
            tracing::warn!(error = %e, "search unavailable");
            error(StatusCode::SERVICE_UNAVAILABLE, e.to_string())
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn health(State(state): State<AppState>) -> Response {
    let store = state.searcher.store();
    Json(json!({
        "status": "ok",
        "corpus_size": store.len(),
        "provider_tag": store.provider_tag(),
    }))
    .into_response()
}

/// API routes, plus the static bundle at `/` when `static_dir` exists.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/search", get(search))
        .route("/api/health", get(health))
        .with_state(state);
    match static_dir {
        Some(dir) if dir.is_dir() => api.fallback_service(ServeDir::new(dir)),
        Some(dir) => {
            tracing::info!(dir = %dir.display(), "no UI bundle found, serving the API only");
            api
        }
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state, static_dir)).await
}

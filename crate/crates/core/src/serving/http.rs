//! JSON over HTTP. Every endpoint is a GET with query parameters:
//!
//! * `/autocomplete?prefix=&n=&ranker=`
//! * `/search?q=&vertical=&size=&strategy=`
//! * `/suggest?q=&mode=`
//! * `/tag?q=`
//! * `/intent?q=`
//! * `/healthz`
//!
//! Errors come back as `{"error": "..."}` with status 400 for bad input and
//! 503 when the model behind the endpoint is not loaded.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;

use crate::error::{Error, Result};
use crate::serving::engine::{Engine, Request};

type Params = Query<HashMap<String, String>>;

fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::InvalidInput(_) | Error::Format { .. } | Error::Shape(_) => StatusCode::BAD_REQUEST,
        Error::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_response(e: Error) -> Response {
    (status_of(&e), Json(json!({ "error": e.to_string() }))).into_response()
}

fn text(p: &HashMap<String, String>, key: &str) -> Result<String> {
    p.get(key)
        .cloned()
        .ok_or_else(|| Error::invalid(format!("missing query parameter {key}")))
}

fn number(p: &HashMap<String, String>, key: &str) -> Result<Option<usize>> {
    p.get(key)
        .map(|v| v.parse().map_err(|_| Error::invalid(format!("{key} must be a non-negative integer"))))
        .transpose()
}

fn to_request(endpoint: &str, p: &HashMap<String, String>) -> Result<Request> {
    Ok(match endpoint {
        "autocomplete" => Request::Autocomplete {
            prefix: p.get("prefix").cloned().unwrap_or_default(),
            n: number(p, "n")?,
            ranker: p.get("ranker").cloned(),
        },
        "search" => Request::Search {
            q: text(p, "q")?,
            vertical: p.get("vertical").cloned(),
            size: number(p, "size")?,
            strategy: p.get("strategy").cloned(),
        },
        "suggest" => Request::Suggest {
            q: text(p, "q")?,
            mode: p.get("mode").cloned(),
        },
        "tag" => Request::Tag { q: text(p, "q")? },
        "intent" => Request::Intent { q: text(p, "q")? },
        _ => return Err(Error::invalid(format!("unknown endpoint {endpoint}"))),
    })
}

async fn dispatch(engine: Arc<Engine>, endpoint: &'static str, params: HashMap<String, String>) -> Response {
    let req = match to_request(endpoint, &params) {
        Ok(r) => r,
        Err(e) => return error_response(e),
    };
    match tokio::task::spawn_blocking(move || engine.handle(&req)).await {
        Ok(Ok(v)) => Json(v).into_response(),
        Ok(Err(e)) => error_response(e),
        Err(e) => error_response(Error::Target(e.to_string())),
    }
}

async fn autocomplete(State(e): State<Arc<Engine>>, Query(p): Params) -> Response {
    dispatch(e, "autocomplete", p).await
}

async fn search(State(e): State<Arc<Engine>>, Query(p): Params) -> Response {
    dispatch(e, "search", p).await
}

async fn suggest(State(e): State<Arc<Engine>>, Query(p): Params) -> Response {
    dispatch(e, "suggest", p).await
}

async fn tag(State(e): State<Arc<Engine>>, Query(p): Params) -> Response {
    dispatch(e, "tag", p).await
}

async fn intent(State(e): State<Arc<Engine>>, Query(p): Params) -> Response {
    dispatch(e, "intent", p).await
}

async fn healthz(State(e): State<Arc<Engine>>) -> Response {
    Json(json!({ "status": "ok", "models": e.health(), "documents": e.corpus().len() })).into_response()
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/autocomplete", get(autocomplete))
        .route("/search", get(search))
        .route("/suggest", get(suggest))
        .route("/tag", get(tag))
        .route("/intent", get(intent))
        .route("/healthz", get(healthz))
        .with_state(engine)
}

/// Serves until the process is stopped.
pub async fn serve(engine: Arc<Engine>) -> Result<()> {
    let addr = format!("{}:{}", engine.config().host, engine.config().port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(engine)).await?;
    Ok(())
}

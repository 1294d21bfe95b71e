//! HTTP front end for the pipeline.
//!
//! `POST /v1/translate`, `GET /v1/health`, `GET /v1/trace/{id}`.

use std::collections::VecDeque;
use std::future::{Future, IntoFuture};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use uuid::Uuid;

use crate::pipeline::{Pipeline, PipelineError, Variant};

/// Fixed-capacity store of recent trace JSON, oldest evicted first.
#[derive(Debug)]
pub struct TraceStore {
    capacity: usize,
    entries: Mutex<VecDeque<(String, Value)>>,
}

impl TraceStore {
    pub fn new(capacity: usize) -> Self {
        TraceStore {
            capacity: capacity.max(1),
            entries: Mutex::new(VecDeque::new()),
        }
    }

    pub fn insert(&self, id: String, trace: Value) {
        let mut entries = self.entries.lock();
        if entries.len() == self.capacity {
            entries.pop_front();
        }
        entries.push_back((id, trace));
    }

    pub fn get(&self, id: &str) -> Option<Value> {
        self.entries
            .lock()
            .iter()
            .find(|(k, _)| k == id)
            .map(|(_, v)| v.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct AppState {
    pipeline: Pipeline,
    traces: TraceStore,
    draining: AtomicBool,
    verbose_traces: bool,
}

impl AppState {
    pub fn new(pipeline: Pipeline, trace_capacity: usize, verbose_traces: bool) -> Arc<Self> {
        Arc::new(AppState {
            pipeline,
            traces: TraceStore::new(trace_capacity),
            draining: AtomicBool::new(false),
            verbose_traces,
        })
    }

    /// New translate requests are refused with 503 once set.
    pub fn begin_drain(&self) {
        self.draining.store(true, Ordering::SeqCst);
    }

    pub fn traces(&self) -> &TraceStore {
        &self.traces
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateRequest {
    pub text: String,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub non_literal: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranslateResponse {
    pub literal: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub non_literal: Option<String>,
    pub trace_id: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn pipeline_error(e: &PipelineError) -> Response {
    match e {
        PipelineError::InvalidInput(_) | PipelineError::Prompt(_) => {
            error(StatusCode::BAD_REQUEST, e.to_string())
        }
        PipelineError::InputTooLong { .. } => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        PipelineError::Stage {
            stage,
            candidate_index,
            source,
            ..
        } => (
            StatusCode::BAD_GATEWAY,
            Json(json!({
                "error": e.to_string(),
                "stage": stage,
                "candidate_index": candidate_index,
                "attempts": source.attempts(),
            })),
        )
            .into_response(),
        PipelineError::Config(_) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn translate(
    State(state): State<Arc<AppState>>,
    body: Result<Json<TranslateRequest>, JsonRejection>,
) -> Response {
    if state.draining.load(Ordering::SeqCst) {
        return error(StatusCode::SERVICE_UNAVAILABLE, "server is shutting down");
    }
    let Json(req) = match body {
        Ok(b) => b,
        Err(rej) => return error(StatusCode::BAD_REQUEST, rej.body_text()),
    };
    if req.text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "text must not be empty");
    }
    let pipeline = match req.variant.as_deref() {
        Some(name) => match name.parse::<Variant>() {
            Ok(v) => state.pipeline.with_variant(v),
            Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
        },
        None => state.pipeline.clone(),
    };
    let result = if req.non_literal {
        pipeline.translate_with_non_literal(&req.text).await
    } else {
        pipeline.translate(&req.text).await
    };
    match result {
        Ok(trace) => {
            let trace_id = Uuid::new_v4().to_string();
            state
                .traces
                .insert(trace_id.clone(), trace.to_json(state.verbose_traces));
            Json(TranslateResponse {
                literal: trace.final_text,
                non_literal: trace.non_literal,
                trace_id,
            })
            .into_response()
        }
        Err(e) => {
            tracing::warn!(error = %e, "translation failed");
            pipeline_error(&e)
        }
    }
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn trace(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.traces.get(&id) {
        Some(t) => Json(t).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no trace {id}")),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/translate", post(translate))
        .route("/v1/health", get(health))
        .route("/v1/trace/{id}", get(trace))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then refuses new work and waits up to
/// `grace` for in-flight requests.
pub async fn serve(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
    grace: Duration,
) -> std::io::Result<()> {
    let (fired_tx, fired_rx) = tokio::sync::oneshot::channel::<()>();
    let drain_state = state.clone();
    let signal = async move {
        shutdown.await;
        drain_state.begin_drain();
        let _ = fired_tx.send(());
    };
    let server = axum::serve(listener, router(state)).with_graceful_shutdown(signal);
    let server = std::pin::pin!(server.into_future());
    let deadline = async {
        if fired_rx.await.is_ok() {
            tokio::time::sleep(grace).await;
        } else {
            std::future::pending::<()>().await;
        }
    };
    tokio::select! {
        r = server => r,
        _ = deadline => {
            tracing::warn!("shutdown grace period elapsed with requests in flight");
            Ok(())
        }
    }
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

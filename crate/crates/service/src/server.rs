//! HTTP API.
//!
//! * `POST /ask` takes an [`AskRequest`] and returns a [`PipelineResponse`].
//!   A question nothing answers is still `200` with `"no_answer": true`.
//! * `POST /retrieve` takes a [`RetrieveRequest`] and returns ranked contexts.
//! * `GET /health` returns build and index information.
//!
//! Bad requests get `400 {"error": ...}`; upstream model failures that
//! cannot be degraded get `502`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use regqa_core::fusion::FusionConfig;
use regqa_core::pipeline::{Pipeline, PipelineResponse, QueryOverrides};
use regqa_core::wire::{AskRequest, ErrorBody, RetrieveRequest};
use regqa_core::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) | Error::Validation(_) => StatusCode::BAD_REQUEST,
            Error::Transport(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedArticle {
    pub article_id: String,
    pub article_title: String,
    pub document_title: String,
    pub fused: f64,
    pub lexical: f64,
    pub dense: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResponse {
    pub question: String,
    pub contexts: Vec<RetrievedArticle>,
    pub degraded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub name: String,
    pub version: String,
    pub documents: usize,
    pub articles: usize,
    pub embedding_dim: usize,
    pub fusion: String,
    pub alpha: f64,
    pub top_k: usize,
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, Error> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        })?
        .map_err(ApiError::from)
}

async fn ask(State(p): State<Arc<Pipeline>>, body: Bytes) -> Result<Json<PipelineResponse>, ApiError> {
    let req: AskRequest = parse_body(&body)?;
    let overrides = QueryOverrides::from(&req);
    blocking(move || p.answer_question(&req.question, &overrides)).await.map(Json)
}

pub fn retrieve_articles(p: &Pipeline, req: &RetrieveRequest) -> Result<RetrieveResponse, Error> {
    let cfg: FusionConfig = p.fusion_for(&QueryOverrides {
        top_k: req.top_k,
        ..Default::default()
    })?;
    let (result, issue) = p.retrieve(&req.question, &cfg)?;
    let corpus = p.corpus();
    let contexts = result
        .ranked
        .into_iter()
        .map(|c| {
            let article = corpus.article(&c.article_id).expect("retrieved ids come from the corpus");
            RetrievedArticle {
                article_title: article.title.clone(),
                document_title: corpus
                    .document_of(&c.article_id)
                    .map(|d| d.title.clone())
                    .unwrap_or_default(),
                article_id: c.article_id,
                fused: c.fused,
                lexical: c.lexical,
                dense: c.dense,
            }
        })
        .collect();
    Ok(RetrieveResponse {
        question: req.question.clone(),
        contexts,
        degraded: issue.into_iter().collect(),
    })
}

async fn retrieve(State(p): State<Arc<Pipeline>>, body: Bytes) -> Result<Json<RetrieveResponse>, ApiError> {
    let req: RetrieveRequest = parse_body(&body)?;
    blocking(move || retrieve_articles(&p, &req)).await.map(Json)
}

pub fn health_of(p: &Pipeline) -> HealthResponse {
    let s = p.settings();
    HealthResponse {
        status: "ok".into(),
        name: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        documents: p.corpus().documents().len(),
        articles: p.corpus().articles().len(),
        embedding_dim: p.retriever().store().dim(),
        fusion: s.fusion.mode.to_string(),
        alpha: s.fusion.alpha,
        top_k: s.fusion.top_k,
    }
}

async fn health(State(p): State<Arc<Pipeline>>) -> Json<HealthResponse> {
    Json(health_of(&p))
}

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/ask", post(ask))
        .route("/retrieve", post(retrieve))
        .route("/health", get(health))
        .with_state(pipeline)
}

/// Serves until Ctrl-C.
pub async fn serve(pipeline: Arc<Pipeline>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(pipeline))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

//! Stateless batch-scoring HTTP service.
//!
//! `POST /v1/score` scores a batch with per-item error reporting,
//! `GET /v1/health` and `GET /v1/config` report liveness and configuration.
//! Non-judge scoring is deterministic; judge-backed kinds share the
//! client's global in-flight limiter.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use listreward_core::data::{AnswerFormat, QuestionRecord};
use listreward_core::judge::RankJudge;
use listreward_core::parse::RawResponse;
use listreward_core::reward::{score_response, RewardConfig, RewardOutcome, ScoreError};

pub struct ServiceState {
    /// Records by id, when a dataset was loaded at startup.
    pub dataset: Option<HashMap<String, QuestionRecord>>,
    pub judge: Option<Arc<dyn RankJudge>>,
}

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorePair {
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    /// Inline gold/format/question, for callers without a shared dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<AnswerFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreBatchRequest {
    pub v: u32,
    pub config: RewardConfig,
    pub pairs: Vec<ScorePair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexedOutcome {
    pub index: usize,
    #[serde(flatten)]
    pub outcome: RewardOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexedError {
    pub index: usize,
    pub code: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreBatchResponse {
    pub v: u32,
    pub outcomes: Vec<IndexedOutcome>,
    pub errors: Vec<IndexedError>,
}

#[derive(Debug, Serialize)]
pub struct HealthResponse {
    pub status: &'static str,
    pub version: &'static str,
}

fn resolve_record(
    state: &ServiceState,
    pair: &ScorePair,
    kind_format: AnswerFormat,
) -> Result<QuestionRecord, String> {
    if let Some(id) = &pair.record_id {
        let dataset = state.dataset.as_ref().ok_or("no_dataset_loaded")?;
        return dataset.get(id).cloned().ok_or("unknown_record_id".into());
    }
    let gold = pair.gold.clone().ok_or("missing_gold")?;
    if gold.trim().is_empty() {
        return Err("missing_gold".into());
    }
    let format = pair.format.unwrap_or(kind_format);
    Ok(QuestionRecord {
        id: String::new(),
        benchmark: String::new(),
        question: pair.question.clone().unwrap_or_default(),
        options: None,
        gold,
        valid_answers: None,
        format,
    conversion: None,
    })
}

/// Scores one batch. Judge failures abort the batch (the caller must
/// retry); everything else is reported per item.
pub fn score_batch_request(
    state: &ServiceState,
    request: &ScoreBatchRequest,
) -> Result<ScoreBatchResponse, (StatusCode, String)> {
    if request.v != WIRE_VERSION {
        return Err((
            StatusCode::BAD_REQUEST,
            format!("unsupported wire version {}", request.v),
        ));
    }
    if request.config.validate().is_err() {
        return Err((StatusCode::BAD_REQUEST, "invalid reward config".into()));
    }
    let judge = state.judge.as_deref();
    let kind_format = request.config.kind.answer_format();

    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for (index, pair) in request.pairs.iter().enumerate() {
        let record = match resolve_record(state, pair, kind_format) {
            Ok(r) => r,
            Err(code) => {
                errors.push(IndexedError { index, code });
                continue;
            }
        };
        let raw = RawResponse::new(pair.response_text.clone());
        match score_response(&raw, &record, &request.config, judge) {
            Ok(outcome) => outcomes.push(IndexedOutcome { index, outcome }),
            Err(ScoreError::Judge(e)) => {
                return Err((StatusCode::SERVICE_UNAVAILABLE, e.to_string()))
            }
            Err(ScoreError::JudgeRequired) => {
                return Err((
                    StatusCode::SERVICE_UNAVAILABLE,
                    "judge kind configured without a judge binding".into(),
                ))
            }
            Err(e) => errors.push(IndexedError {
                index,
                code: error_code(&e),
            }),
        }
    }
    Ok(ScoreBatchResponse {
        v: WIRE_VERSION,
        outcomes,
        errors,
    })
}

fn error_code(err: &ScoreError) -> String {
    match err {
        ScoreError::FormatMismatch { .. } => "format_mismatch".into(),
        ScoreError::Config(_) => "invalid_config".into(),
        _ => "internal".into(),
    }
}

async fn handle_score(
    State(state): State<Arc<ServiceState>>,
    Json(request): Json<ScoreBatchRequest>,
) -> Result<Json<ScoreBatchResponse>, (StatusCode, String)> {
    // Scoring may block on judge HTTP calls; keep it off the async workers.
    let result = tokio::task::spawn_blocking(move || score_batch_request(&state, &request))
        .await
        .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    result.map(Json)
}

async fn handle_health() -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok",
        version: crate::VERSION,
    })
}

async fn handle_config(State(state): State<Arc<ServiceState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "v": WIRE_VERSION,
        "version": crate::VERSION,
        "dataset_loaded": state.dataset.is_some(),
        "judge_configured": state.judge.is_some(),
    }))
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/score", post(handle_score))
        .route("/v1/health", get(handle_health))
        .route("/v1/config", get(handle_config))
        .with_state(state)
}

/// Serves until ctrl-c; in-flight batches drain before shutdown.
pub async fn serve(bind_addr: &str, state: Arc<ServiceState>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind_addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

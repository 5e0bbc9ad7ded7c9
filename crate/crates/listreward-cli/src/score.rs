//! `listreward score`: batch-score a responses file against a dataset and
//! emit per-response outcomes plus a summary block.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use listreward_core::batch::{score_batch, BatchItem};
use listreward_core::data::{load_records, QuestionRecord};
use listreward_core::judge::RankJudge;
use listreward_core::parse::RawResponse;
use listreward_core::reward::{RewardConfig, RewardOutcome, ScoreError};

use crate::manifest::RunManifest;
use crate::responses::load_responses;

#[derive(Debug, Error)]
pub enum CommandError {
    /// Input schema problems; exit code 2.
    #[error("{0}")]
    Schema(String),
    /// Judge retries exhausted; exit code 3.
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Schema(_) => crate::exit::SCHEMA,
            CommandError::JudgeUnavailable(_) => crate::exit::JUDGE_UNAVAILABLE,
            CommandError::Other(_) => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub dataset: PathBuf,
    pub responses: PathBuf,
    pub out_dir: PathBuf,
    pub config: RewardConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeLine {
    pub record_id: String,
    pub benchmark: String,
    #[serde(flatten)]
    pub outcome: RewardOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub n: usize,
    pub mean_total: f64,
    pub mean_correctness: f64,
    /// Fraction with format reward 1; absent when format reward is off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_pass_rate: Option<f64>,
}

#[derive(Debug)]
pub struct ScoreRun {
    pub lines: Vec<OutcomeLine>,
    pub summary: ScoreSummary,
}

/// Scores responses in file order. Unknown record ids and format
/// mismatches are schema errors carrying the offending line number.
pub fn run_score(
    opts: &ScoreOptions,
    judge: Option<&dyn RankJudge>,
) -> Result<ScoreRun, CommandError> {
    opts.config
        .validate()
        .map_err(|e| CommandError::Schema(e.to_string()))?;
    let records = load_records(&opts.dataset, None)
        .map_err(|e| CommandError::Schema(e.to_string()))?;
    let responses =
        load_responses(&opts.responses).map_err(|e| CommandError::Schema(e.to_string()))?;

    let by_id: HashMap<&str, &QuestionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();

    let mut raws = Vec::with_capacity(responses.len());
    let mut matched = Vec::with_capacity(responses.len());
    for (idx, response) in responses.iter().enumerate() {
        let record = by_id.get(response.record_id.as_str()).ok_or_else(|| {
            CommandError::Schema(format!(
                "line {}: unknown record_id `{}`",
                idx + 1,
                response.record_id
            ))
        })?;
        raws.push(RawResponse {
            text: response.text.clone(),
            token_count: response.token_count,
        });
        matched.push(*record);
    }

    let pairs: Vec<BatchItem<'_>> = raws.iter().zip(matched.iter().copied()).collect();
    let results = score_batch(&pairs, &opts.config, judge);

    let mut lines = Vec::with_capacity(results.len());
    for (idx, result) in results.into_iter().enumerate() {
        let outcome = result.map_err(|e| match e {
            ScoreError::Judge(inner) => CommandError::JudgeUnavailable(inner.to_string()),
            other => CommandError::Schema(format!("line {}: {other}", idx + 1)),
        })?;
        lines.push(OutcomeLine {
            record_id: matched[idx].id.clone(),
            benchmark: matched[idx].benchmark.clone(),
            outcome,
        });
    }

    let n = lines.len();
    let summary = ScoreSummary {
        n,
        mean_total: mean(lines.iter().map(|l| l.outcome.total)),
        mean_correctness: mean(lines.iter().map(|l| l.outcome.correctness)),
        format_pass_rate: opts
            .config
            .use_format_reward
            .then(|| mean(lines.iter().map(|l| l.outcome.format.unwrap_or(0) as f64))),
    };
    Ok(ScoreRun { lines, summary })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let collected: Vec<f64> = values.collect();
    if collected.is_empty() {
        return 0.0;
    }
    collected.iter().sum::<f64>() / collected.len() as f64
}

/// Runs scoring and writes `outcomes.jsonl`, `summary.json`, and
/// `manifest.json` under the output directory.
pub fn cmd_score(
    opts: &ScoreOptions,
    judge: Option<&dyn RankJudge>,
) -> Result<ScoreRun, CommandError> {
    let mut manifest = RunManifest::start(
        "score",
        serde_json::to_value(&opts.config).unwrap(),
    );
    manifest
        .checksum_input(&opts.dataset)
        .map_err(|e| CommandError::Schema(e.to_string()))?;
    manifest
        .checksum_input(&opts.responses)
        .map_err(|e| CommandError::Schema(e.to_string()))?;

    let run = run_score(opts, judge)?;

    std::fs::create_dir_all(&opts.out_dir).map_err(anyhow::Error::from)?;
    let mut outcomes =
        std::fs::File::create(opts.out_dir.join("outcomes.jsonl")).map_err(anyhow::Error::from)?;
    for line in &run.lines {
        serde_json::to_writer(&mut outcomes, line).map_err(anyhow::Error::from)?;
        outcomes.write_all(b"\n").map_err(anyhow::Error::from)?;
    }
    std::fs::write(
        opts.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&run.summary).unwrap(),
    )
    .map_err(anyhow::Error::from)?;

    manifest.finish();
    manifest.write(&opts.out_dir).map_err(anyhow::Error::from)?;
    Ok(run)
}

//! `listreward eval`: compute per-benchmark and macro-aggregate metric
//! reports for a responses file.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use listreward_core::data::{load_records, AnswerFormat, QuestionRecord};
use listreward_core::judge::{JudgeError, RankJudge};
use listreward_core::metric::{aggregate, report, EvalRecord, MetricReport};
use listreward_core::parse::{
    extract_boxed, extract_think_structure, parse_ranked_list, RawResponse,
};
use listreward_core::reward::{score_response, RewardConfig, RewardKind, ScoreError};

use crate::manifest::RunManifest;
use crate::report::render_table;
use crate::responses::load_responses;
use crate::score::CommandError;

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub dataset: PathBuf,
    pub responses: PathBuf,
    pub out_dir: PathBuf,
    /// Compute the judge-based metric columns.
    pub with_judge: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub benchmarks: BTreeMap<String, MetricReport>,
    pub aggregate: MetricReport,
}

fn exact_kind(format: AnswerFormat) -> RewardKind {
    match format {
        AnswerFormat::Mcq => RewardKind::Mcq,
        AnswerFormat::Qa => RewardKind::Qa,
        AnswerFormat::List => RewardKind::ListMrr,
    }
}

/// Builds the eval rows: exact-match scoring plus parsed list items.
pub fn build_eval_records(
    records: &[QuestionRecord],
    responses: &[crate::responses::ResponseLine],
) -> Result<Vec<EvalRecord>, CommandError> {
    let by_id: HashMap<&str, &QuestionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut rows = Vec::with_capacity(responses.len());
    for (idx, response) in responses.iter().enumerate() {
        let record = by_id.get(response.record_id.as_str()).ok_or_else(|| {
            CommandError::Schema(format!(
                "line {}: unknown record_id `{}`",
                idx + 1,
                response.record_id
            ))
        })?;
        let raw = RawResponse {
            text: response.text.clone(),
            token_count: response.token_count,
        };
        let config = RewardConfig::new(exact_kind(record.format));
        let outcome = score_response(&raw, record, &config, None).map_err(|e| match e {
            ScoreError::Judge(inner) => CommandError::JudgeUnavailable(inner.to_string()),
            other => CommandError::Schema(format!("line {}: {other}", idx + 1)),
        })?;
        let body = extract_think_structure(&raw).body;
        let list_items = (record.format == AnswerFormat::List).then(|| parse_ranked_list(&body));
        rows.push(EvalRecord {
            record_id: record.id.clone(),
            benchmark: record.benchmark.clone(),
            answer_format: record.format,
            outcome,
            judge_rank: None,
            judge_seen: false,
            response_tokens: response.token_count,
            list_items,
        });
    }
    Ok(rows)
}

/// The answer region a QA judge sees: boxed content when present, else the
/// whole body.
fn qa_region(text: &str) -> String {
    let body = extract_think_structure(&RawResponse::new(text)).body;
    extract_boxed(&body).unwrap_or(body)
}

/// Attaches judge ranks to every non-MCQ row.
pub fn attach_judge_ranks(
    rows: &mut [EvalRecord],
    responses: &[crate::responses::ResponseLine],
    records: &[QuestionRecord],
    judge: &dyn RankJudge,
) -> Result<(), JudgeError> {
    let by_id: HashMap<&str, &QuestionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    for (row, response) in rows.iter_mut().zip(responses) {
        let record = by_id[row.record_id.as_str()];
        let items: Vec<String> = match row.answer_format {
            AnswerFormat::Mcq => continue,
            AnswerFormat::Qa => vec![qa_region(&response.text)],
            AnswerFormat::List => row.list_items.clone().unwrap_or_default(),
        };
        row.judge_rank = if items.is_empty() {
            None
        } else {
            judge.rank_items(&record.question, &record.gold, &items)?
        };
        row.judge_seen = true;
    }
    Ok(())
}

pub fn run_eval(
    opts: &EvalOptions,
    judge: Option<&dyn RankJudge>,
) -> Result<EvalReport, CommandError> {
    let records = load_records(&opts.dataset, None)
        .map_err(|e| CommandError::Schema(e.to_string()))?;
    let responses =
        load_responses(&opts.responses).map_err(|e| CommandError::Schema(e.to_string()))?;

    let mut rows = build_eval_records(&records, &responses)?;
    if opts.with_judge {
        let judge = judge.ok_or_else(|| {
            CommandError::Schema("--judge requires judge endpoint configuration".into())
        })?;
        attach_judge_ranks(&mut rows, &responses, &records, judge)
            .map_err(|e| CommandError::JudgeUnavailable(e.to_string()))?;
    }

    let mut by_benchmark: BTreeMap<String, Vec<EvalRecord>> = BTreeMap::new();
    for row in rows {
        by_benchmark.entry(row.benchmark.clone()).or_default().push(row);
    }
    let mut benchmarks = BTreeMap::new();
    for (name, rows) in &by_benchmark {
        let r = report(rows, opts.with_judge)
            .map_err(|e| CommandError::Schema(e.to_string()))?;
        benchmarks.insert(name.clone(), r);
    }
    let agg = aggregate(&benchmarks).map_err(|e| CommandError::Schema(e.to_string()))?;
    Ok(EvalReport {
        benchmarks,
        aggregate: agg,
    })
}

/// Runs eval and writes `report.json`, `report.txt`, and `manifest.json`.
pub fn cmd_eval(
    opts: &EvalOptions,
    judge: Option<&dyn RankJudge>,
) -> Result<EvalReport, CommandError> {
    let mut manifest = RunManifest::start(
        "eval",
        serde_json::json!({ "with_judge": opts.with_judge }),
    );
    manifest
        .checksum_input(&opts.dataset)
        .map_err(|e| CommandError::Schema(e.to_string()))?;
    manifest
        .checksum_input(&opts.responses)
        .map_err(|e| CommandError::Schema(e.to_string()))?;
    std::fs::create_dir_all(&opts.out_dir).map_err(anyhow::Error::from)?;

    let eval_report = match run_eval(opts, judge) {
        Ok(r) => r,
        Err(e) => {
            // Flush the failure into the manifest so partial runs are visible.
            manifest.mark_failed(e.to_string());
            let _ = manifest.write(&opts.out_dir);
            return Err(e);
        }
    };

    std::fs::write(
        opts.out_dir.join("report.json"),
        serde_json::to_string_pretty(&eval_report).unwrap(),
    )
    .map_err(anyhow::Error::from)?;
    std::fs::write(
        opts.out_dir.join("report.txt"),
        render_table(&eval_report),
    )
    .map_err(anyhow::Error::from)?;
    manifest.finish();
    manifest.write(&opts.out_dir).map_err(anyhow::Error::from)?;
    Ok(eval_report)
}

//! Evaluation metrics (Acc, MRR, judge variants), list-behavior statistics
//! (CP, LL, VLL), macro aggregation, and multi-valid-answer re-evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::AnswerFormat;
use crate::parse::normalize;
use crate::reward::RewardOutcome;

/// One scored response, the row unit of a metric report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub record_id: String,
    pub benchmark: String,
    pub answer_format: AnswerFormat,
    /// Exact-match scoring of the response.
    pub outcome: RewardOutcome,
    /// Judge-assigned rank, once `attach_judge` has run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_rank: Option<u32>,
    /// Whether the judge verdict was parseable (rank absent + true means
    /// "judge found no equivalent item").
    #[serde(default)]
    pub judge_seen: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_tokens: Option<u64>,
    /// Parsed list items; present for LIST records (possibly empty).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list_items: Option<Vec<String>>,
}

/// Per-benchmark (or aggregated) metric values. All fractions in [0, 1];
/// percentage rendering is a presentation concern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub acc: f64,
    pub mrr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc_llm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mrr_llm: Option<f64>,
    /// Average rank of the correct item, over records where one exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp: Option<f64>,
    /// Average list length including empty lists.
    pub ll: f64,
    /// Average list length over non-empty lists only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vll: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resp_len_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resp_len_std: Option<f64>,
}

/// Outcome of re-scoring one list record against multi-valid metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MultiValidCategory {
    CorrectKept,
    IncorrectToValid,
    StillIncorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidCoverage {
    AllValidCovered,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiValidOutcome {
    pub category: MultiValidCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<ValidCoverage>,
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty record set")]
    EmptySet,
    #[error("expected {expected} verdicts, got {got}")]
    CardinalityMismatch { expected: usize, got: usize },
}

/// Fraction of records with positive correctness.
pub fn accuracy(records: &[EvalRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let hits = records
        .iter()
        .filter(|r| r.outcome.correctness > 0.0)
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// Mean reciprocal rank over exact-match ranks.
pub fn mrr(records: &[EvalRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let sum: f64 = records
        .iter()
        .map(|r| r.outcome.rank.map_or(0.0, |rank| 1.0 / rank as f64))
        .sum();
    Ok(sum / records.len() as f64)
}

/// Judge-based accuracy: rank present, regardless of its value.
pub fn accuracy_llm(records: &[EvalRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let hits = records.iter().filter(|r| r.judge_rank.is_some()).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Judge-based MRR over judge-assigned ranks.
pub fn mrr_llm(records: &[EvalRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let sum: f64 = records
        .iter()
        .map(|r| r.judge_rank.map_or(0.0, |rank| 1.0 / rank as f64))
        .sum();
    Ok(sum / records.len() as f64)
}

/// List-behavior statistics over LIST records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListStats {
    /// Mean rank of the correct item over records where one exists.
    pub cp: Option<f64>,
    /// Mean list length over all records, empty lists included.
    pub ll: f64,
    /// Mean list length over non-empty lists; absent when all are empty.
    pub vll: Option<f64>,
}

pub fn list_stats(records: &[EvalRecord]) -> Result<ListStats, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let lengths: Vec<usize> = records
        .iter()
        .map(|r| r.list_items.as_ref().map_or(0, Vec::len))
        .collect();
    let ll = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;

    let nonempty: Vec<usize> = lengths.iter().copied().filter(|&l| l > 0).collect();
    let vll = (!nonempty.is_empty())
        .then(|| nonempty.iter().sum::<usize>() as f64 / nonempty.len() as f64);

    let ranks: Vec<u32> = records.iter().filter_map(|r| r.outcome.rank).collect();
    let cp = (!ranks.is_empty())
        .then(|| ranks.iter().map(|&r| r as f64).sum::<f64>() / ranks.len() as f64);

    Ok(ListStats { cp, ll, vll })
}

/// Populates `judge_rank` from a parallel verdict slice (one per record).
pub fn attach_judge(
    records: &mut [EvalRecord],
    verdicts: &[Option<u32>],
) -> Result<(), MetricError> {
    if records.len() != verdicts.len() {
        return Err(MetricError::CardinalityMismatch {
            expected: records.len(),
            got: verdicts.len(),
        });
    }
    for (record, verdict) in records.iter_mut().zip(verdicts) {
        record.judge_rank = *verdict;
        record.judge_seen = true;
    }
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Builds a full report for one benchmark's records.
pub fn report(records: &[EvalRecord], with_judge: bool) -> Result<MetricReport, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let is_list = records
        .iter()
        .all(|r| r.answer_format == AnswerFormat::List);
    let stats = if is_list {
        Some(list_stats(records)?)
    } else {
        None
    };
    let tokens: Vec<f64> = records
        .iter()
        .filter_map(|r| r.response_tokens.map(|t| t as f64))
        .collect();
    let (resp_len_mean, resp_len_std) = if tokens.len() == records.len() {
        let (m, s) = mean_std(&tokens);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    Ok(MetricReport {
        n: records.len(),
        acc: accuracy(records)?,
        mrr: if is_list { mrr(records)? } else { 0.0 },
        acc_llm: with_judge.then(|| accuracy_llm(records)).transpose()?,
        mrr_llm: (with_judge && is_list).then(|| mrr_llm(records)).transpose()?,
        cp: stats.and_then(|s| s.cp),
        ll: stats.map_or(0.0, |s| s.ll),
        vll: stats.and_then(|s| s.vll),
        resp_len_mean,
        resp_len_std,
    })
}

fn macro_mean(values: Vec<Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    (present.len() == values.len())
        .then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Unweighted macro-average across benchmarks. Optional metrics aggregate
/// only when present in every report.
pub fn aggregate(
    reports: &BTreeMap<String, MetricReport>,
) -> Result<MetricReport, MetricError> {
    if reports.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let k = reports.len() as f64;
    let values: Vec<&MetricReport> = reports.values().collect();
    Ok(MetricReport {
        n: values.iter().map(|r| r.n).sum(),
        acc: values.iter().map(|r| r.acc).sum::<f64>() / k,
        mrr: values.iter().map(|r| r.mrr).sum::<f64>() / k,
        acc_llm: macro_mean(values.iter().map(|r| r.acc_llm).collect()),
        mrr_llm: macro_mean(values.iter().map(|r| r.mrr_llm).collect()),
        cp: macro_mean(values.iter().map(|r| r.cp).collect()),
        ll: values.iter().map(|r| r.ll).sum::<f64>() / k,
        vll: macro_mean(values.iter().map(|r| r.vll).collect()),
        resp_len_mean: macro_mean(values.iter().map(|r| r.resp_len_mean).collect()),
        resp_len_std: macro_mean(values.iter().map(|r| r.resp_len_std).collect()),
    })
}

/// Re-scores a list record against expert-validated answers using
/// normalized EXACT match (stricter than the substring training reward).
///
/// Never downgrades: an originally-correct record stays CORRECT_KEPT.
pub fn multi_valid_reclassify(
    record: &EvalRecord,
    valid_answers: &[String],
) -> MultiValidOutcome {
    assert!(!valid_answers.is_empty(), "valid_answers must be non-empty");
    let items: Vec<String> = record
        .list_items
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|i| normalize(i))
        .collect();
    let hit = |v: &String| items.iter().any(|item| *item == normalize(v));

    let any_hit = valid_answers.iter().any(hit);
    let originally_correct = record.outcome.correctness > 0.0;
    let category = if originally_correct {
        MultiValidCategory::CorrectKept
    } else if any_hit {
        MultiValidCategory::IncorrectToValid
    } else {
        return MultiValidOutcome {
            category: MultiValidCategory::StillIncorrect,
            coverage: None,
        };
    };
    let coverage = if valid_answers.iter().all(hit) {
        ValidCoverage::AllValidCovered
    } else {
        ValidCoverage::Partial
    };
    MultiValidOutcome {
        category,
        coverage: Some(coverage),
    }
}

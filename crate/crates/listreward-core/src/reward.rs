//! Reward functions: correctness per answer format, rank-aware MRR, length
//! penalty, format reward, and their equal-weight composition. All pure and
//! deterministic except the judge-backed kind.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AnswerFormat, QuestionRecord};
use crate::judge::{JudgeError, RankJudge};
use crate::parse::{
    extract_boxed, extract_choice, extract_think_structure, normalize, parse_ranked_list,
    RawResponse, ThinkStructure,
};

/// Which reward to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    Mcq,
    Qa,
    ListAcc,
    ListMrr,
    ListJudgeMrr,
}

impl RewardKind {
    pub fn answer_format(&self) -> AnswerFormat {
        match self {
            RewardKind::Mcq => AnswerFormat::Mcq,
            RewardKind::Qa => AnswerFormat::Qa,
            RewardKind::ListAcc | RewardKind::ListMrr | RewardKind::ListJudgeMrr => {
                AnswerFormat::List
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardConfig {
    pub kind: RewardKind,
    #[serde(default)]
    pub use_format_reward: bool,
    /// Length-penalty coefficient; list kinds without a judge only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl RewardConfig {
    pub fn new(kind: RewardKind) -> Self {
        Self {
            kind,
            use_format_reward: false,
            lambda: None,
        }
    }

    pub fn validate(&self) -> Result<(), RewardConfigError> {
        if let Some(lambda) = self.lambda {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(RewardConfigError::LambdaOutOfRange(lambda));
            }
            if !matches!(self.kind, RewardKind::ListAcc | RewardKind::ListMrr) {
                return Err(RewardConfigError::LambdaKindMismatch(self.kind));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RewardConfigError {
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("lambda is only valid for list-acc and list-mrr, not {0:?}")]
    LambdaKindMismatch(RewardKind),
}

/// Scored result with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub correctness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<u8>,
    pub total: f64,
    /// 1-based position of the first correct item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list_length: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Config(#[from] RewardConfigError),
    #[error("reward kind {kind:?} incompatible with record format {format:?}")]
    FormatMismatch {
        kind: RewardKind,
        format: AnswerFormat,
    },
    #[error("judge-backed reward kind requires a judge binding")]
    JudgeRequired,
    #[error(transparent)]
    Judge(#[from] JudgeError),
}

/// MCQ correctness: exact letter match, case-insensitive. Unparsable
/// predictions score zero.
pub fn reward_mcq(pred: Option<char>, gold: char) -> u8 {
    match pred {
        Some(p) => u8::from(p.to_ascii_uppercase() == gold.to_ascii_uppercase()),
        None => 0,
    }
}

/// QA correctness: 1 iff the normalized gold is a substring of the
/// normalized prediction. Directional.
pub fn reward_qa(pred: &str, gold: &str) -> u8 {
    debug_assert!(!gold.is_empty());
    u8::from(normalize(pred).contains(&normalize(gold)))
}

/// List correctness: the list as an unordered set, max of per-item QA
/// rewards. Empty list scores zero.
pub fn reward_list(items: &[String], gold: &str) -> u8 {
    items
        .iter()
        .map(|item| reward_qa(item, gold))
        .max()
        .unwrap_or(0)
}

/// Rank-aware correctness: 1/r for the first matching item (1-indexed),
/// zero with no rank when nothing matches.
pub fn reward_mrr(items: &[String], gold: &str) -> (f64, Option<u32>) {
    match items.iter().position(|item| reward_qa(item, gold) == 1) {
        Some(idx) => {
            let rank = idx as u32 + 1;
            (1.0 / rank as f64, Some(rank))
        }
        None => (0.0, None),
    }
}

/// Length penalty LP = max(0, 1 - lambda * (L - 1)). L = 0 is treated as
/// L = 1; correctness is already zero for empty lists.
pub fn length_penalty(list_length: u32, lambda: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&lambda));
    let effective_len = list_length.max(1);
    (1.0 - lambda * (effective_len - 1) as f64).max(0.0)
}

/// Format reward: 1 iff the think structure is well-formed.
pub fn reward_format(structure: &ThinkStructure) -> u8 {
    u8::from(structure.well_formed)
}

/// Equal-weight composition. The penalty scales correctness first; the
/// format component is then averaged in when present.
pub fn compose(correctness: f64, penalty: Option<f64>, format: Option<u8>) -> f64 {
    let effective = correctness * penalty.unwrap_or(1.0);
    match format {
        Some(f) => (effective + f as f64) / 2.0,
        None => effective,
    }
}

/// Scores one raw response against its record end to end: think-structure
/// split, payload extraction per kind, correctness, optional length
/// penalty, and composition.
///
/// The QA substring match runs over the extracted answer region (boxed
/// content when present, else the body), never the think segment.
pub fn score_response(
    raw: &RawResponse,
    record: &QuestionRecord,
    config: &RewardConfig,
    judge: Option<&dyn RankJudge>,
) -> Result<RewardOutcome, ScoreError> {
    config.validate()?;
    if config.kind.answer_format() != record.format {
        return Err(ScoreError::FormatMismatch {
            kind: config.kind,
            format: record.format,
        });
    }

    let structure = extract_think_structure(raw);
    let format = config.use_format_reward.then(|| reward_format(&structure));
    let body = &structure.body;

    let (correctness, rank, list_length, penalty) = match config.kind {
        RewardKind::Mcq => {
            let labels = record.option_labels();
            let pred = extract_choice(body, &labels);
            let gold = record.gold.chars().next().unwrap_or('?');
            (reward_mcq(pred, gold) as f64, None, None, None)
        }
        RewardKind::Qa => {
            let region = extract_boxed(body).unwrap_or_else(|| body.clone());
            (reward_qa(&region, &record.gold) as f64, None, None, None)
        }
        RewardKind::ListAcc => {
            let items = parse_ranked_list(body);
            let len = items.len() as u32;
            let correctness = reward_list(&items, &record.gold) as f64;
            let penalty = config.lambda.map(|l| length_penalty(len, l));
            (correctness, None, Some(len), penalty)
        }
        RewardKind::ListMrr => {
            let items = parse_ranked_list(body);
            let len = items.len() as u32;
            let (correctness, rank) = reward_mrr(&items, &record.gold);
            let penalty = config.lambda.map(|l| length_penalty(len, l));
            (correctness, rank, Some(len), penalty)
        }
        RewardKind::ListJudgeMrr => {
            let judge = judge.ok_or(ScoreError::JudgeRequired)?;
            let items = parse_ranked_list(body);
            let len = items.len() as u32;
            if items.is_empty() {
                (0.0, None, Some(0), None)
            } else {
                let rank = judge.rank_items(&record.question, &record.gold, &items)?;
                let correctness = rank.map_or(0.0, |r| 1.0 / r as f64);
                (correctness, rank, Some(len), None)
            }
        }
    };

    let total = compose(correctness, penalty, format);
    Ok(RewardOutcome {
        correctness,
        format,
        total,
        rank,
        list_length,
        penalty,
    })
}

//! Batch scoring over many (response, record) pairs.
//!
//! With the `parallel` feature (default) non-judge scoring fans out across
//! a rayon pool; `score_batch_sequential` is always available and is the
//! fallback without the feature. Output order is input order either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::data::QuestionRecord;
use crate::judge::RankJudge;
use crate::parse::RawResponse;
use crate::reward::{score_response, RewardConfig, RewardOutcome, ScoreError};

pub type BatchItem<'a> = (&'a RawResponse, &'a QuestionRecord);

/// Scores every pair sequentially.
pub fn score_batch_sequential(
    pairs: &[BatchItem<'_>],
    config: &RewardConfig,
    judge: Option<&dyn RankJudge>,
) -> Vec<Result<RewardOutcome, ScoreError>> {
    pairs
        .iter()
        .map(|(raw, record)| score_response(raw, record, config, judge))
        .collect()
}

/// Scores every pair, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn score_batch(
    pairs: &[BatchItem<'_>],
    config: &RewardConfig,
    judge: Option<&dyn RankJudge>,
) -> Vec<Result<RewardOutcome, ScoreError>> {
    pairs
        .par_iter()
        .map(|(raw, record)| score_response(raw, record, config, judge))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn score_batch(
    pairs: &[BatchItem<'_>],
    config: &RewardConfig,
    judge: Option<&dyn RankJudge>,
) -> Vec<Result<RewardOutcome, ScoreError>> {
    score_batch_sequential(pairs, config, judge)
}

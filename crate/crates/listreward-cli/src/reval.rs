//! `listreward reval-multi`: re-score list responses against
//! multi-valid-answer metadata and tally the category shifts.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use listreward_core::data::{load_records, AnswerFormat};
use listreward_core::metric::{
    multi_valid_reclassify, MultiValidCategory, MultiValidOutcome, ValidCoverage,
};
use crate::eval::build_eval_records;
use crate::manifest::RunManifest;
use crate::responses::load_responses;
use crate::score::CommandError;

#[derive(Debug, Clone)]
pub struct RevalOptions {
    pub dataset: PathBuf,
    pub responses: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevalTallies {
    pub n: usize,
    pub correct_kept: usize,
    pub incorrect_to_valid: usize,
    pub still_incorrect: usize,
    pub all_valid_covered: usize,
    pub partial: usize,
    /// Records whose metadata lists more than one valid answer.
    pub multi_valid_records: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RevalLine {
    pub record_id: String,
    #[serde(flatten)]
    pub outcome: MultiValidOutcome,
}

#[derive(Debug)]
pub struct RevalRun {
    pub lines: Vec<RevalLine>,
    pub tallies: RevalTallies,
}

pub fn run_reval(opts: &RevalOptions) -> Result<RevalRun, CommandError> {
    let records = load_records(&opts.dataset, Some(AnswerFormat::List))
        .map_err(|e| CommandError::Schema(e.to_string()))?;
    let responses =
        load_responses(&opts.responses).map_err(|e| CommandError::Schema(e.to_string()))?;
    for record in &records {
        if record.valid_answers.is_none() {
            return Err(CommandError::Schema(format!(
                "record `{}` has no valid_answers metadata",
                record.id
            )));
        }
    }

    let rows = build_eval_records(&records, &responses)?;
    let by_id: HashMap<&str, &listreward_core::data::QuestionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();

    let mut tallies = RevalTallies::default();
    let mut lines = Vec::with_capacity(rows.len());
    for row in &rows {
        let record = by_id[row.record_id.as_str()];
        let valid = record.valid_answers.as_ref().unwrap();
        if valid.len() > 1 {
            tallies.multi_valid_records += 1;
        }
        let outcome = multi_valid_reclassify(row, valid);
        tallies.n += 1;
        match outcome.category {
            MultiValidCategory::CorrectKept => tallies.correct_kept += 1,
            MultiValidCategory::IncorrectToValid => tallies.incorrect_to_valid += 1,
            MultiValidCategory::StillIncorrect => tallies.still_incorrect += 1,
        }
        match outcome.coverage {
            Some(ValidCoverage::AllValidCovered) => tallies.all_valid_covered += 1,
            Some(ValidCoverage::Partial) => tallies.partial += 1,
            None => {}
        }
        lines.push(RevalLine {
            record_id: row.record_id.clone(),
            outcome,
        });
    }
    Ok(RevalRun { lines, tallies })
}

/// Runs the re-evaluation and writes `reval.jsonl`, `tallies.json`, and
/// `manifest.json`.
pub fn cmd_reval_multi(opts: &RevalOptions) -> Result<RevalRun, CommandError> {
    let mut manifest = RunManifest::start("reval-multi", serde_json::json!({}));
    manifest
        .checksum_input(&opts.dataset)
        .map_err(|e| CommandError::Schema(e.to_string()))?;
    manifest
        .checksum_input(&opts.responses)
        .map_err(|e| CommandError::Schema(e.to_string()))?;

    let run = run_reval(opts)?;

    std::fs::create_dir_all(&opts.out_dir).map_err(anyhow::Error::from)?;
    let mut file =
        std::fs::File::create(opts.out_dir.join("reval.jsonl")).map_err(anyhow::Error::from)?;
    for line in &run.lines {
        serde_json::to_writer(&mut file, line).map_err(anyhow::Error::from)?;
        file.write_all(b"\n").map_err(anyhow::Error::from)?;
    }
    std::fs::write(
        opts.out_dir.join("tallies.json"),
        serde_json::to_string_pretty(&run.tallies).unwrap(),
    )
    .map_err(anyhow::Error::from)?;
    manifest.finish();
    manifest.write(&opts.out_dir).map_err(anyhow::Error::from)?;
    Ok(run)
}

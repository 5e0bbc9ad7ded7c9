//! `listreward convert`: MCQ-to-QA dataset conversion with a resumable
//! skip-log.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use listreward_core::data::{
    convert_mcq, load_records, AnswerFormat, ConversionParams, DataError, QuestionRecord,
};
use listreward_core::judge::ChatBackend;

use crate::manifest::RunManifest;
use crate::score::CommandError;

#[derive(Debug, Clone)]
pub struct ConvertOptions {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub threshold: f64,
    pub resume: bool,
}

/// One skip-log entry: a record that was processed but not emitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipEntry {
    pub record_id: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct ConvertRun {
    pub converted: usize,
    pub skipped: usize,
    /// Records already present from a previous run (resume only).
    pub resumed: usize,
}

fn completed_ids(out_path: &Path, skip_path: &Path) -> Result<HashSet<String>, CommandError> {
    let mut ids = HashSet::new();
    if out_path.exists() {
        for record in load_records(out_path, None)
            .map_err(|e| CommandError::Schema(format!("resume output: {e}")))?
        {
            ids.insert(record.id);
        }
    }
    if skip_path.exists() {
        let content = std::fs::read_to_string(skip_path).map_err(anyhow::Error::from)?;
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            let entry: SkipEntry = serde_json::from_str(line)
                .map_err(|e| CommandError::Schema(format!("resume skip-log: {e}")))?;
            ids.insert(entry.record_id);
        }
    }
    Ok(ids)
}

/// Converts the dataset item by item, appending to `converted.jsonl` and
/// `skipped.jsonl`. With `resume`, ids present in either file are not
/// re-called.
pub fn cmd_convert(
    opts: &ConvertOptions,
    client: &dyn ChatBackend,
) -> Result<ConvertRun, CommandError> {
    let records = load_records(&opts.dataset, Some(AnswerFormat::Mcq))
        .map_err(|e| CommandError::Schema(e.to_string()))?;

    std::fs::create_dir_all(&opts.out_dir).map_err(anyhow::Error::from)?;
    let out_path = opts.out_dir.join("converted.jsonl");
    let skip_path = opts.out_dir.join("skipped.jsonl");

    let done = if opts.resume {
        completed_ids(&out_path, &skip_path)?
    } else {
        HashSet::new()
    };

    let mut manifest = RunManifest::start(
        "convert",
        serde_json::json!({ "threshold": opts.threshold, "resume": opts.resume }),
    );
    manifest
        .checksum_input(&opts.dataset)
        .map_err(|e| CommandError::Schema(e.to_string()))?;

    let params = ConversionParams {
        confidence_threshold: opts.threshold,
        ..Default::default()
    };
    // Fresh runs truncate; resumed runs append.
    let open = |path: &Path| {
        let mut options = std::fs::OpenOptions::new();
        options.create(true).write(true);
        if opts.resume {
            options.append(true);
        } else {
            options.truncate(true);
        }
        options.open(path)
    };
    let mut out_file = open(&out_path).map_err(anyhow::Error::from)?;
    let mut skip_file = open(&skip_path).map_err(anyhow::Error::from)?;

    let mut run = ConvertRun {
        converted: 0,
        skipped: 0,
        resumed: done.len(),
    };
    for record in &records {
        if done.contains(&record.id) {
            continue;
        }
        match convert_mcq(record, client, &params) {
            Ok(Some(converted)) => {
                write_jsonl(&mut out_file, &converted)?;
                run.converted += 1;
            }
            Ok(None) => {
                write_jsonl(
                    &mut skip_file,
                    &SkipEntry {
                        record_id: record.id.clone(),
                        reason: "not convertible or below confidence threshold".into(),
                    },
                )?;
                run.skipped += 1;
            }
            Err(DataError::Judge(e)) => {
                manifest.mark_failed(e.to_string());
                let _ = manifest.write(&opts.out_dir);
                return Err(CommandError::JudgeUnavailable(e.to_string()));
            }
            Err(e) => {
                manifest.mark_failed(e.to_string());
                let _ = manifest.write(&opts.out_dir);
                return Err(CommandError::Schema(e.to_string()));
            }
        }
    }

    manifest.finish();
    manifest.write(&opts.out_dir).map_err(anyhow::Error::from)?;
    Ok(run)
}

fn write_jsonl<T: Serialize>(file: &mut std::fs::File, value: &T) -> Result<(), CommandError> {
    serde_json::to_writer(&mut *file, value).map_err(anyhow::Error::from)?;
    file.write_all(b"\n").map_err(anyhow::Error::from)?;
    Ok(())
}

/// Converted records carry the original id, so output order follows input
/// order and resume never double-emits.
pub fn load_converted(out_dir: &Path) -> Result<Vec<QuestionRecord>, CommandError> {
    load_records(out_dir.join("converted.jsonl"), Some(AnswerFormat::Qa))
        .map_err(|e| CommandError::Schema(e.to_string()))
}

//! Responses file: JSONL, one model output per line, keyed to a dataset
//! record by id.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseLine {
    pub record_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ResponsesError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn load_responses(path: impl AsRef<Path>) -> Result<Vec<ResponseLine>, ResponsesError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ResponseLine =
            serde_json::from_str(&line).map_err(|e| ResponsesError::Schema {
                line: idx + 1,
                message: e.to_string(),
            })?;
        out.push(parsed);
    }
    Ok(out)
}

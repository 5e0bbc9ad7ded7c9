//! Dataset schemas, JSONL IO, prompt-template rendering, MCQ-to-QA
//! conversion, and the rejection-sampling validator.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::{ChatBackend, JudgeError};
use crate::parse::normalize;

/// Answer format of a benchmark item or response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerFormat {
    Mcq,
    Qa,
    List,
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub benchmark: String,
    pub question: String,
    /// Labeled options, MCQ only. Ordered by label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<BTreeMap<char, String>>,
    /// Gold answer: a letter for MCQ, answer text otherwise.
    pub gold: String,
    /// Expert-validated alternative answers, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_answers: Option<Vec<String>>,
    pub format: AnswerFormat,
    /// Conversion metadata for records produced by `convert_mcq`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversion: Option<ConversionVerdict>,
}

impl QuestionRecord {
    /// Allowed choice letters, MCQ only.
    pub fn option_labels(&self) -> Vec<char> {
        self.options
            .as_ref()
            .map(|o| o.keys().copied().collect())
            .unwrap_or_default()
    }

    fn validate(&self) -> Result<(), String> {
        match self.format {
            AnswerFormat::Mcq => {
                let options = self.options.as_ref().ok_or("options")?;
                let mut letters = self.gold.chars();
                let letter = letters.next().ok_or("gold")?;
                if letters.next().is_some() || !options.contains_key(&letter.to_ascii_uppercase()) {
                    return Err("gold".into());
                }
            }
            AnswerFormat::Qa | AnswerFormat::List => {
                if self.gold.trim().is_empty() {
                    return Err("gold".into());
                }
                if let Some(valid) = &self.valid_answers {
                    let gold_norm = normalize(&self.gold);
                    if !valid.iter().any(|v| normalize(v) == gold_norm) {
                        return Err("valid_answers".into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parsed reply of the MCQ-to-QA conversion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionVerdict {
    pub convertible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    pub confidence: f64,
    #[serde(default)]
    pub rationale: String,
}

impl Eq for ConversionVerdict {}

/// The six prompt templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTemplateId {
    Mcq,
    McqCot,
    Qa,
    QaCot,
    List,
    ListCot,
}

impl PromptTemplateId {
    pub const ALL: [PromptTemplateId; 6] = [
        PromptTemplateId::Mcq,
        PromptTemplateId::McqCot,
        PromptTemplateId::Qa,
        PromptTemplateId::QaCot,
        PromptTemplateId::List,
        PromptTemplateId::ListCot,
    ];

    pub fn asset(&self) -> &'static str {
        match self {
            PromptTemplateId::Mcq => include_str!("../assets/templates/mcq.txt"),
            PromptTemplateId::McqCot => include_str!("../assets/templates/mcq_cot.txt"),
            PromptTemplateId::Qa => include_str!("../assets/templates/qa.txt"),
            PromptTemplateId::QaCot => include_str!("../assets/templates/qa_cot.txt"),
            PromptTemplateId::List => include_str!("../assets/templates/list.txt"),
            PromptTemplateId::ListCot => include_str!("../assets/templates/list_cot.txt"),
        }
    }

    pub fn format(&self) -> AnswerFormat {
        match self {
            PromptTemplateId::Mcq | PromptTemplateId::McqCot => AnswerFormat::Mcq,
            PromptTemplateId::Qa | PromptTemplateId::QaCot => AnswerFormat::Qa,
            PromptTemplateId::List | PromptTemplateId::ListCot => AnswerFormat::List,
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: invalid or missing field `{field}`")]
    Schema { line: usize, field: String },
    #[error("line {line}: duplicate record id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("template/record format mismatch: {template:?} vs {record:?}")]
    IncompatibleFormat {
        template: AnswerFormat,
        record: AnswerFormat,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("conversion reply did not parse after retries: {0}")]
    ReplyParse(String),
}

/// Loads a JSONL dataset, validating each record's schema. Duplicate ids
/// are rejected; errors carry the 1-based line number.
pub fn load_records(
    path: impl AsRef<Path>,
    expected_format: Option<AnswerFormat>,
) -> Result<Vec<QuestionRecord>, DataError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionRecord =
            serde_json::from_str(&line).map_err(|e| DataError::Schema {
                line: line_no,
                field: e.to_string(),
            })?;
        record.validate().map_err(|field| DataError::Schema {
            line: line_no,
            field,
        })?;
        if let Some(expected) = expected_format {
            if record.format != expected {
                return Err(DataError::Schema {
                    line: line_no,
                    field: "format".into(),
                });
            }
        }
        if !seen.insert(record.id.clone()) {
            return Err(DataError::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records as JSONL, one object per line.
pub fn save_records(
    path: impl AsRef<Path>,
    records: &[QuestionRecord],
) -> Result<(), DataError> {
    let mut file = std::fs::File::create(path)?;
    for record in records {
        serde_json::to_writer(&mut file, record).map_err(std::io::Error::other)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

fn render_options(options: &BTreeMap<char, String>) -> String {
    options
        .iter()
        .map(|(label, text)| format!("{label}. {text}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders a prompt for a record. MCQ templates require options.
pub fn render_prompt(
    template: PromptTemplateId,
    record: &QuestionRecord,
) -> Result<String, DataError> {
    if template.format() != record.format {
        return Err(DataError::IncompatibleFormat {
            template: template.format(),
            record: record.format,
        });
    }
    let mut prompt = template.asset().replace("{{question}}", &record.question);
    if let Some(options) = &record.options {
        prompt = prompt.replace("{{options}}", &render_options(options));
    }
    Ok(prompt)
}

/// Parameters for the MCQ-to-QA conversion call.
#[derive(Debug, Clone)]
pub struct ConversionParams {
    pub confidence_threshold: f64,
    pub max_retries: u32,
}

impl Default for ConversionParams {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.7,
            max_retries: 2,
        }
    }
}

pub const MCQ_TO_QA_PROMPT: &str = include_str!("../assets/templates/mcq_to_qa.txt");

fn render_conversion_prompt(record: &QuestionRecord) -> String {
    let options = record
        .options
        .as_ref()
        .map(render_options)
        .unwrap_or_default();
    let gold_letter = record.gold.chars().next().unwrap_or('?');
    let gold_text = record
        .options
        .as_ref()
        .and_then(|o| o.get(&gold_letter.to_ascii_uppercase()))
        .cloned()
        .unwrap_or_default();
    MCQ_TO_QA_PROMPT
        .replace("{{question}}", &record.question)
        .replace("{{options}}", &options)
        .replace("{{gold_letter}}", &record.gold)
        .replace("{{gold_text}}", &gold_text)
}

fn parse_conversion_reply(reply: &str) -> Option<ConversionVerdict> {
    // The reply must contain a JSON object; tolerate prose around it.
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    let verdict: ConversionVerdict = serde_json::from_str(&reply[start..=end]).ok()?;
    if !(0.0..=1.0).contains(&verdict.confidence) {
        return None;
    }
    if verdict.convertible && verdict.question.is_none() {
        return None;
    }
    Some(verdict)
}

/// Converts one MCQ record to open-ended QA with a single LLM call.
///
/// Returns the QA record when the verdict is convertible with confidence at
/// or above the threshold; the gold becomes the gold option's text. The
/// verdict (confidence, rationale) rides along in the `conversion` field.
pub fn convert_mcq(
    record: &QuestionRecord,
    client: &dyn ChatBackend,
    params: &ConversionParams,
) -> Result<Option<QuestionRecord>, DataError> {
    assert_eq!(record.format, AnswerFormat::Mcq, "convert_mcq needs an MCQ record");
    let prompt = render_conversion_prompt(record);

    let mut last_err = String::new();
    let mut verdict = None;
    for _ in 0..=params.max_retries {
        let reply = client.complete(&prompt)?;
        match parse_conversion_reply(&reply) {
            Some(v) => {
                verdict = Some(v);
                break;
            }
            None => last_err = reply,
        }
    }
    let verdict = verdict.ok_or(DataError::ReplyParse(last_err))?;

    if !verdict.convertible || verdict.confidence < params.confidence_threshold {
        return Ok(None);
    }
    let gold_letter = record.gold.chars().next().unwrap_or('?').to_ascii_uppercase();
    let gold_text = record
        .options
        .as_ref()
        .and_then(|o| o.get(&gold_letter))
        .cloned()
        .ok_or_else(|| DataError::Schema {
            line: 0,
            field: "gold".into(),
        })?;
    Ok(Some(QuestionRecord {
        id: record.id.clone(),
        benchmark: record.benchmark.clone(),
        question: verdict.question.clone().unwrap_or_default(),
        options: None,
        gold: gold_text,
        valid_answers: None,
        format: AnswerFormat::Qa,
        conversion: Some(verdict),
    }))
}

/// Keeps records whose verdict confidence is at or above the threshold.
/// Order is stable.
pub fn filter_by_confidence<T>(
    records: Vec<(T, ConversionVerdict)>,
    threshold: f64,
) -> Vec<(T, ConversionVerdict)> {
    records
        .into_iter()
        .filter(|(_, v)| v.confidence >= threshold)
        .collect()
}

/// Outcome of rejection-sampling validation for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RejectionOutcome {
    pub accepted: bool,
    pub attempts_used: u32,
}

/// Validates candidate responses against a record, regenerating until one is
/// accepted or the attempt budget runs out.
///
/// `validate` scores a candidate (true = accept); `regenerate` produces the
/// next candidate. The first candidate counts as attempt 1.
pub fn rejection_validate<E>(
    first_candidate: String,
    budget: u32,
    mut validate: impl FnMut(&str) -> Result<bool, E>,
    mut regenerate: impl FnMut() -> Result<String, E>,
) -> Result<RejectionOutcome, E> {
    assert!(budget >= 1, "budget must be at least 1");
    let mut candidate = first_candidate;
    for attempt in 1..=budget {
        if validate(&candidate)? {
            return Ok(RejectionOutcome {
                accepted: true,
                attempts_used: attempt,
            });
        }
        if attempt < budget {
            candidate = regenerate()?;
        }
    }
    Ok(RejectionOutcome {
        accepted: false,
        attempts_used: budget,
    })
}

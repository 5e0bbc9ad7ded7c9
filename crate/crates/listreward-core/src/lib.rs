//! Verifiable rewards and evaluation metrics for reasoning-model answers in
//! multiple-choice, short-text, and ranked-list formats.
//!
//! - [`parse`] — answer extraction and normalization
//! - [`reward`] — correctness, rank-aware, length-penalized, format, and
//!   composed rewards
//! - [`judge`] — LLM-judge client and verdict parsing
//! - [`metric`] — Acc/MRR/CP/LL/VLL metrics and multi-valid re-evaluation
//! - [`data`] — dataset schemas, prompt templates, MCQ-to-QA conversion,
//!   rejection-sampling validation
//! - [`batch`] — data-parallel batch scoring

pub mod batch;
pub mod data;
pub mod judge;
pub mod metric;
pub mod parse;
pub mod reward;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

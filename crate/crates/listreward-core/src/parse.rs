//! Deterministic answer extraction from raw model text.
//!
//! Handles the three answer formats (choice letter, short text, ranked list)
//! plus think-tag structure and `\boxed{}` payloads. Everything here is a
//! pure function over immutable inputs.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// A raw model output, stored verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    /// Token count of the response, when the caller has it (length statistics).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<u64>,
}

impl RawResponse {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            token_count: None,
        }
    }
}

/// Result of splitting a response into `<think>` segment and answer body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThinkStructure {
    /// True iff exactly one `<think>`/`</think>` pair occurs, in order, with
    /// `<think>` at the start of the text modulo leading whitespace.
    pub well_formed: bool,
    pub think: Option<String>,
    /// Text after the close tag, or the whole text when tagging is malformed.
    pub body: String,
}

/// Extracted answer payload in one of the three supported formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerPayload {
    Choice(char),
    Short(String),
    RankedList(Vec<String>),
}

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";

/// Splits a response into think segment and answer body.
///
/// Total: malformed tagging never fails, it yields `well_formed: false` with
/// the full text as the body.
pub fn extract_think_structure(raw: &RawResponse) -> ThinkStructure {
    let text = &raw.text;
    let malformed = || ThinkStructure {
        well_formed: false,
        think: None,
        body: text.clone(),
    };

    let open_count = text.matches(THINK_OPEN).count();
    let close_count = text.matches(THINK_CLOSE).count();
    if open_count != 1 || close_count != 1 {
        return malformed();
    }

    let trimmed = text.trim_start();
    if !trimmed.starts_with(THINK_OPEN) {
        return malformed();
    }
    let after_open = &trimmed[THINK_OPEN.len()..];
    let Some(close_at) = after_open.find(THINK_CLOSE) else {
        return malformed();
    };
    let think = &after_open[..close_at];
    let body = &after_open[close_at + THINK_CLOSE.len()..];
    // The single close tag must follow the single open tag; a stray close
    // before the open would have failed the starts_with check already.
    ThinkStructure {
        well_formed: true,
        think: Some(think.to_string()),
        body: body.to_string(),
    }
}

/// Returns the content of the last balanced `\boxed{...}` in `body`.
///
/// Nested braces are matched; an unbalanced occurrence is skipped.
pub fn extract_boxed(body: &str) -> Option<String> {
    const MARKER: &str = "\\boxed{";
    let mut last = None;
    let mut search_from = 0;
    while let Some(pos) = body[search_from..].find(MARKER) {
        let start = search_from + pos + MARKER.len();
        let mut depth = 1usize;
        let mut end = None;
        for (i, c) in body[start..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(start + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(end) => {
                last = Some(body[start..end].to_string());
                search_from = end + 1;
            }
            // Unbalanced: nothing after this point can close, stop scanning.
            None => break,
        }
    }
    last
}

fn is_standalone_letter(token: &str, allowed: &[char]) -> Option<char> {
    let stripped: Vec<char> = token
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .chars()
        .collect();
    match stripped.as_slice() {
        [c] => {
            let upper = c.to_ascii_uppercase();
            allowed.contains(&upper).then_some(upper)
        }
        _ => None,
    }
}

/// Extracts a multiple-choice letter from the answer body.
///
/// Resolution order: boxed lone letter, then a leading letter followed by a
/// non-alphanumeric boundary, then the first standalone letter token.
pub fn extract_choice(body: &str, allowed_labels: &[char]) -> Option<char> {
    debug_assert!(!allowed_labels.is_empty());
    let allowed: Vec<char> = allowed_labels
        .iter()
        .map(|c| c.to_ascii_uppercase())
        .collect();

    if let Some(boxed) = extract_boxed(body) {
        if let Some(c) = is_standalone_letter(&boxed, &allowed) {
            return Some(c);
        }
    }

    // Leading letter such as "A." or "B) ..." — must be followed by a
    // non-alphanumeric boundary so "Amoxil" does not read as A.
    let trimmed = body.trim_start();
    let mut chars = trimmed.chars();
    if let Some(first) = chars.next() {
        let upper = first.to_ascii_uppercase();
        if allowed.contains(&upper) {
            match chars.next() {
                None => return Some(upper),
                Some(next) if !next.is_alphanumeric() => return Some(upper),
                _ => {}
            }
        }
    }

    body.split_whitespace()
        .find_map(|token| is_standalone_letter(token, &allowed))
}

/// Configurable ranked-list grammar. The enumerated-line syntax mirrors the
/// one-shot example shipped in the list prompt template; keep the two in sync
/// if either is edited.
#[derive(Debug, Clone)]
pub struct ListParseOptions {
    /// Separators used to split a boxed payload into items.
    pub boxed_separators: Vec<char>,
    /// Accept `k)` in addition to `k.` as enumeration markers.
    pub allow_paren_enumeration: bool,
}

impl Default for ListParseOptions {
    fn default() -> Self {
        Self {
            boxed_separators: vec![';', '\n'],
            allow_paren_enumeration: true,
        }
    }
}

/// Parses a ranked list from the answer body with the default grammar.
pub fn parse_ranked_list(body: &str) -> Vec<String> {
    parse_ranked_list_with(body, &ListParseOptions::default())
}

/// Parses a ranked list, in priority order: enumerated lines (`1.`, `2.` ...
/// consecutive from 1), bullet lines, a boxed payload split on separators,
/// then a singleton fallback. Order preserved, duplicates retained.
pub fn parse_ranked_list_with(body: &str, opts: &ListParseOptions) -> Vec<String> {
    let trimmed = body.trim();
    if trimmed.is_empty() {
        return Vec::new();
    }

    if let Some(items) = parse_enumerated_lines(trimmed, opts) {
        return items;
    }
    if let Some(items) = parse_bullet_lines(trimmed) {
        return items;
    }
    if let Some(boxed) = extract_boxed(trimmed) {
        let items: Vec<String> = boxed
            .split(|c: char| opts.boxed_separators.contains(&c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if !items.is_empty() {
            return items;
        }
    }
    vec![trimmed.to_string()]
}

/// Matches a line against `k.` / `k)` enumeration and returns (k, rest).
fn enumeration_item(line: &str, opts: &ListParseOptions) -> Option<(u64, String)> {
    let line = line.trim_start();
    let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let rest = &line[digits.len()..];
    let marker_ok = rest.starts_with('.') || (opts.allow_paren_enumeration && rest.starts_with(')'));
    if !marker_ok {
        return None;
    }
    let k: u64 = digits.parse().ok()?;
    Some((k, rest[1..].trim().to_string()))
}

/// Enumerated lines count as a list only when numbering starts at 1 and is
/// consecutive; prose like "2. see above" falls through.
fn parse_enumerated_lines(body: &str, opts: &ListParseOptions) -> Option<Vec<String>> {
    let mut items = Vec::new();
    let mut expected = 1u64;
    for line in body.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match enumeration_item(line, opts) {
            Some((k, item)) if k == expected => {
                if !item.is_empty() {
                    items.push(item);
                }
                expected += 1;
            }
            Some(_) => return None,
            // Non-enumerated lines surrounding the list (preamble, trailing
            // prose) are ignored once at least one item matched.
            None => continue,
        }
    }
    (!items.is_empty()).then_some(items)
}

fn parse_bullet_lines(body: &str) -> Option<Vec<String>> {
    let items: Vec<String> = body
        .lines()
        .filter_map(|line| {
            let line = line.trim_start();
            let rest = line.strip_prefix("- ").or_else(|| line.strip_prefix("* "))?;
            let rest = rest.trim();
            (!rest.is_empty()).then(|| rest.to_string())
        })
        .collect();
    (!items.is_empty()).then_some(items)
}

const STRIP_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')'];

/// Normalizes answer text for matching: NFC, lowercase, trim, collapse
/// whitespace, strip leading/trailing ASCII punctuation. Idempotent.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let lowered = nfc.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_matches(|c: char| STRIP_PUNCT.contains(&c) || c.is_whitespace())
        .to_string()
}

//! LLM-judge client: prompt rendering, verdict parsing, and a retrying
//! backend wrapper with bounded in-flight concurrency.
//!
//! Templates ship as editable assets with `{{question}}`, `{{gold}}` and
//! `{{items}}` placeholders; an override directory can replace them per
//! protocol.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which judge prompt to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeProtocol {
    /// Full MRR judge with anti-gaming validation rules.
    FullMrr,
    /// Simplified MRR judge (kept to reproduce its exploitability).
    SimpleMrr,
    /// Single-answer equivalence for QA accuracy.
    QaAcc,
}

impl JudgeProtocol {
    fn default_template(&self) -> &'static str {
        match self {
            JudgeProtocol::FullMrr => include_str!("../assets/judge/full_mrr.txt"),
            JudgeProtocol::SimpleMrr => include_str!("../assets/judge/simple_mrr.txt"),
            JudgeProtocol::QaAcc => include_str!("../assets/judge/qa_acc.txt"),
        }
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            JudgeProtocol::FullMrr => "full_mrr.txt",
            JudgeProtocol::SimpleMrr => "simple_mrr.txt",
            JudgeProtocol::QaAcc => "qa_acc.txt",
        }
    }
}

/// One judging task: does any item match the gold, and at which rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeRequest {
    pub question: String,
    pub gold: String,
    pub items: Vec<String>,
    pub protocol: JudgeProtocol,
}

/// Parsed judge reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    /// 1-based rank of the first equivalent item, when the judge found one.
    pub rank: Option<u32>,
    /// QA_ACC view: the judge declared the candidate equivalent.
    pub equivalent: bool,
    pub raw_reply: String,
    pub parse_ok: bool,
}

#[derive(Debug, Clone)]
pub struct JudgeClientConfig {
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub timeout: Duration,
    /// Exact-request memo cache, off by default.
    pub memoize: bool,
}

impl Default for JudgeClientConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model_name: String::new(),
            temperature: 0.0,
            max_retries: 3,
            max_in_flight: 8,
            timeout: Duration::from_secs(60),
            memoize: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge unavailable after {attempts} attempts: {last_error}")]
    Unavailable { attempts: u32, last_error: String },
    #[error("judge template missing: {0}")]
    TemplateMissing(String),
    #[error("transport error: {0}")]
    Transport(String),
}

/// Environment variable holding the judge API key.
pub const API_KEY_ENV: &str = "LISTREWARD_JUDGE_API_KEY";

/// A completion backend: prompt in, reply text out. Implementations must be
/// callable concurrently.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, JudgeError>;
}

/// Loads the template for a protocol, preferring an override directory.
pub fn load_template(
    protocol: JudgeProtocol,
    override_dir: Option<&Path>,
) -> Result<String, JudgeError> {
    match override_dir {
        Some(dir) => {
            let path = dir.join(protocol.file_name());
            std::fs::read_to_string(&path)
                .map_err(|_| JudgeError::TemplateMissing(path.display().to_string()))
        }
        None => Ok(protocol.default_template().to_string()),
    }
}

fn numbered_items(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| format!("{}. {}", i + 1, item))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders the judge prompt for a request. Item numbering starts at 1 and
/// follows request order.
pub fn render_judge_prompt(req: &JudgeRequest) -> Result<String, JudgeError> {
    render_judge_prompt_with(req, None)
}

pub fn render_judge_prompt_with(
    req: &JudgeRequest,
    override_dir: Option<&Path>,
) -> Result<String, JudgeError> {
    let template = load_template(req.protocol, override_dir)?;
    let items_block = match req.protocol {
        JudgeProtocol::QaAcc => req.items.first().cloned().unwrap_or_default(),
        _ => numbered_items(&req.items),
    };
    Ok(template
        .replace("{{question}}", &req.question)
        .replace("{{gold}}", &req.gold)
        .replace("{{items}}", &items_block))
}

const RANK_MARKER: &str = "RANK:";
const NO_MATCH_TOKEN: &str = "none";

/// Parses a judge reply. Total: failures are encoded in `parse_ok`, never
/// raised. A rank outside `[1, n_items]` fails parsing.
pub fn parse_judge_reply(text: &str, n_items: u32) -> JudgeVerdict {
    debug_assert!(n_items >= 1);
    let fail = || JudgeVerdict {
        rank: None,
        equivalent: false,
        raw_reply: text.to_string(),
        parse_ok: false,
    };

    // Last marker line wins; judges sometimes restate the format first.
    let Some(field) = text
        .lines()
        .filter_map(|line| {
            let line = line.trim();
            line.to_ascii_uppercase()
                .strip_prefix(RANK_MARKER)
                .map(|_| line[RANK_MARKER.len()..].trim().to_string())
        })
        .last()
    else {
        return fail();
    };

    if field.eq_ignore_ascii_case(NO_MATCH_TOKEN) {
        return JudgeVerdict {
            rank: None,
            equivalent: false,
            raw_reply: text.to_string(),
            parse_ok: true,
        };
    }
    match field.parse::<u32>() {
        Ok(rank) if (1..=n_items).contains(&rank) => JudgeVerdict {
            rank: Some(rank),
            equivalent: true,
            raw_reply: text.to_string(),
            parse_ok: true,
        },
        _ => fail(),
    }
}

/// Rank-agnostic accuracy derived from an MRR verdict.
pub fn derived_llm_acc(verdict: &JudgeVerdict) -> u8 {
    debug_assert!(verdict.parse_ok);
    u8::from(verdict.rank.is_some())
}

/// Counting semaphore bounding in-flight judge calls, with a high-water
/// instrumentation hook.
struct InFlightLimiter {
    permits: Mutex<usize>,
    available: Condvar,
    current: AtomicUsize,
    high_water: AtomicUsize,
}

impl InFlightLimiter {
    fn new(max: usize) -> Self {
        Self {
            permits: Mutex::new(max),
            available: Condvar::new(),
            current: AtomicUsize::new(0),
            high_water: AtomicUsize::new(0),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.high_water.fetch_max(now, Ordering::SeqCst);
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a InFlightLimiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        self.limiter.current.fetch_sub(1, Ordering::SeqCst);
        let mut permits = self.limiter.permits.lock().unwrap();
        *permits += 1;
        self.limiter.available.notify_one();
    }
}

/// Judge client: renders prompts, calls the backend through the in-flight
/// limiter, and retries transport failures and garbled replies alike.
///
/// A garbled reply is retried rather than scored 0 — silently zeroing it
/// would bias training.
pub struct JudgeClient<B: ChatBackend> {
    backend: B,
    config: JudgeClientConfig,
    limiter: InFlightLimiter,
    memo: Mutex<std::collections::HashMap<String, JudgeVerdict>>,
    /// Backoff base; tests shrink it.
    pub backoff_base: Duration,
}

impl<B: ChatBackend> JudgeClient<B> {
    pub fn new(backend: B, config: JudgeClientConfig) -> Self {
        let limiter = InFlightLimiter::new(config.max_in_flight.max(1));
        Self {
            backend,
            config,
            limiter,
            memo: Mutex::new(std::collections::HashMap::new()),
            backoff_base: Duration::from_millis(250),
        }
    }

    /// Highest number of simultaneously in-flight requests observed.
    pub fn max_observed_in_flight(&self) -> usize {
        self.limiter.high_water.load(Ordering::SeqCst)
    }

    /// Obtains a parsed verdict, retrying up to `max_retries` extra attempts.
    pub fn verdict(&self, req: &JudgeRequest) -> Result<JudgeVerdict, JudgeError> {
        let prompt = render_judge_prompt(req)?;
        if self.config.memoize {
            if let Some(hit) = self.memo.lock().unwrap().get(&prompt) {
                return Ok(hit.clone());
            }
        }
        let n_items = req.items.len() as u32;
        let mut last_error = String::new();
        let attempts = self.config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff_delay(attempt));
            }
            let reply = {
                let _guard = self.limiter.acquire();
                self.backend.complete(&prompt)
            };
            match reply {
                Ok(text) => {
                    let verdict = parse_judge_reply(&text, n_items.max(1));
                    if verdict.parse_ok {
                        if self.config.memoize {
                            self.memo
                                .lock()
                                .unwrap()
                                .insert(prompt.clone(), verdict.clone());
                        }
                        return Ok(verdict);
                    }
                    last_error = format!("unparseable reply: {text:.80}");
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(JudgeError::Unavailable {
            attempts,
            last_error,
        })
    }

    /// Reciprocal-rank reward from the judge: 1/rank, or 0 on no match.
    pub fn judge_mrr(&self, req: &JudgeRequest) -> Result<f64, JudgeError> {
        assert!(
            matches!(req.protocol, JudgeProtocol::FullMrr | JudgeProtocol::SimpleMrr),
            "judge_mrr needs an MRR protocol"
        );
        assert!(!req.items.is_empty(), "MRR protocols need items");
        let verdict = self.verdict(req)?;
        Ok(verdict.rank.map_or(0.0, |r| 1.0 / r as f64))
    }

    fn backoff_delay(&self, attempt: u32) -> Duration {
        let exp = self.backoff_base.saturating_mul(1 << attempt.min(6));
        let jitter = rand::thread_rng().gen_range(0.5..1.5);
        exp.mul_f64(jitter)
    }
}

/// Item-ranking interface used by the reward and metric layers; lets mocks
/// stand in for the HTTP client.
pub trait RankJudge: Send + Sync {
    fn rank_items(
        &self,
        question: &str,
        gold: &str,
        items: &[String],
    ) -> Result<Option<u32>, JudgeError>;
}

impl<B: ChatBackend> RankJudge for JudgeClient<B> {
    fn rank_items(
        &self,
        question: &str,
        gold: &str,
        items: &[String],
    ) -> Result<Option<u32>, JudgeError> {
        let req = JudgeRequest {
            question: question.to_string(),
            gold: gold.to_string(),
            items: items.to_vec(),
            protocol: JudgeProtocol::FullMrr,
        };
        self.verdict(&req).map(|v| v.rank)
    }
}

/// Mock judge that ranks by normalized exact match; the oracle twin of the
/// real judge in equivalence tests.
pub struct ExactMatchJudge;

impl RankJudge for ExactMatchJudge {
    fn rank_items(
        &self,
        _question: &str,
        gold: &str,
        items: &[String],
    ) -> Result<Option<u32>, JudgeError> {
        let gold_norm = crate::parse::normalize(gold);
        Ok(items
            .iter()
            .position(|item| crate::parse::normalize(item) == gold_norm)
            .map(|i| i as u32 + 1))
    }
}

/// OpenAI-compatible chat-completions backend over blocking HTTP.
pub struct OpenAiBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
}

impl OpenAiBackend {
    /// Builds a backend from client config; the API key is read from
    /// `LISTREWARD_JUDGE_API_KEY` when present.
    pub fn from_config(config: &JudgeClientConfig) -> Result<Self, JudgeError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| JudgeError::Transport(e.to_string()))?;
        let base = config.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        Ok(Self {
            client,
            url,
            model: config.model_name.clone(),
            temperature: config.temperature,
            api_key: std::env::var(API_KEY_ENV).ok(),
        })
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReplyMessage,
}

#[derive(Deserialize)]
struct ChatReplyMessage {
    content: String,
}

impl ChatBackend for OpenAiBackend {
    fn complete(&self, prompt: &str) -> Result<String, JudgeError> {
        let body = ChatRequest {
            model: &self.model,
            temperature: self.temperature,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
        };
        let mut request = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| JudgeError::Transport(e.to_string()))?;
        if !response.status().is_success() {
            return Err(JudgeError::Transport(format!(
                "HTTP {} from judge endpoint",
                response.status()
            )));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| JudgeError::Transport(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| JudgeError::Transport("empty choices in judge reply".into()))
    }
}

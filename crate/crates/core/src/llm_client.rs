//! Language-model backends and response parsing.
//!
//! `HttpChat` speaks the common chat-completion JSON shape:
//!
//! ```text
//! POST <endpoint_url>
//! Authorization: Bearer $<api_key_env_var>
//! {"model": ..., "messages": [{"role":"system",...},{"role":"user",...}], "temperature": ...}
//! -> {"choices": [{"message": {"content": "..."}}]}
//! ```
//!
//! `MockCentroid` is offline: it reads the feature lines back out of the
//! prompt and answers with the nearest class centroid.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::{read_feature_csv, FeatureVector, Stat};
use crate::ingest::ChannelId;
use crate::prompting::{estimate_tokens, render_prompt, AnswerFormat, PromptError, PromptTemplate};

pub const DEFAULT_API_KEY_ENV: &str = "HAR_LLM_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("backend config: {0}")]
    Config(String),
    #[error("environment variable {0} is not set")]
    MissingKey(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend returned HTTP {status}: {body}")]
    Protocol { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Response(String),
    #[error("no label found in response {raw_text:?}")]
    Unparseable { raw_text: String },
    #[error("question is empty")]
    EmptyQuestion,
    #[error("mock backend: {0}")]
    Mock(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

pub type Result<T> = std::result::Result<T, LlmError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    MockCentroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    /// Name of the variable holding the key, never the key itself. Empty
    /// disables the Authorization header.
    pub api_key_env_var: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub temperature: f64,
    /// First retry delay; doubles per attempt.
    pub backoff_ms: u64,
    /// Process-wide request rate cap; `None` is unlimited.
    pub requests_per_second: Option<f64>,
    /// Labeled feature CSV the mock fits its centroids on.
    pub mock_features: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::MockCentroid,
            endpoint_url: None,
            model_name: "mock-centroid".into(),
            api_key_env_var: DEFAULT_API_KEY_ENV.into(),
            timeout_s: 60.0,
            max_retries: 3,
            temperature: 0.0,
            backoff_ms: 250,
            requests_per_second: None,
            mock_features: None,
        }
    }
}

impl BackendConfig {
    pub fn http(endpoint_url: &str, model_name: &str) -> Self {
        BackendConfig {
            kind: BackendKind::HttpChat,
            endpoint_url: Some(endpoint_url.into()),
            model_name: model_name.into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        if self.kind == BackendKind::HttpChat && self.endpoint_url.is_none() {
            return Err(LlmError::Config("http_chat requires endpoint_url".into()));
        }
        if let Some(r) = self.requests_per_second {
            if !(r > 0.0) {
                return Err(LlmError::Config(
                    "requests_per_second must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Nearest-centroid stand-in for a language model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockCentroid {
    pub label_vocabulary: Vec<String>,
    /// (channel, stat) per dimension, in prompt order.
    pub dims: Vec<(ChannelId, Stat)>,
    pub centroids: Vec<Vec<f64>>,
    /// Pooled per-feature std; zero-variance features use 1.
    pub scale: Vec<f64>,
}

impl MockCentroid {
    pub fn fit(rows: &[FeatureVector]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| LlmError::Mock("no training rows".into()))?;
        if rows.iter().any(|r| r.channel_order != first.channel_order) {
            return Err(LlmError::Mock("training rows mix channel sets".into()));
        }
        let dims: Vec<(ChannelId, Stat)> = first
            .channel_order
            .iter()
            .flat_map(|c| Stat::ALL.iter().map(move |s| (*c, *s)))
            .collect();
        let d = dims.len();
        let mut groups: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
        for r in rows {
            let e = groups.entry(&r.activity).or_insert((vec![0.0; d], 0));
            for (a, v) in e.0.iter_mut().zip(&r.values) {
                *a += v;
            }
            e.1 += 1;
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d)
            .map(|j| rows.iter().map(|r| r.values[j]).sum::<f64>() / n)
            .collect();
        let scale = (0..d)
            .map(|j| {
                let var = rows
                    .iter()
                    .map(|r| (r.values[j] - mean[j]).powi(2))
                    .sum::<f64>()
                    / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(MockCentroid {
            label_vocabulary: groups.keys().map(|k| k.to_string()).collect(),
            centroids: groups
                .values()
                .map(|(s, c)| s.iter().map(|v| v / *c as f64).collect())
                .collect(),
            dims,
            scale,
        })
    }

    pub fn fit_csv(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| LlmError::Mock(format!("{}: {e}", path.display())))?;
        let rows = read_feature_csv(std::io::BufReader::new(file))
            .map_err(|e| LlmError::Mock(format!("{}: {e}", path.display())))?;
        Self::fit(&rows)
    }

    /// Index of the nearest centroid by standardized Euclidean distance;
    /// the first label wins ties.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (k, c) in self.centroids.iter().enumerate() {
            let d: f64 = x
                .iter()
                .zip(c)
                .zip(&self.scale)
                .map(|((a, b), s)| ((a - b) / s).powi(2))
                .sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }

    /// SHA-256 over the serialized centroids, for run fingerprints.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("mock serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Feature values recovered from `<channel> <stat>: <value>` lines.
    pub fn parse_prompt_features(&self, prompt: &str) -> Result<Vec<f64>> {
        let mut found: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for line in prompt.lines() {
            let Some((key, value)) = line.trim().split_once(": ") else {
                continue;
            };
            let Some((ch, st)) = key.split_once(' ') else {
                continue;
            };
            let (Some(ch), Some(st), Ok(v)) = (
                ChannelId::from_prompt_name(ch),
                Stat::from_prompt_name(st),
                value.trim().parse::<f64>(),
            ) else {
                continue;
            };
            found.insert((ch.index(), st.index()), v);
        }
        self.dims
            .iter()
            .map(|(c, s)| {
                found.get(&(c.index(), s.index())).copied().ok_or_else(|| {
                    LlmError::Mock(format!(
                        "prompt lacks feature {} {}",
                        c.prompt_name(),
                        s.prompt_name()
                    ))
                })
            })
            .collect()
    }

    pub fn respond(&self, user: &str) -> Result<String> {
        let x = self.parse_prompt_features(user)?;
        if user
            .lines()
            .any(|l| l.trim_start().starts_with("Question:"))
        {
            return Ok(self.answer(&x));
        }
        let label = &self.label_vocabulary[self.nearest(&x)];
        Ok(format!("The activity is {label}."))
    }

    fn answer(&self, x: &[f64]) -> String {
        let mut best: Option<(usize, f64)> = None;
        for (j, (_, s)) in self.dims.iter().enumerate() {
            if *s == Stat::Std && best.is_none_or(|(_, b)| x[j] > b) {
                best = Some((j, x[j]));
            }
        }
        let label = &self.label_vocabulary[self.nearest(x)];
        match best {
            Some((j, sd)) => format!(
                "The strongest variation is on {} (std {sd:.3}). The window most resembles {label}.",
                self.dims[j].0.prompt_name()
            ),
            None => format!("The window most resembles {label}."),
        }
    }
}

/// Process-wide spacing of HTTP requests.
static NEXT_SLOT: Mutex<Option<Instant>> = Mutex::new(None);

fn wait_for_slot(rps: f64) {
    let wait = {
        let mut next = NEXT_SLOT.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let slot = next.map_or(now, |n| n.max(now));
        *next = Some(slot + Duration::from_secs_f64(1.0 / rps));
        slot - now
    };
    if !wait.is_zero() {
        std::thread::sleep(wait);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

enum Backend {
    Http(reqwest::blocking::Client),
    Mock(MockCentroid),
}

/// Immutable after construction; safe to share across threads.
pub struct LlmClient {
    config: BackendConfig,
    backend: Backend,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatContent,
}

#[derive(Deserialize)]
struct ChatContent {
    content: String,
}

enum Failure {
    Retryable(LlmError),
    Fatal(LlmError),
}

impl LlmClient {
    /// Builds the backend. The mock is fitted from `mock_features`.
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        let backend = match config.kind {
            BackendKind::HttpChat => Backend::Http(
                reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs_f64(config.timeout_s))
                    .build()
                    .map_err(|e| LlmError::Config(e.to_string()))?,
            ),
            BackendKind::MockCentroid => {
                let path = config.mock_features.as_ref().ok_or_else(|| {
                    LlmError::Config("mock_centroid requires mock_features".into())
                })?;
                Backend::Mock(MockCentroid::fit_csv(path)?)
            }
        };
        Ok(LlmClient { config, backend })
    }

    pub fn with_mock(config: BackendConfig, mock: MockCentroid) -> Result<Self> {
        config.validate()?;
        Ok(LlmClient {
            config: BackendConfig {
                kind: BackendKind::MockCentroid,
                ..config
            },
            backend: Backend::Mock(mock),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn mock(&self) -> Option<&MockCentroid> {
        match &self.backend {
            Backend::Mock(m) => Some(m),
            Backend::Http(_) => None,
        }
    }

    /// Stable description for report fingerprints. Includes the mock's
    /// centroid digest; never includes the API key.
    pub fn describe(&self) -> String {
        match &self.backend {
            Backend::Mock(m) => format!("llm(mock_centroid,digest={})", &m.digest()[..16]),
            Backend::Http(_) => format!(
                "llm(http_chat,model={},temperature={})",
                self.config.model_name, self.config.temperature
            ),
        }
    }

    pub fn complete(&self, system: &str, user: &str) -> Result<Completion> {
        match &self.backend {
            Backend::Mock(m) => Ok(Completion {
                text: m.respond(user)?,
                attempts: 1,
            }),
            Backend::Http(client) => self.complete_http(client, system, user),
        }
    }

    fn complete_http(
        &self,
        client: &reqwest::blocking::Client,
        system: &str,
        user: &str,
    ) -> Result<Completion> {
        let key = if self.config.api_key_env_var.is_empty() {
            None
        } else {
            Some(
                std::env::var(&self.config.api_key_env_var)
                    .map_err(|_| LlmError::MissingKey(self.config.api_key_env_var.clone()))?,
            )
        };
        let body = ChatRequest {
            model: &self.config.model_name,
            messages: [
                ChatMessage {
                    role: "system",
                    content: system,
                },
                ChatMessage {
                    role: "user",
                    content: user,
                },
            ],
            temperature: self.config.temperature,
        };
        let url = self.config.endpoint_url.as_deref().expect("validated");
        let total = self.config.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(rps) = self.config.requests_per_second {
                wait_for_slot(rps);
            }
            let mut req = client.post(url).json(&body);
            if let Some(k) = &key {
                req = req.bearer_auth(k);
            }
            let outcome = match req.send() {
                Err(e) if e.is_timeout() => {
                    Err(Failure::Retryable(LlmError::Timeout { attempts: attempt }))
                }
                Err(e) => Err(Failure::Retryable(LlmError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                })),
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().map_err(|e| {
                        Failure::Retryable(LlmError::Transport {
                            attempts: attempt,
                            message: e.to_string(),
                        })
                    });
                    match text {
                        Err(f) => Err(f),
                        Ok(text) if status.is_success() => {
                            match serde_json::from_str::<ChatResponse>(&text) {
                                Ok(parsed) => parsed
                                    .choices
                                    .into_iter()
                                    .next()
                                    .map(|c| c.message.content)
                                    .ok_or_else(|| {
                                        Failure::Fatal(LlmError::Response("no choices".into()))
                                    }),
                                Err(e) => Err(Failure::Fatal(LlmError::Response(e.to_string()))),
                            }
                        }
                        Ok(text) => {
                            let err = LlmError::Protocol {
                                status: status.as_u16(),
                                body: text,
                            };
                            if status.is_server_error() || status.as_u16() == 429 {
                                Err(Failure::Retryable(err))
                            } else {
                                Err(Failure::Fatal(err))
                            }
                        }
                    }
                }
            };
            match outcome {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        attempts: attempt,
                    })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) if attempt >= total => return Err(e),
                Err(Failure::Retryable(_)) => {
                    let factor = 1u64 << (attempt - 1).min(16);
                    let delay = self.config.backoff_ms.saturating_mul(factor).min(30_000);
                    std::thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }
}

/// Case-insensitive forms a label may take in free text.
fn aliases(label: &str) -> Vec<String> {
    let lower = label.to_lowercase();
    let mut out = vec![
        lower.clone(),
        lower.replace('_', " "),
        lower.replace(' ', "_"),
    ];
    out.sort();
    out.dedup();
    out
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn find_word(haystack: &str, needle: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(off) = haystack[from..].find(needle) {
        let start = from + off;
        let end = start + needle.len();
        let before = haystack[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !is_word(c));
        let after = haystack[end..].chars().next().is_none_or(|c| !is_word(c));
        if before && after {
            return Some(start);
        }
        from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

/// Label named in `raw_text`. The longest matching label wins; among equal
/// lengths the earliest occurrence, then vocabulary order.
pub fn parse_label(raw_text: &str, label_set: &[String]) -> Result<String> {
    let text = raw_text.to_lowercase();
    let mut best: Option<(usize, usize, &String)> = None;
    for label in label_set {
        let Some(pos) = aliases(label)
            .iter()
            .filter_map(|a| find_word(&text, a))
            .min()
        else {
            continue;
        };
        let len = label.chars().count();
        let better = match best {
            None => true,
            Some((bl, bp, _)) => len > bl || (len == bl && pos < bp),
        };
        if better {
            best = Some((len, pos, label));
        }
    }
    best.map(|(_, _, l)| l.clone())
        .ok_or_else(|| LlmError::Unparseable {
            raw_text: raw_text.to_string(),
        })
}

/// Artifacts of one prompt → completion → parse round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResult {
    pub prompt: String,
    pub raw_text: String,
    pub parsed_label: Option<String>,
    pub latency_s: f64,
    /// estimate_tokens of system text, a newline and the prompt.
    pub token_estimate_in: usize,
    pub token_estimate_out: usize,
    pub attempts: u32,
}

fn run(client: &LlmClient, system: &str, prompt: String) -> Result<LlmResult> {
    let start = Instant::now();
    let completion = client.complete(system, &prompt)?;
    Ok(LlmResult {
        token_estimate_in: estimate_tokens(&format!("{system}\n{prompt}")),
        token_estimate_out: estimate_tokens(&completion.text),
        prompt,
        raw_text: completion.text,
        parsed_label: None,
        latency_s: start.elapsed().as_secs_f64(),
        attempts: completion.attempts,
    })
}

/// Renders, completes and parses. A response naming no label is returned
/// as [`LlmError::Unparseable`].
pub fn classify_window(
    client: &LlmClient,
    template: &PromptTemplate,
    fv: &FeatureVector,
    label_set: &[String],
    precision: usize,
) -> Result<LlmResult> {
    let result = classify_window_lenient(client, template, fv, label_set, precision)?;
    match result.parsed_label {
        Some(_) => Ok(result),
        None => Err(LlmError::Unparseable {
            raw_text: result.raw_text,
        }),
    }
}

/// Like [`classify_window`], but an answer naming no label comes back with
/// `parsed_label: None` so the exchange can still be logged.
pub fn classify_window_lenient(
    client: &LlmClient,
    template: &PromptTemplate,
    fv: &FeatureVector,
    label_set: &[String],
    precision: usize,
) -> Result<LlmResult> {
    if label_set.is_empty() {
        return Err(LlmError::Config("label set is empty".into()));
    }
    let prompt = render_prompt(template, fv, label_set, None, precision)?;
    let mut result = run(client, &template.system_text, prompt)?;
    result.parsed_label = parse_label(&result.raw_text, label_set).ok();
    Ok(result)
}

/// Free-form answer about `fv`; the text is returned unparsed.
pub fn answer_question(
    client: &LlmClient,
    template: &PromptTemplate,
    fv: &FeatureVector,
    question: &str,
    precision: usize,
) -> Result<LlmResult> {
    if question.trim().is_empty() {
        return Err(LlmError::EmptyQuestion);
    }
    if template.answer_format != AnswerFormat::Freeform {
        return Err(LlmError::Config(format!(
            "template {} is not a free-form template",
            template.name
        )));
    }
    let prompt = render_prompt(template, fv, &[], Some(question), precision)?;
    run(client, &template.system_text, prompt)
}

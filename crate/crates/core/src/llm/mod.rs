//! Chat-completion bridge: versioned prompts, schema-checked replies, retries,
//! and an offline table-driven mock.

mod adapters;
mod correct;
mod http;
mod mock;

use std::fmt;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::Dimension;

pub use adapters::{LlmClassifier, LlmParaphraser};
pub use correct::{correct_frame, revert_change, Change, CorrectedFrame};
pub use http::{HttpBackend, HttpConfig, KEY_ENV};
pub use mock::MockBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Label,
    Paraphrase,
    Correct,
    Summarize,
}

/// Response schema ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    #[serde(rename = "label_set.v1")]
    LabelSet,
    #[serde(rename = "paraphrase.v1")]
    Paraphrase,
    #[serde(rename = "correction.v1")]
    Correction,
    #[serde(rename = "summary.v1")]
    Summary,
}

struct Template {
    id: &'static str,
    kind: TaskKind,
    shape: Shape,
    body: &'static str,
}

const TEMPLATES: &[Template] = &[
    Template {
        id: "label.v1",
        kind: TaskKind::Label,
        shape: Shape::LabelSet,
        body: include_str!("../../prompts/label.v1.txt"),
    },
    Template {
        id: "paraphrase.v1",
        kind: TaskKind::Paraphrase,
        shape: Shape::Paraphrase,
        body: include_str!("../../prompts/paraphrase.v1.txt"),
    },
    Template {
        id: "correct.v1",
        kind: TaskKind::Correct,
        shape: Shape::Correction,
        body: include_str!("../../prompts/correct.v1.txt"),
    },
    Template {
        id: "summarize.v1",
        kind: TaskKind::Summarize,
        shape: Shape::Summary,
        body: include_str!("../../prompts/summarize.v1.txt"),
    },
];

pub fn template_ids() -> Vec<&'static str> {
    TEMPLATES.iter().map(|t| t.id).collect()
}

/// The registered template text, with its `#` header lines removed.
pub fn template(id: &str) -> Option<String> {
    TEMPLATES.iter().find(|t| t.id == id).map(|t| {
        t.body
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmTask {
    pub kind: TaskKind,
    pub template_id: String,
    pub payload: String,
    pub expected_shape: Shape,
}

impl LlmTask {
    fn standard(kind: TaskKind, payload: impl Into<String>) -> Self {
        let t = TEMPLATES
            .iter()
            .find(|t| t.kind == kind)
            .expect("every kind has a template");
        LlmTask {
            kind,
            template_id: t.id.to_string(),
            payload: payload.into(),
            expected_shape: t.shape,
        }
    }

    pub fn label(sentence: &str) -> Self {
        LlmTask::standard(TaskKind::Label, sentence)
    }

    pub fn paraphrase(sentence: &str) -> Self {
        LlmTask::standard(TaskKind::Paraphrase, sentence)
    }

    pub fn correct(payload: String) -> Self {
        LlmTask::standard(TaskKind::Correct, payload)
    }

    pub fn summarize(sentences: &[String]) -> Self {
        LlmTask::standard(TaskKind::Summarize, sentences.join("\n"))
    }

    pub fn render(&self) -> Result<String, LlmError> {
        template(&self.template_id)
            .map(|t| t.replace("{{payload}}", &self.payload))
            .ok_or_else(|| LlmError::UnknownTemplate(self.template_id.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Parsed {
    Labels(Vec<Dimension>),
    Text(String),
    Changes(Vec<Change>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelReply {
    labels: Vec<Dimension>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextReply {
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrectionReply {
    changes: Vec<Change>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryReply {
    summary: String,
}

impl Shape {
    /// Parses a raw reply strictly; prose or extra keys are rejected.
    pub fn parse(self, raw: &str) -> Result<Parsed, String> {
        let raw = raw.trim();
        let non_empty = |s: String| {
            if s.trim().is_empty() {
                Err("empty text".to_string())
            } else {
                Ok(Parsed::Text(s.trim().to_string()))
            }
        };
        match self {
            Shape::LabelSet => {
                let mut labels = serde_json::from_str::<LabelReply>(raw)
                    .map_err(|e| e.to_string())?
                    .labels;
                labels.sort();
                labels.dedup();
                Ok(Parsed::Labels(labels))
            }
            Shape::Paraphrase => {
                non_empty(serde_json::from_str::<TextReply>(raw).map_err(|e| e.to_string())?.text)
            }
            Shape::Summary => non_empty(
                serde_json::from_str::<SummaryReply>(raw)
                    .map_err(|e| e.to_string())?
                    .summary,
            ),
            Shape::Correction => Ok(Parsed::Changes(
                serde_json::from_str::<CorrectionReply>(raw)
                    .map_err(|e| e.to_string())?
                    .changes,
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub raw: String,
    pub parsed: Parsed,
    pub usage: Usage,
    pub attempt: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("AUTH_ERROR: {0}")]
    Auth(String),
    #[error("RATE_LIMITED: retry after {retry_after:?}")]
    RateLimited { retry_after: Option<Duration> },
    #[error("SCHEMA_REJECTED after {attempts} attempts: {reason}")]
    SchemaRejected { attempts: u32, reason: String },
    #[error("TRANSPORT_ERROR: {0}")]
    Transport(String),
    #[error("KB_EMPTY: the knowledge base has no mappings")]
    KbEmpty,
    #[error("UNKNOWN_TEMPLATE: {0}")]
    UnknownTemplate(String),
    #[error("REVERT_CONFLICT at {path}: slot no longer holds {expected:?}")]
    RevertConflict { path: String, expected: String },
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            LlmError::Auth(_) => "AUTH_ERROR",
            LlmError::RateLimited { .. } => "RATE_LIMITED",
            LlmError::SchemaRejected { .. } => "SCHEMA_REJECTED",
            LlmError::Transport(_) => "TRANSPORT_ERROR",
            LlmError::KbEmpty => "KB_EMPTY",
            LlmError::UnknownTemplate(_) => "UNKNOWN_TEMPLATE",
            LlmError::RevertConflict { .. } => "REVERT_CONFLICT",
        }
    }
}

/// What a backend hands back before schema checking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawReply {
    pub text: String,
    pub usage: Usage,
}

/// A rendered request for a backend.
#[derive(Debug, Clone)]
pub struct LlmRequest<'a> {
    pub task: &'a LlmTask,
    pub prompt: String,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn send(&self, request: &LlmRequest<'_>) -> Result<RawReply, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` after a transport or schema failure.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

struct InFlight {
    cap: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.used.lock().expect("in-flight lock");
        while *used >= self.cap {
            used = self.freed.wait(used).expect("in-flight lock");
        }
        *used += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().expect("in-flight lock") -= 1;
        self.0.freed.notify_one();
    }
}

/// Schema-validating client over any [`Backend`].
pub struct LlmClient {
    backend: Box<dyn Backend>,
    pub policy: RetryPolicy,
    sleeper: Sleeper,
    in_flight: InFlight,
}

impl fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmClient")
            .field("backend", &self.backend.name())
            .field("policy", &self.policy)
            .finish()
    }
}

impl LlmClient {
    pub fn new(backend: impl Backend + 'static) -> Self {
        LlmClient {
            backend: Box::new(backend),
            policy: RetryPolicy::default(),
            sleeper: Arc::new(std::thread::sleep),
            in_flight: InFlight {
                cap: 4,
                used: Mutex::new(0),
                freed: Condvar::new(),
            },
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_max_in_flight(mut self, cap: usize) -> Self {
        self.in_flight.cap = cap.max(1);
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn complete(&self, task: &LlmTask) -> Result<LlmResponse, LlmError> {
        self.complete_checked(task, &self.policy, &|_| Ok(()))
    }

    /// Like [`LlmClient::complete`], with an extra semantic check; replies
    /// failing it count as schema-invalid.
    pub fn complete_checked(
        &self,
        task: &LlmTask,
        policy: &RetryPolicy,
        check: &dyn Fn(&Parsed) -> Result<(), String>,
    ) -> Result<LlmResponse, LlmError> {
        let request = LlmRequest {
            task,
            prompt: task.render()?,
        };
        let max = policy.max_attempts.max(1);
        let mut last_reason = String::new();
        for attempt in 1..=max {
            let reply = {
                let _slot = self.in_flight.acquire();
                self.backend.send(&request)
            };
            let failure = match reply {
                Ok(reply) => match task
                    .expected_shape
                    .parse(&reply.text)
                    .and_then(|p| check(&p).map(|_| p))
                {
                    Ok(parsed) => {
                        return Ok(LlmResponse {
                            raw: reply.text,
                            parsed,
                            usage: reply.usage,
                            attempt,
                        })
                    }
                    Err(reason) => {
                        tracing::debug!(attempt, %reason, "reply rejected by schema");
                        last_reason = reason;
                        None
                    }
                },
                Err(e @ LlmError::Auth(_)) => return Err(e),
                Err(e) => Some(e),
            };
            if attempt == max {
                return Err(failure.unwrap_or(LlmError::SchemaRejected {
                    attempts: max,
                    reason: last_reason,
                }));
            }
            let delay = match &failure {
                Some(LlmError::RateLimited {
                    retry_after: Some(after),
                }) => *after,
                _ => policy.backoff(attempt),
            };
            (self.sleeper)(delay);
        }
        unreachable!("loop returns on the last attempt")
    }
}

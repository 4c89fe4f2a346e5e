use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, LlmError, LlmRequest, RawReply, Usage};

/// Environment variable holding the API credential.
pub const KEY_ENV: &str = "BIOINVERT_LLM_KEY";

const SYSTEM_PROMPT: &str = "Reply with a single JSON object and nothing else.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

/// OpenAI-compatible `/chat/completions` backend.
pub struct HttpBackend {
    config: HttpConfig,
    key: Option<String>,
    client: reqwest::blocking::Client,
    trace: Option<Mutex<PathBuf>>,
}

impl HttpBackend {
    /// Reads the credential from [`KEY_ENV`].
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        let key = std::env::var(KEY_ENV).ok().filter(|k| !k.trim().is_empty());
        HttpBackend::with_key(config, key)
    }

    pub fn with_key(config: HttpConfig, key: Option<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            config,
            key,
            client,
            trace: None,
        })
    }

    /// Appends redacted request/response records to `path` (JSON lines).
    pub fn with_trace(mut self, path: PathBuf) -> Self {
        self.trace = Some(Mutex::new(path));
        self
    }

    fn trace(&self, record: serde_json::Value) {
        let Some(path) = &self.trace else { return };
        let path = path.lock().expect("trace lock");
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&*path)
            .and_then(|mut f| writeln!(f, "{record}"));
        if let Err(e) = written {
            tracing::warn!(error = %e, "could not write LLM trace");
        }
    }

    fn redact(&self, text: &str) -> String {
        match &self.key {
            Some(k) if !k.is_empty() => text.replace(k.as_str(), "[REDACTED]"),
            _ => text.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<CompletionUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct CompletionUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "llm"
    }

    fn send(&self, request: &LlmRequest<'_>) -> Result<RawReply, LlmError> {
        let key = self
            .key
            .as_deref()
            .ok_or_else(|| LlmError::Auth(format!("{KEY_ENV} is not set")))?;
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": request.prompt},
            ],
        });
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let sent = self.client.post(&url).bearer_auth(key).json(&body).send();
        let response = match sent {
            Ok(r) => r,
            Err(e) => {
                let msg = self.redact(&e.to_string());
                self.trace(json!({"template": request.task.template_id, "request": body, "error": msg}));
                return Err(LlmError::Transport(msg));
            }
        };
        let status = response.status();
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = response
            .text()
            .map_err(|e| LlmError::Transport(self.redact(&e.to_string())))?;
        self.trace(json!({
            "template": request.task.template_id,
            "request": body,
            "status": status.as_u16(),
            "response": self.redact(&text),
        }));

        match status.as_u16() {
            200..=299 => {}
            401 | 403 => return Err(LlmError::Auth(format!("endpoint answered {status}"))),
            429 => return Err(LlmError::RateLimited { retry_after }),
            _ => return Err(LlmError::Transport(format!("endpoint answered {status}"))),
        }
        // An unreadable envelope is treated like a malformed reply.
        let Ok(completion) = serde_json::from_str::<Completion>(&text) else {
            return Ok(RawReply {
                text,
                usage: Usage::default(),
            });
        };
        let content = completion
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        let usage = completion
            .usage
            .map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(RawReply {
            text: content,
            usage,
        })
    }
}

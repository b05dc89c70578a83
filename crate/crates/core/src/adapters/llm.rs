use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::header::{HeaderMap, AUTHORIZATION, CONTENT_TYPE, RETRY_AFTER};
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{AdapterError, RecommendationRun, RunSource};
use crate::prompt::RenderedPrompt;

const MAX_BACKOFF: Duration = Duration::from_secs(30);

fn default_timeout() -> f64 {
    120.0
}
fn default_retries() -> u32 {
    3
}
fn default_in_flight() -> usize {
    1
}
fn default_backoff_ms() -> u64 {
    500
}

/// Connection settings for an OpenAI-compatible chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub model_name: String,
    /// Either the API root (`https://host/v1`) or the full
    /// `.../chat/completions` URL.
    pub base_url: String,
    /// Environment variable that holds the bearer token. `None` sends no
    /// `Authorization` header, for local deployments.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
}

impl EndpointConfig {
    pub fn new(model_name: impl Into<String>, base_url: impl Into<String>) -> Self {
        EndpointConfig {
            model_name: model_name.into(),
            base_url: base_url.into(),
            api_key_env: None,
            temperature: 0.0,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
            initial_backoff_ms: default_backoff_ms(),
        }
    }

    pub fn endpoint_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
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
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Serialized request body. Identical inputs give identical bytes.
pub fn request_body(cfg: &EndpointConfig, prompt: &RenderedPrompt) -> Vec<u8> {
    let req = ChatRequest {
        model: &cfg.model_name,
        messages: [ChatMessage {
            role: "user",
            content: &prompt.text,
        }],
        temperature: cfg.temperature,
    };
    serde_json::to_vec(&req).expect("chat request always serializes")
}

enum Attempt {
    Success(String, Duration),
    Retry(String, Option<Duration>),
    Fail(String),
}

/// Blocking chat-completion client with retry and backoff.
#[derive(Debug, Clone)]
pub struct ChatClient {
    cfg: EndpointConfig,
    url: String,
    api_key: Option<String>,
    http: Client,
}

impl ChatClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self, AdapterError> {
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .ok()
                    .filter(|k| !k.trim().is_empty())
                    .ok_or_else(|| AdapterError::MissingApiKey(var.clone()))?,
            ),
            None => None,
        };
        let http = Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs.max(0.001)))
            .build()
            .map_err(|e| AdapterError::Client(e.to_string()))?;
        Ok(ChatClient {
            url: cfg.endpoint_url(),
            cfg,
            api_key,
            http,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    fn attempt(&self, body: &[u8]) -> Result<Attempt, AdapterError> {
        let mut req = self
            .http
            .post(&self.url)
            .header(CONTENT_TYPE, "application/json")
            .body(body.to_vec());
        if let Some(key) = &self.api_key {
            req = req.header(AUTHORIZATION, format!("Bearer {key}"));
        }

        let started = Instant::now();
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(format!("transport error: {e}"), None)),
        };
        let status = resp.status();
        let retry_after = retry_after(resp.headers());
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(format!("reading response body: {e}"), None)),
        };
        let elapsed = started.elapsed();

        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(AdapterError::Auth {
                model: self.cfg.model_name.clone(),
                status: status.as_u16(),
                body: truncate(&text, 200),
            });
        }
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Ok(Attempt::Retry(format!("HTTP {}", status.as_u16()), retry_after));
        }
        if !status.is_success() {
            return Ok(Attempt::Fail(format!(
                "HTTP {}: {}",
                status.as_u16(),
                truncate(&text, 200)
            )));
        }

        let parsed: ChatResponse = match serde_json::from_str(&text) {
            Ok(p) => p,
            Err(e) => return Ok(Attempt::Fail(format!("unparseable response: {e}"))),
        };
        match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
            Some(content) => Ok(Attempt::Success(content, elapsed)),
            None => Ok(Attempt::Fail("response had no message content".into())),
        }
    }

    /// Sends `prompt` and returns the assistant's reply as a run.
    ///
    /// Transport errors, 429 and 5xx are retried up to `max_retries` times
    /// with exponential backoff; the recorded elapsed time is that of the
    /// successful attempt. When retries run out the run comes back with
    /// `failure` set. Authentication failures abort with an error.
    pub fn complete(&self, prompt: &RenderedPrompt, run_index: u32) -> Result<RecommendationRun, AdapterError> {
        let body = request_body(&self.cfg, prompt);
        let mut run = RecommendationRun {
            user_id: prompt.user_id,
            run_index,
            source: RunSource::Llm,
            raw_text: String::new(),
            item_ids: Vec::new(),
            elapsed_seconds: 0.0,
            failure: None,
        };

        let mut last_error = String::new();
        for attempt in 0..=self.cfg.max_retries {
            match self.attempt(&body)? {
                Attempt::Success(text, elapsed) => {
                    run.raw_text = text;
                    run.elapsed_seconds = elapsed.as_secs_f64();
                    return Ok(run);
                }
                Attempt::Fail(reason) => {
                    last_error = reason;
                    break;
                }
                Attempt::Retry(reason, hint) => {
                    log::debug!(
                        "{} user {} run {}: attempt {} failed: {reason}",
                        self.cfg.model_name,
                        prompt.user_id,
                        run_index,
                        attempt + 1
                    );
                    last_error = reason;
                    if attempt < self.cfg.max_retries {
                        std::thread::sleep(self.backoff(attempt, hint));
                    } else {
                        last_error = format!("{last_error} (gave up after {} attempts)", self.cfg.max_retries + 1);
                    }
                }
            }
        }
        log::warn!(
            "{} user {} run {} failed: {last_error}",
            self.cfg.model_name,
            prompt.user_id,
            run_index
        );
        run.failure = Some(last_error);
        Ok(run)
    }

    fn backoff(&self, attempt: u32, hint: Option<Duration>) -> Duration {
        let base = Duration::from_millis(self.cfg.initial_backoff_ms);
        let exp = base.saturating_mul(1u32 << attempt.min(16));
        hint.unwrap_or(exp).min(MAX_BACKOFF)
    }
}

fn retry_after(headers: &HeaderMap) -> Option<Duration> {
    let secs: f64 = headers.get(RETRY_AFTER)?.to_str().ok()?.trim().parse().ok()?;
    (secs.is_finite() && secs >= 0.0).then(|| Duration::from_secs_f64(secs))
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((idx, _)) => format!("{}...", &s[..idx]),
        None => s.to_string(),
    }
}

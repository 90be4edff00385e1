//! Blocking chat-completions client with bounded concurrency.
//!
//! Requests carry the prompt instruction as the system message and the
//! rendered input as the user message. Transport failures and retryable
//! HTTP statuses (429, 5xx) are retried with exponential backoff; parse
//! failures are never retried. Batch results are joined back to prompts by
//! index, independent of completion order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::prompting::{parse_response, ParsedEstimate, PromptRecord};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model_name: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub max_concurrency: usize,
    pub temperature: f64,
    /// Name of the environment variable holding the bearer token. The value
    /// itself is read at client construction and never logged or stored in
    /// artifacts.
    pub api_key_env: String,
    /// First retry delay; doubles per attempt.
    pub retry_backoff_s: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".to_owned(),
            model_name: "cbpm-llama".to_owned(),
            timeout_s: 30.0,
            max_retries: 2,
            max_concurrency: 4,
            temperature: 0.0,
            api_key_env: "ENDPOINT_API_KEY".to_owned(),
            retry_backoff_s: 0.25,
        }
    }
}

enum Reply {
    Content(String),
    Retryable(Error),
    Fatal(Error),
}

pub struct ChatClient {
    cfg: EndpointConfig,
    http: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl ChatClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| Error::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        let api_key = std::env::var(&cfg.api_key_env).ok();
        Ok(Self { cfg, http, api_key })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn post_once(&self, body: &serde_json::Value) -> Reply {
        let mut request = self.http.post(self.completions_url()).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = match request.send() {
            Ok(r) => r,
            Err(e) => {
                return Reply::Retryable(Error::Transport {
                    attempts: 1,
                    message: e.to_string(),
                })
            }
        };
        let status = response.status();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => {
                return Reply::Retryable(Error::Transport {
                    attempts: 1,
                    message: e.to_string(),
                })
            }
        };
        if !status.is_success() {
            let err = Error::EndpointStatus {
                status: status.as_u16(),
                message: text.chars().take(200).collect(),
            };
            return if status.as_u16() == 429 || status.is_server_error() {
                Reply::Retryable(err)
            } else {
                Reply::Fatal(err)
            };
        }
        match extract_content(&text) {
            Some(content) => Reply::Content(content),
            None => Reply::Fatal(Error::EmptyCompletion),
        }
    }

    /// One prompt, with retries on transient failures only.
    pub fn estimate(&self, prompt: &PromptRecord) -> Result<ParsedEstimate> {
        let body = json!({
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": prompt.instruction},
                {"role": "user", "content": prompt.input},
            ],
            "temperature": self.cfg.temperature,
        });
        let mut attempt: u32 = 0;
        loop {
            match self.post_once(&body) {
                Reply::Content(content) => return parse_response(&content),
                Reply::Fatal(e) => return Err(e),
                Reply::Retryable(e) => {
                    if attempt >= self.cfg.max_retries {
                        return Err(match e {
                            Error::Transport { message, .. } => Error::Transport {
                                attempts: attempt + 1,
                                message,
                            },
                            other => other,
                        });
                    }
                    let delay = self.cfg.retry_backoff_s * 2f64.powi(attempt as i32);
                    std::thread::sleep(Duration::from_secs_f64(delay.min(5.0)));
                    attempt += 1;
                }
            }
        }
    }

    /// Estimate a batch with at most `max_concurrency` requests in flight.
    /// `results[i]` always corresponds to `prompts[i]`.
    pub fn estimate_batch(&self, prompts: &[PromptRecord]) -> Vec<Result<ParsedEstimate>> {
        let n = prompts.len();
        if n == 0 {
            return Vec::new();
        }
        let workers = self.cfg.max_concurrency.clamp(1, n);
        let cursor = AtomicUsize::new(0);
        let results: Vec<Mutex<Option<Result<ParsedEstimate>>>> =
            (0..n).map(|_| Mutex::new(None)).collect();

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let outcome = self.estimate(&prompts[i]);
                    *results[i].lock().unwrap() = Some(outcome);
                });
            }
        });

        results
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
            .collect()
    }
}

/// Pull `choices[0].message.content` out of a completions reply.
fn extract_content(body: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(body).ok()?;
    value
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_owned)
}

/// Convenience wrapper: build a client and estimate a single prompt.
pub fn estimate_via_endpoint(cfg: &EndpointConfig, prompt: &PromptRecord) -> Result<ParsedEstimate> {
    ChatClient::new(cfg.clone())?.estimate(prompt)
}

//! Chat-completion HTTP client.
//!
//! Speaks the widely deployed `/v1/chat/completions` JSON shape: a model
//! name, a message list and optional sampling parameters in, the first
//! choice's assistant text out. Transport errors, timeouts, 408, 429 and 5xx
//! responses are retried with exponential backoff.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::AgentError;
use crate::debate::{Side, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub path: String,
    pub model: String,
    /// Header carrying the token; its value is `Bearer <token>` for
    /// `Authorization` and the raw token otherwise.
    pub auth_header: String,
    /// Environment variable holding the token. Secrets never live in config.
    pub token_env: String,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_secs: u64,
    /// Retries after the first attempt.
    pub retry_limit: u32,
    pub backoff_base_ms: u64,
    /// User message sent to the starter before the first turn.
    pub kickoff: String,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000".into(),
            path: "/v1/chat/completions".into(),
            model: "default".into(),
            auth_header: "Authorization".into(),
            token_env: "DEBATESIM_API_TOKEN".into(),
            temperature: None,
            top_p: None,
            max_tokens: None,
            timeout_secs: 120,
            retry_limit: 3,
            backoff_base_ms: 500,
            kickoff: "Please open the debate with your first argument.".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Shared, thread-safe client. One instance serves every in-flight debate.
pub struct EndpointClient {
    config: EndpointConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

impl EndpointClient {
    /// Builds a client, reading the token from `config.token_env` if set.
    pub fn new(config: EndpointConfig) -> Self {
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        Self::with_token(config, token)
    }

    pub fn with_token(config: EndpointConfig, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        EndpointClient { config, token, agent }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn url(&self) -> String {
        format!(
            "{}/{}",
            self.config.base_url.trim_end_matches('/'),
            self.config.path.trim_start_matches('/')
        )
    }

    /// Maps the debate so far onto a chat request from `side`'s point of view:
    /// its own turns become assistant messages, the opponent's user messages.
    pub fn build_request(&self, instructions: &str, side: Side, history: &[Turn]) -> ChatRequest {
        let mut messages = vec![ChatMessage {
            role: "system".into(),
            content: instructions.to_string(),
        }];
        if history.first().is_none_or(|t| t.side == side) {
            messages.push(ChatMessage {
                role: "user".into(),
                content: self.config.kickoff.clone(),
            });
        }
        messages.extend(history.iter().map(|turn| ChatMessage {
            role: if turn.side == side { "assistant" } else { "user" }.into(),
            content: turn.text.clone(),
        }));
        ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
            top_p: self.config.top_p,
            max_tokens: self.config.max_tokens,
        }
    }

    /// Sends `request`, retrying retryable failures up to `retry_limit` times.
    pub fn complete(&self, request: &ChatRequest) -> Result<String, AgentError> {
        let attempts = self.config.retry_limit + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self
                    .config
                    .backoff_base_ms
                    .saturating_mul(1u64 << (attempt - 1).min(16));
                debug!(attempt, delay_ms = delay, "retrying chat request");
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(request) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(msg) => {
                    warn!(attempt, error = %msg, "chat request failed");
                    last_error = msg;
                }
                Attempt::Fatal(msg) => {
                    return Err(AgentError::Backend {
                        attempts: attempt + 1,
                        message: msg,
                    })
                }
            }
        }
        Err(AgentError::Backend {
            attempts,
            message: last_error,
        })
    }

    fn attempt(&self, request: &ChatRequest) -> Attempt {
        let mut builder = self.agent.post(self.url());
        if let Some(token) = &self.token {
            let value = if self.config.auth_header.eq_ignore_ascii_case("authorization") {
                format!("Bearer {token}")
            } else {
                token.clone()
            };
            builder = builder.header(self.config.auth_header.as_str(), value);
        }
        let response = match builder.send_json(request) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport error: {e}")),
        };
        let status = response.status().as_u16();
        let mut body = response.into_body();
        if !(200..300).contains(&status) {
            let text = body.read_to_string().unwrap_or_default();
            let msg = format!("HTTP {status}: {}", truncate(&text, 200));
            return if matches!(status, 408 | 429) || status >= 500 {
                Attempt::Retry(msg)
            } else {
                Attempt::Fatal(msg)
            };
        }
        match body.read_json::<ChatResponse>() {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(choice) => Attempt::Done(choice.message.content.unwrap_or_default()),
                None => Attempt::Fatal("response has no choices".into()),
            },
            Err(e) => Attempt::Retry(format!("malformed response body: {e}")),
        }
    }

    /// Model and sampling settings as configured; `null` means the endpoint default.
    pub fn metadata(&self) -> BTreeMap<String, serde_json::Value> {
        let c = &self.config;
        BTreeMap::from([
            ("model".to_string(), c.model.clone().into()),
            ("temperature".to_string(), c.temperature.into()),
            ("top_p".to_string(), c.top_p.into()),
            ("max_tokens".to_string(), c.max_tokens.into()),
        ])
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debate::TurnKind;

    fn turn(index: u32, side: Side, text: &str) -> Turn {
        Turn {
            index,
            side,
            text: text.into(),
            kind: TurnKind::Argument,
        }
    }

    #[test]
    fn starter_gets_kickoff_and_roles_alternate() {
        let client = EndpointClient::with_token(EndpointConfig::default(), None);
        let history = [turn(1, Side::Pro, "p1"), turn(2, Side::Con, "c1")];
        let req = client.build_request("sys", Side::Pro, &history);
        let roles: Vec<_> = req.messages.iter().map(|m| m.role.as_str()).collect();
        assert_eq!(roles, ["system", "user", "assistant", "user"]);

        let req = client.build_request("sys", Side::Con, &history[..1]);
        let roles: Vec<_> = req.messages.iter().map(|m| m.role.as_str()).collect();
        assert_eq!(roles, ["system", "user"]);
        assert_eq!(req.messages[1].content, "p1");
    }

    #[test]
    fn identical_inputs_give_identical_payloads() {
        let client = EndpointClient::with_token(
            EndpointConfig {
                temperature: Some(0.7),
                ..Default::default()
            },
            None,
        );
        let history = [turn(1, Side::Con, "c1")];
        let a = serde_json::to_string(&client.build_request("sys", Side::Pro, &history)).unwrap();
        let b = serde_json::to_string(&client.build_request("sys", Side::Pro, &history)).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"temperature\":0.7"));
        assert!(!a.contains("top_p"));
    }

    #[test]
    fn url_joins_cleanly() {
        let client = EndpointClient::with_token(
            EndpointConfig {
                base_url: "http://h:1/".into(),
                path: "/v1/chat/completions".into(),
                ..Default::default()
            },
            None,
        );
        assert_eq!(client.url(), "http://h:1/v1/chat/completions");
    }
}

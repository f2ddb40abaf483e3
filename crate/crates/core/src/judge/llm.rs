//! Chat-completions judge: builds the prompt, posts it, parses the reply.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::parse::parse_selection;
use super::prompt::{build_ordering_prompt, build_prompt, ChatMessage};
use super::{Judge, JudgeError, JudgeRequest, JudgeSelection, OrderingJudge, OrderingRequest};

/// Endpoint, model, and retry settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    /// Full chat-completions URL, e.g. `https://api.openai.com/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
    pub max_in_flight: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            api_key: None,
            temperature: 0.0,
            timeout: Duration::from_secs(60),
            max_retries: 4,
            backoff_base: Duration::from_millis(500),
            backoff_max: Duration::from_secs(30),
            max_in_flight: 8,
        }
    }
}

impl LlmConfig {
    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.backoff_base
            .checked_mul(factor)
            .unwrap_or(self.backoff_max)
            .min(self.backoff_max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// Timeouts, connection failures, 429 and 5xx. Retried.
    #[error("transient: {0}")]
    Transient(String),
    #[error("auth rejected (HTTP {0})")]
    Auth(u16),
    #[error("{0}")]
    Fatal(String),
}

/// One round trip: messages in, first choice's content out.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError>;
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Blocking HTTP transport over `ureq`.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
}

impl HttpTransport {
    pub fn new(config: &LlmConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            api_key: config.api_key.clone(),
            temperature: config.temperature,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError> {
        let body = ChatBody {
            model: &self.model,
            messages,
            temperature: self.temperature,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(e) => return Err(classify(e)),
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Err(TransportError::Auth(status)),
            408 | 429 | 500..=599 => {
                return Err(TransportError::Transient(format!("HTTP {status}")))
            }
            _ => return Err(TransportError::Fatal(format!("HTTP {status}"))),
        }
        let reply: ChatReply = resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) | ureq::Error::Io(_) => {
                TransportError::Transient(e.to_string())
            }
            other => TransportError::Fatal(format!("bad reply body: {other}")),
        })?;
        let content = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| TransportError::Fatal("reply has no choices".into()))?
            .message
            .content
            .unwrap_or_default();
        Ok(content)
    }
}

fn classify(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::StatusCode(s @ (401 | 403)) => TransportError::Auth(s),
        ureq::Error::StatusCode(s @ (408 | 429 | 500..=599)) => {
            TransportError::Transient(format!("HTTP {s}"))
        }
        ureq::Error::Timeout(_)
        | ureq::Error::Io(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound
        | ureq::Error::BodyStalled => TransportError::Transient(e.to_string()),
        other => TransportError::Fatal(other.to_string()),
    }
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Gate {
    fn new(limit: usize) -> Self {
        Self {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            limit: limit.max(1),
        }
    }

    fn enter(&self) -> GatePass<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|p| p.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|p| p.into_inner());
        }
        *n += 1;
        GatePass(self)
    }
}

struct GatePass<'a>(&'a Gate);

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|p| p.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Judge backed by a chat model. Caps concurrent requests at
/// `max_in_flight` and retries transient failures with exponential backoff.
pub struct LlmJudge<T = HttpTransport> {
    transport: T,
    config: LlmConfig,
    gate: Gate,
}

impl LlmJudge<HttpTransport> {
    pub fn new(config: LlmConfig) -> Self {
        let transport = HttpTransport::new(&config);
        Self::with_transport(config, transport)
    }
}

impl<T: ChatTransport> LlmJudge<T> {
    pub fn with_transport(config: LlmConfig, transport: T) -> Self {
        Self {
            gate: Gate::new(config.max_in_flight),
            transport,
            config,
        }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// Sends with retries; returns the reply and the number of retries spent.
    fn send(&self, messages: &[ChatMessage]) -> Result<(String, u32), JudgeError> {
        let _pass = self.gate.enter();
        let mut retries = 0u32;
        loop {
            match self.transport.complete(messages) {
                Ok(text) => return Ok((text, retries)),
                Err(TransportError::Auth(status)) => return Err(JudgeError::Auth { status }),
                Err(TransportError::Fatal(msg)) => return Err(JudgeError::Protocol(msg)),
                Err(TransportError::Transient(msg)) => {
                    if retries >= self.config.max_retries {
                        return Err(JudgeError::Unavailable {
                            attempts: retries + 1,
                            reason: msg,
                        });
                    }
                    let wait = self.config.backoff(retries);
                    warn!(
                        "transient judge failure ({msg}); retry {} in {wait:?}",
                        retries + 1
                    );
                    std::thread::sleep(wait);
                    retries += 1;
                }
            }
        }
    }
}

impl<T: ChatTransport> Judge for LlmJudge<T> {
    fn select(&self, request: &JudgeRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        request.validate()?;
        let messages = build_prompt(request.query, &request.presented, request.select);
        let (raw, retries) = self.send(&messages)?;
        let mut sel = parse_selection(&raw, request.len(), request.select);
        if sel.repair_applied {
            debug!("repaired judge reply {raw:?} -> {:?}", sel.chosen_labels);
        }
        sel.retries = retries;
        Ok(sel)
    }
}

impl<T: ChatTransport> OrderingJudge for LlmJudge<T> {
    fn order(&self, request: &OrderingRequest<'_>) -> Result<JudgeSelection, JudgeError> {
        let messages = build_ordering_prompt(request.query, &request.presented);
        let (raw, retries) = self.send(&messages)?;
        let mut sel = parse_selection(&raw, request.len(), request.len());
        sel.retries = retries;
        Ok(sel)
    }
}

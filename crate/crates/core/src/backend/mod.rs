//! Chat-completion transport.
//!
//! [`ChatBackend`] is the single call the pipeline needs: send a system and a
//! user message, get the raw assistant text and token usage back. Two
//! implementations ship: [`HttpBackend`] for OpenAI-style endpoints (behind the
//! `http` feature) and [`MockBackend`], driven by a script file, for offline
//! runs and tests.
//!
//! [`Dispatcher`] wraps a backend with the policies a batch needs: retries up
//! to a fixed patience, jittered backoff, a requests-per-minute limiter and a
//! bounded worker pool.

mod clock;
#[cfg(feature = "http")]
mod http;
mod mock;
mod pool;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptBundle;

pub use clock::{Clock, SimulatedClock, SystemClock};
#[cfg(feature = "http")]
pub use http::HttpBackend;
pub use mock::{MockBackend, MockError, MockScript, MockStep};
pub use pool::{Dispatcher, Job, JobResult, Outcome, PoolError};

pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo-0301";
pub const DEFAULT_API_KEY_ENV: &str = "ANNOTATOR_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by the backend")]
    RateLimited { retry_after: Option<Duration> },
    #[error("API error {status}: {body}")]
    Api { status: u16, body: String },
    #[error("environment variable {var} holding the API key is not set")]
    AuthMissing { var: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("mock script: {0}")]
    Script(String),
}

/// Connection and policy settings for a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub api_base_url: String,
    pub model_id: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Per-request timeout in seconds.
    pub request_timeout: f64,
    /// Attempts per item before it is excluded.
    pub patience: u32,
    pub max_concurrency: usize,
    pub requests_per_minute: Option<u32>,
    /// Base of the jittered backoff between attempts, in milliseconds.
    pub retry_base_delay_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            api_base_url: DEFAULT_API_BASE.into(),
            model_id: DEFAULT_MODEL.into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            temperature: 1.0,
            max_output_tokens: 1024,
            request_timeout: 60.0,
            patience: 3,
            max_concurrency: 4,
            requests_per_minute: None,
            retry_base_delay_ms: 2000,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: &str| Err(BackendError::InvalidConfig(m.into()));
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_concurrency == 0 {
            return bad("max_concurrency must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must lie in [0, 2]");
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be positive");
        }
        if !(self.request_timeout > 0.0 && self.request_timeout.is_finite()) {
            return bad("request_timeout must be a positive number of seconds");
        }
        if self.requests_per_minute == Some(0) {
            return bad("requests_per_minute must be positive");
        }
        if self.model_id.trim().is_empty() {
            return bad("model_id is empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn from_bundle(bundle: &PromptBundle, config: &BackendConfig) -> Self {
        Self {
            model_id: config.model_id.clone(),
            messages: vec![
                ChatMessage {
                    role: Role::System,
                    content: bundle.system_message.clone(),
                },
                ChatMessage {
                    role: Role::User,
                    content: bundle.user_message.clone(),
                },
            ],
            temperature: config.temperature,
            max_tokens: config.max_output_tokens,
        }
    }
}

/// Token counts for one or more exchanges. `estimated` is set when any part
/// came from [`estimate_tokens`] rather than from the backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub estimated: bool,
}

impl Usage {
    pub fn estimate(req: &ChatRequest, response: &str) -> Self {
        Self {
            prompt_tokens: req.messages.iter().map(|m| estimate_tokens(&m.content)).sum(),
            completion_tokens: estimate_tokens(response),
            estimated: true,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl std::ops::Add for Usage {
    type Output = Usage;
    fn add(self, o: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + o.prompt_tokens,
            completion_tokens: self.completion_tokens + o.completion_tokens,
            estimated: self.estimated || o.estimated,
        }
    }
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, o: Usage) {
        *self = *self + o;
    }
}

/// Fallback token count: each maximal run of alphanumeric characters is one
/// token, and so is every other non-whitespace character.
pub fn estimate_tokens(text: &str) -> u64 {
    let mut n = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if !in_word {
                n += 1;
            }
            in_word = true;
        } else {
            in_word = false;
            if !c.is_whitespace() {
                n += 1;
            }
        }
    }
    n
}

/// One request and its reply.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub request: ChatRequest,
    pub response: String,
    pub usage: Usage,
    pub latency: Duration,
}

/// Which job and attempt a request belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestContext {
    pub job_index: usize,
    pub job_id: String,
    /// 1-based.
    pub attempt: u32,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, ctx: &RequestContext, req: &ChatRequest) -> Result<ChatExchange, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, ctx: &RequestContext, req: &ChatRequest) -> Result<ChatExchange, BackendError> {
        (**self).complete(ctx, req)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, ctx: &RequestContext, req: &ChatRequest) -> Result<ChatExchange, BackendError> {
        (**self).complete(ctx, req)
    }
}

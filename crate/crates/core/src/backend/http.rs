use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{BackendConfig, BackendError, ChatBackend, ChatExchange, ChatRequest, RequestContext, Usage};

#[derive(Debug, Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Debug, Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

/// Client for OpenAI-compatible `/chat/completions` endpoints.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("endpoint", &self.endpoint).finish_non_exhaustive()
    }
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable; fails with
    /// `AuthMissing` before any network traffic if it is unset or empty.
    pub fn new(config: &BackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::AuthMissing {
                var: config.api_key_env.clone(),
            })?;
        Self::with_key(config, &key)
    }

    pub fn with_key(config: &BackendConfig, api_key: &str) -> Result<Self, BackendError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.request_timeout))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", config.api_base_url.trim_end_matches('/')),
            api_key: api_key.to_string(),
        })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, _ctx: &RequestContext, req: &ChatRequest) -> Result<ChatExchange, BackendError> {
        let body = json!({
            "model": req.model_id,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let started = Instant::now();
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        let latency = started.elapsed();
        if status == 429 {
            return Err(BackendError::RateLimited { retry_after });
        }
        if !(200..300).contains(&status) {
            return Err(BackendError::Api { status, body: text });
        }
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        let response = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::MalformedResponse("no choices[0].message.content".into()))?;
        let usage = match wire.usage {
            Some(u) => Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
                estimated: false,
            },
            None => Usage::estimate(req, &response),
        };
        Ok(ChatExchange {
            request: req.clone(),
            response,
            usage,
            latency,
        })
    }
}

//! Provider-agnostic text generation with per-token log-probabilities.
//!
//! [`TextGenerator`] is the seam every pipeline stage talks to. Two
//! implementations ship: [`ChatCompletionsProvider`] for HTTP endpoints that
//! speak the chat-completions JSON shape, and [`ScriptedProvider`], a
//! deterministic mock keyed by prompt digest.

mod http;
mod mock;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{
    ChatCompletionsProvider, ExchangeLog, HttpReply, HttpRequest, Transport, UreqTransport,
    WireDialect,
};
pub use mock::{ScriptedProvider, ScriptedResponse};

pub const DEFAULT_TEMPERATURE: f64 = 0.6;
pub const DEFAULT_MAX_TOKENS_TASK1: u32 = 1024;
pub const DEFAULT_MAX_TOKENS_TASK2: u32 = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("malformed provider response: {0}")]
    MalformedProviderResponse(String),
    #[error("no scripted response for prompt digest {digest}")]
    UnscriptedPrompt { digest: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Decoding {
    Greedy,
    Beam { width: u32 },
    TopK { k: u32 },
    ProviderDefault,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding::ProviderDefault
    }
}

impl fmt::Display for Decoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decoding::Greedy => f.write_str("greedy"),
            Decoding::Beam { width } => write!(f, "beam:{width}"),
            Decoding::TopK { k } => write!(f, "topk:{k}"),
            Decoding::ProviderDefault => f.write_str("default"),
        }
    }
}

impl FromStr for Decoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let positive = |v: &str| -> Result<u32, String> {
            match v.parse::<u32>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(format!("expected a positive integer, got {v:?}")),
            }
        };
        match s.trim() {
            "greedy" => Ok(Decoding::Greedy),
            "default" | "provider-default" => Ok(Decoding::ProviderDefault),
            other => match other.split_once(':') {
                Some(("beam", w)) => Ok(Decoding::Beam { width: positive(w)? }),
                Some(("topk", k)) => Ok(Decoding::TopK { k: positive(k)? }),
                _ => Err(format!("unknown decoding {other:?} (greedy|beam:W|topk:K|default)")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub decoding: Decoding,
    pub max_tokens: u32,
    pub want_logprobs: bool,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            decoding: Decoding::ProviderDefault,
            max_tokens: DEFAULT_MAX_TOKENS_TASK1,
            want_logprobs: true,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        match self.decoding {
            Decoding::Beam { width: 0 } | Decoding::TopK { k: 0 } => Err(LlmError::InvalidRequest(
                "beam width and top-k must be >= 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub tokens: Option<Vec<TokenLogprob>>,
    pub provider_model_id: String,
    pub latency_ms: u64,
    pub attempts: u32,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<ExchangeLog>,
}

/// Checks the token invariants shared by every provider: log-probabilities
/// are never positive and the token texts spell out the completion.
pub fn validate_tokens(text: &str, tokens: &[TokenLogprob]) -> Result<(), LlmError> {
    if let Some(t) = tokens.iter().find(|t| !(t.logprob <= 0.0)) {
        return Err(LlmError::MalformedProviderResponse(format!(
            "token {:?} has log-probability {}",
            t.token, t.logprob
        )));
    }
    let joined: String = tokens.iter().map(|t| t.token.as_str()).collect();
    if joined != text {
        return Err(LlmError::MalformedProviderResponse(
            "token texts do not concatenate to the completion".into(),
        ));
    }
    Ok(())
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, LlmError>;

    fn model_id(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_backoff_ms: 500,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `next` (2-based): base, 2·base, 4·base, ...
    pub fn backoff(&self, next: u32) -> std::time::Duration {
        let exp = next.saturating_sub(2).min(16);
        std::time::Duration::from_millis(self.base_backoff_ms.saturating_mul(1 << exp))
    }
}

/// Connection settings. Holds the *name* of the variable carrying the secret,
/// never the secret.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub auth_env_var: Option<String>,
    pub max_parallel: usize,
    pub retry: RetryPolicy,
    pub request_timeout_ms: u64,
    pub dialect: WireDialect,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-3.5-turbo".into(),
            auth_env_var: Some("OPENAI_API_KEY".into()),
            max_parallel: 4,
            retry: RetryPolicy::default(),
            request_timeout_ms: 120_000,
            dialect: WireDialect::OpenAi,
        }
    }
}

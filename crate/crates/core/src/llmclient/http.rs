use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{
    validate_tokens, Decoding, GenerationRequest, GenerationResponse, LlmError, ProviderConfig,
    TextGenerator, TokenLogprob,
};
use crate::concurrency::Semaphore;

/// Which request fields the endpoint understands beyond the common core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireDialect {
    /// Hosted API: honors temperature and greedy (temperature 0) only.
    OpenAi,
    /// Local model server: also honors `top_k` and beam search.
    VllmCompatible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

pub trait Transport: Send + Sync {
    /// `Err` is a connection-level failure; HTTP error statuses are `Ok`.
    fn send(&self, req: &HttpRequest) -> Result<HttpReply, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new() -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for UreqTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpReply, String> {
        let mut builder = self
            .agent
            .post(&req.url)
            .config()
            .timeout_global(Some(req.timeout))
            .build();
        for (k, v) in &req.headers {
            builder = builder.header(k.as_str(), v.as_str());
        }
        let mut resp = builder.send(req.body.as_str()).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

/// Request and response bodies as sent, with credentials redacted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeLog {
    pub endpoint: String,
    pub request_headers: Vec<(String, String)>,
    pub request_body: Value,
    pub response_status: u16,
    pub response_body: String,
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub struct ChatCompletionsProvider {
    cfg: ProviderConfig,
    transport: Arc<dyn Transport>,
    gate: Semaphore,
    sleeper: Sleeper,
    env: Arc<dyn Fn(&str) -> Option<String> + Send + Sync>,
}

impl ChatCompletionsProvider {
    pub fn new(cfg: ProviderConfig) -> Self {
        Self::with_transport(cfg, Arc::new(UreqTransport::new()))
    }

    pub fn with_transport(cfg: ProviderConfig, transport: Arc<dyn Transport>) -> Self {
        let gate = Semaphore::new(cfg.max_parallel);
        ChatCompletionsProvider {
            cfg,
            transport,
            gate,
            sleeper: Arc::new(std::thread::sleep),
            env: Arc::new(|k| std::env::var(k).ok()),
        }
    }

    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    /// Overrides environment lookup for the auth secret.
    pub fn with_env(mut self, env: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> Self {
        self.env = Arc::new(env);
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    fn secret(&self) -> Result<Option<String>, LlmError> {
        match &self.cfg.auth_env_var {
            None => Ok(None),
            Some(var) => match (self.env)(var) {
                Some(v) if !v.is_empty() => Ok(Some(v)),
                _ => Err(LlmError::Auth(format!("environment variable {var} is not set"))),
            },
        }
    }

    fn build_body(&self, req: &GenerationRequest, warnings: &mut Vec<String>) -> Value {
        let mut body = json!({
            "model": self.cfg.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if req.want_logprobs {
            body["logprobs"] = json!(true);
        }
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        match (self.cfg.dialect, req.decoding) {
            (_, Decoding::ProviderDefault) => {}
            (_, Decoding::Greedy) => body["temperature"] = json!(0.0),
            (WireDialect::VllmCompatible, Decoding::TopK { k }) => body["top_k"] = json!(k),
            (WireDialect::VllmCompatible, Decoding::Beam { width }) => {
                body["use_beam_search"] = json!(true);
                body["best_of"] = json!(width);
            }
            (WireDialect::OpenAi, d) => {
                let msg = format!("decoding {d} not supported by endpoint; using provider default");
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        body
    }
}

fn parse_reply(body: &str, want_logprobs: bool) -> Result<(String, Option<Vec<TokenLogprob>>, Option<String>), LlmError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| LlmError::MalformedProviderResponse(format!("invalid JSON: {e}")))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::MalformedProviderResponse("missing choices[0]".into()))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::MalformedProviderResponse("missing message.content".into()))?
        .to_string();
    let model = v.get("model").and_then(Value::as_str).map(str::to_string);
    let tokens = match choice.pointer("/logprobs/content").and_then(Value::as_array) {
        Some(items) if want_logprobs => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                let token = item.get("token").and_then(Value::as_str);
                let lp = item.get("logprob").and_then(Value::as_f64);
                match (token, lp) {
                    (Some(t), Some(lp)) => out.push(TokenLogprob { token: t.to_string(), logprob: lp }),
                    _ => {
                        return Err(LlmError::MalformedProviderResponse(
                            "logprob entry lacks token or logprob".into(),
                        ))
                    }
                }
            }
            validate_tokens(&text, &out)?;
            Some(out)
        }
        _ => None,
    };
    Ok((text, tokens, model))
}

impl TextGenerator for ChatCompletionsProvider {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, LlmError> {
        req.validate()?;
        let secret = self.secret()?;
        let mut warnings = Vec::new();
        let body = self.build_body(req, &mut warnings);
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(s) = &secret {
            headers.push(("Authorization".to_string(), format!("Bearer {s}")));
        }
        let http = HttpRequest {
            url: self.cfg.endpoint_url.clone(),
            headers,
            body: body.to_string(),
            timeout: Duration::from_millis(self.cfg.request_timeout_ms),
        };
        let redacted: Vec<(String, String)> = http
            .headers
            .iter()
            .map(|(k, v)| {
                if k.eq_ignore_ascii_case("authorization") {
                    (k.clone(), "Bearer <redacted>".to_string())
                } else {
                    (k.clone(), v.clone())
                }
            })
            .collect();

        let max_attempts = self.cfg.retry.max_attempts.max(1);
        let _permit = self.gate.acquire();
        let started = Instant::now();
        let mut last_err = LlmError::Transport { attempts: 0, message: "no attempt made".into() };
        for attempt in 1..=max_attempts {
            if attempt > 1 {
                (self.sleeper)(self.cfg.retry.backoff(attempt));
            }
            debug!(attempt, url = %self.cfg.endpoint_url, "sending generation request");
            let reply = match self.transport.send(&http) {
                Ok(r) => r,
                Err(message) => {
                    last_err = LlmError::Transport { attempts: attempt, message };
                    continue;
                }
            };
            match reply.status {
                200..=299 => {
                    let (text, tokens, model) = parse_reply(&reply.body, req.want_logprobs)?;
                    return Ok(GenerationResponse {
                        text,
                        tokens,
                        provider_model_id: model.unwrap_or_else(|| self.cfg.model_id.clone()),
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts: attempt,
                        warnings,
                        exchange: Some(ExchangeLog {
                            endpoint: self.cfg.endpoint_url.clone(),
                            request_headers: redacted,
                            request_body: body,
                            response_status: reply.status,
                            response_body: reply.body,
                        }),
                    });
                }
                401 | 403 => {
                    return Err(LlmError::Auth(format!("endpoint answered HTTP {}", reply.status)))
                }
                429 => last_err = LlmError::RateLimited { attempts: attempt },
                500..=599 => {
                    last_err = LlmError::Transport {
                        attempts: attempt,
                        message: format!("HTTP {}", reply.status),
                    }
                }
                s => {
                    return Err(LlmError::Transport {
                        attempts: attempt,
                        message: format!("HTTP {s}: {}", truncate(&reply.body, 200)),
                    })
                }
            }
        }
        Err(last_err)
    }

    fn model_id(&self) -> String {
        self.cfg.model_id.clone()
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

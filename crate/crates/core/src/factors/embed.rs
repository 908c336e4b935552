use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::FactorError;
use crate::llmclient::{HttpRequest, Transport, UreqTransport};

pub const DEFAULT_BUCKETS: usize = 4096;

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f64>, FactorError>;
}

/// Character-trigram counts hashed (FNV-1a, 64-bit) into fixed buckets,
/// L2-normalized. Texts shorter than three characters form a single gram.
#[derive(Debug, Clone, Copy)]
pub struct TrigramEmbedder {
    buckets: usize,
}

impl TrigramEmbedder {
    pub fn new(buckets: usize) -> Self {
        TrigramEmbedder { buckets: buckets.max(1) }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for TrigramEmbedder {
    fn name(&self) -> String {
        format!("trigram-fnv1a-{}", self.buckets)
    }

    fn dimension(&self) -> usize {
        self.buckets
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, FactorError> {
        let mut v = vec![0.0; self.buckets];
        let starts: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
        if starts.is_empty() {
            return Err(FactorError::ZeroNorm);
        }
        let mut add = |gram: &str| {
            v[(fnv1a(gram.as_bytes()) % self.buckets as u64) as usize] += 1.0;
        };
        if starts.len() < 3 {
            add(text);
        } else {
            for w in 0..starts.len() - 2 {
                let end = starts.get(w + 3).copied().unwrap_or(text.len());
                add(&text[starts[w]..end]);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Client for an external embedding endpoint speaking the common
/// `{"model","input"} -> {"data":[{"embedding":[..]}]}` shape.
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    dimension: usize,
    auth_env_var: Option<String>,
    timeout: Duration,
    transport: Arc<dyn Transport>,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dimension: usize) -> Self {
        HttpEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            dimension,
            auth_env_var: None,
            timeout: Duration::from_secs(60),
            transport: Arc::new(UreqTransport::new()),
        }
    }

    pub fn with_auth_env_var(mut self, var: impl Into<String>) -> Self {
        self.auth_env_var = Some(var.into());
        self
    }

    pub fn with_transport(mut self, t: Arc<dyn Transport>) -> Self {
        self.transport = t;
        self
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn name(&self) -> String {
        format!("http:{}", self.model)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, FactorError> {
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(var) = &self.auth_env_var {
            let secret = std::env::var(var)
                .map_err(|_| FactorError::Embedding(format!("environment variable {var} is not set")))?;
            headers.push(("Authorization".to_string(), format!("Bearer {secret}")));
        }
        let req = HttpRequest {
            url: self.endpoint.clone(),
            headers,
            body: json!({"model": self.model, "input": text}).to_string(),
            timeout: self.timeout,
        };
        let reply = self.transport.send(&req).map_err(FactorError::Embedding)?;
        if !(200..300).contains(&reply.status) {
            return Err(FactorError::Embedding(format!("HTTP {}", reply.status)));
        }
        let v: Value = serde_json::from_str(&reply.body).map_err(|e| FactorError::Embedding(e.to_string()))?;
        let vec: Vec<f64> = v
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| FactorError::Embedding("missing data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| FactorError::Embedding("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        if vec.len() != self.dimension {
            return Err(FactorError::DimensionMismatch { expected: self.dimension, got: vec.len() });
        }
        Ok(vec)
    }
}

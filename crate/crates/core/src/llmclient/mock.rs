use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{validate_tokens, GenerationRequest, GenerationResponse, LlmError, TextGenerator, TokenLogprob};
use crate::digest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenLogprob>>,
}

impl ScriptedResponse {
    pub fn text(text: impl Into<String>) -> Self {
        ScriptedResponse { text: text.into(), tokens: None }
    }

    pub fn with_tokens(tokens: Vec<TokenLogprob>) -> Self {
        let text = tokens.iter().map(|t| t.token.as_str()).collect();
        ScriptedResponse { text, tokens: Some(tokens) }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default = "default_model")]
    model_id: String,
    /// Prompt digest to responses.
    #[serde(default)]
    responses: BTreeMap<String, Vec<ScriptedResponse>>,
}

fn default_model() -> String {
    "scripted".into()
}

/// Deterministic provider replaying scripted responses.
///
/// Keys are [`sha256_hex`] digests of the prompt text. Each key's list is
/// consumed round-robin.
#[derive(Debug)]
pub struct ScriptedProvider {
    model_id: String,
    script: BTreeMap<String, Vec<ScriptedResponse>>,
    cursor: Mutex<HashMap<String, usize>>,
}

impl ScriptedProvider {
    pub fn new(model_id: impl Into<String>) -> Self {
        ScriptedProvider {
            model_id: model_id.into(),
            script: BTreeMap::new(),
            cursor: Mutex::new(HashMap::new()),
        }
    }

    /// Scripts responses for a prompt given by its text.
    pub fn with_prompt(mut self, prompt: &str, responses: Vec<ScriptedResponse>) -> Self {
        self.insert_digest(sha256_hex(prompt), responses);
        self
    }

    pub fn insert_digest(&mut self, digest: String, responses: Vec<ScriptedResponse>) {
        self.script.entry(digest).or_default().extend(responses);
    }

    pub fn from_json_str(text: &str) -> Result<Self, LlmError> {
        let f: ScriptFile = serde_json::from_str(text)
            .map_err(|e| LlmError::InvalidRequest(format!("invalid script: {e}")))?;
        let mut p = ScriptedProvider::new(f.model_id);
        for (k, v) in f.responses {
            if v.is_empty() {
                return Err(LlmError::InvalidRequest(format!("script entry {k} has no responses")));
            }
            p.insert_digest(k, v);
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::InvalidRequest(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let f = ScriptFile { model_id: self.model_id.clone(), responses: self.script.clone() };
        serde_json::to_string_pretty(&f).expect("script serializes")
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl TextGenerator for ScriptedProvider {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, LlmError> {
        req.validate()?;
        let digest = sha256_hex(&req.prompt);
        let Some(list) = self.script.get(&digest).filter(|l| !l.is_empty()) else {
            return Err(LlmError::UnscriptedPrompt { digest });
        };
        let idx = {
            let mut cur = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
            let c = cur.entry(digest).or_insert(0);
            let i = *c % list.len();
            *c += 1;
            i
        };
        let r = &list[idx];
        if let Some(toks) = &r.tokens {
            validate_tokens(&r.text, toks)?;
        }
        Ok(GenerationResponse {
            text: r.text.clone(),
            tokens: if req.want_logprobs { r.tokens.clone() } else { None },
            provider_model_id: self.model_id.clone(),
            latency_ms: 0,
            attempts: 1,
            warnings: Vec::new(),
            exchange: None,
        })
    }

    fn model_id(&self) -> String {
        self.model_id.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_robin() {
        let p = ScriptedProvider::new("m").with_prompt(
            "P",
            vec![ScriptedResponse::text("A"), ScriptedResponse::text("B")],
        );
        let req = GenerationRequest::new("P");
        let got: Vec<String> = (0..3).map(|_| p.generate(&req).unwrap().text).collect();
        assert_eq!(got, ["A", "B", "A"]);
    }

    #[test]
    fn unscripted() {
        let p = ScriptedProvider::new("m");
        assert!(matches!(
            p.generate(&GenerationRequest::new("Q")),
            Err(LlmError::UnscriptedPrompt { .. })
        ));
    }

    #[test]
    fn tokens_verbatim_and_file_round_trip() {
        let toks = vec![
            TokenLogprob { token: "Y".into(), logprob: -0.1 },
            TokenLogprob { token: "es".into(), logprob: -0.2 },
        ];
        let p = ScriptedProvider::new("m").with_prompt("P", vec![ScriptedResponse::with_tokens(toks.clone())]);
        let p2 = ScriptedProvider::from_json_str(&p.to_json_string()).unwrap();
        let r = p2.generate(&GenerationRequest::new("P")).unwrap();
        assert_eq!(r.text, "Yes");
        assert_eq!(r.tokens.unwrap(), toks);
        assert_eq!(r.latency_ms, 0);
    }
}

//! Per-item predictive factors: popularity, length, probing, perplexity and
//! self-consistency.

mod embed;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apidoc::{ApiDatabase, ClassDoc, MethodSpec};
use crate::llmclient::{GenerationRequest, LlmError, TextGenerator, TokenLogprob};
use crate::prompts::{self, parse_probe_answer, ProbeAnswer, RenderedPrompt};

pub use embed::{EmbeddingProvider, HttpEmbedder, TrigramEmbedder, DEFAULT_BUCKETS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("perplexity of an empty token list")]
    EmptyLogprobs,
    #[error("positive log-probability {0}")]
    PositiveLogprob(f64),
    #[error("consistency needs at least one run")]
    NoRuns,
    #[error("distance to centroid needs at least 2 examples, got {0}")]
    TooFewExamples(usize),
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("embedding dimension {got} differs from {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding service: {0}")]
    Embedding(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorVector {
    pub api_popularity: u64,
    pub api_length: usize,
    pub probing: u8,
    pub ppl: f64,
    /// Frequency in [0,1] for Task 1, distance to centroid for Task 2.
    pub consistency: f64,
}

impl FactorVector {
    pub const NAMES: [&'static str; 5] =
        ["API_popularity", "API_length", "Probing", "PPL", "Consistency"];

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.api_popularity as f64,
            self.api_length as f64,
            self.probing as f64,
            self.ppl,
            self.consistency,
        ]
    }
}

/// Package-level popularity shared by every API of the package.
pub fn api_popularity(db: &ApiDatabase, package: &str) -> u64 {
    db.popularity(package)
}

/// Characters in `returnType name(T1, T2)`; constructors omit the return type.
pub fn api_length(m: &MethodSpec) -> usize {
    m.type_signature().chars().count()
}

/// Characters of an already canonical rendering.
pub fn rendering_length(rendering: &str) -> usize {
    rendering.chars().count()
}

/// `exp(-mean(logprobs))`.
pub fn perplexity(logprobs: &[f64]) -> Result<f64, FactorError> {
    if logprobs.is_empty() {
        return Err(FactorError::EmptyLogprobs);
    }
    if let Some(&p) = logprobs.iter().find(|&&p| !(p <= 0.0)) {
        return Err(FactorError::PositiveLogprob(p));
    }
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok((-mean).exp())
}

/// Log-probabilities of the tokens whose text overlaps `span` (byte offsets
/// into the concatenated completion).
pub fn logprobs_in_span(tokens: &[TokenLogprob], span: std::ops::Range<usize>) -> Vec<f64> {
    let mut out = Vec::new();
    let mut pos = 0;
    for t in tokens {
        let end = pos + t.token.len();
        let overlaps = if t.token.is_empty() {
            span.start <= pos && pos < span.end
        } else {
            pos < span.end && span.start < end
        };
        if overlaps {
            out.push(t.logprob);
        }
        pos = end;
    }
    out
}

/// Fraction of runs whose recommendations include `rendering`.
pub fn consistency_task1(rendering: &str, runs: &[BTreeSet<String>]) -> Result<f64, FactorError> {
    if runs.is_empty() {
        return Err(FactorError::NoRuns);
    }
    let hits = runs.iter().filter(|r| r.contains(rendering)).count();
    Ok(hits as f64 / runs.len() as f64)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, FactorError> {
    if a.len() != b.len() {
        return Err(FactorError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(FactorError::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine distance of each vector to the mean vector.
pub fn distances_to_centroid(vectors: &[Vec<f64>]) -> Result<Vec<f64>, FactorError> {
    if vectors.len() < 2 {
        return Err(FactorError::TooFewExamples(vectors.len()));
    }
    let dim = vectors[0].len();
    let mut centroid = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(FactorError::DimensionMismatch { expected: dim, got: v.len() });
        }
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x;
        }
    }
    let n = vectors.len() as f64;
    centroid.iter_mut().for_each(|c| *c /= n);
    vectors
        .iter()
        .map(|v| cosine_similarity(v, &centroid).map(|s| (1.0 - s).max(0.0)))
        .collect()
}

pub fn consistency_task2(codes: &[&str], e: &dyn EmbeddingProvider) -> Result<Vec<f64>, FactorError> {
    if codes.len() < 2 {
        return Err(FactorError::TooFewExamples(codes.len()));
    }
    let vectors = codes.iter().map(|c| e.embed(c)).collect::<Result<Vec<_>, _>>()?;
    distances_to_centroid(&vectors)
}

pub fn default_embedder() -> TrigramEmbedder {
    TrigramEmbedder::new(DEFAULT_BUCKETS)
}

#[derive(Debug, Clone, Copy)]
pub enum ProbeSubject<'a> {
    Class(&'a ClassDoc),
    Api(&'a MethodSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub prompt: RenderedPrompt,
    pub raw: String,
    pub answer: ProbeAnswer,
    pub value: u8,
}

/// One Yes/No question; unparseable answers count as 0.
pub fn probe_factor(
    subject: ProbeSubject<'_>,
    client: &dyn TextGenerator,
    template: &GenerationRequest,
) -> Result<ProbeResult, FactorError> {
    let prompt = match subject {
        ProbeSubject::Class(c) => prompts::render_probe_class(c),
        ProbeSubject::Api(m) => prompts::render_probe_api(m),
    };
    let req = GenerationRequest {
        prompt: prompt.text.clone(),
        ..template.clone()
    };
    let resp = client.generate(&req)?;
    let answer = parse_probe_answer(&resp.text);
    Ok(ProbeResult {
        prompt,
        value: answer.as_bool() as u8,
        raw: resp.text,
        answer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apidoc::CTOR_MARKER;
    use crate::llmclient::{ScriptedProvider, ScriptedResponse};
    use proptest::prelude::*;

    fn m(ret: &str, name: &str, params: &[&str]) -> MethodSpec {
        MethodSpec {
            package_name: "java.util".into(),
            class_name: "ArrayList".into(),
            simple_name: name.into(),
            return_type: ret.into(),
            param_types: params.iter().map(|s| s.to_string()).collect(),
            param_names: vec![None; params.len()],
            is_static: false,
            is_deprecated: false,
            summary: String::new(),
            description: String::new(),
        }
    }

    #[test]
    fn lengths() {
        assert_eq!(api_length(&m("boolean", "add", &["E"])), 14);
        assert_eq!(api_length(&m("void", "clear", &[])), 12);
        assert_eq!(api_length(&m("boolean", "remove", &["Object", "Object"])), "boolean remove(Object, Object)".len());
        assert_eq!(api_length(&m(CTOR_MARKER, "ArrayList", &["int"])), "ArrayList(int)".len());
        assert!(api_length(&m("void", "f", &["int", "int"])) > api_length(&m("void", "f", &["int"])));
    }

    #[test]
    fn perplexity_values() {
        assert_eq!(perplexity(&[0.0, 0.0]).unwrap(), 1.0);
        assert!((perplexity(&[0.5f64.ln(), 0.5f64.ln()]).unwrap() - 2.0).abs() < 1e-12);
        // exp(2) by series: sum 2^k/k!.
        let mut e2 = 0.0;
        let mut term = 1.0;
        for k in 1..40 {
            e2 += term;
            term *= 2.0 / k as f64;
        }
        assert!((perplexity(&[-1.0, -3.0]).unwrap() - e2).abs() < 1e-9);
        assert_eq!(perplexity(&[]), Err(FactorError::EmptyLogprobs));
        assert_eq!(perplexity(&[-1.0, 0.1]), Err(FactorError::PositiveLogprob(0.1)));
    }

    #[test]
    fn span_selection() {
        let toks: Vec<TokenLogprob> = [("\"", -0.1), ("int", -0.2), (" size", -0.3), ("()\"", -0.4), (": R", -0.5)]
            .iter()
            .map(|(t, l)| TokenLogprob { token: t.to_string(), logprob: *l })
            .collect();
        // "int size()" occupies bytes 1..11 of "\"int size()\": R".
        assert_eq!(logprobs_in_span(&toks, 1..11), [-0.2, -0.3, -0.4]);
    }

    #[test]
    fn task1_consistency() {
        let runs: Vec<BTreeSet<String>> = (0..10)
            .map(|i| {
                let mut s = BTreeSet::from(["void clear()".to_string()]);
                if i < 8 {
                    s.insert("boolean add(E)".to_string());
                }
                s
            })
            .collect();
        assert_eq!(consistency_task1("boolean add(E)", &runs).unwrap(), 0.8);
        assert_eq!(consistency_task1("void clear()", &runs).unwrap(), 1.0);
        assert_eq!(consistency_task1("int size()", &runs).unwrap(), 0.0);
        assert_eq!(consistency_task1("x", &[]), Err(FactorError::NoRuns));
    }

    #[test]
    fn orthogonal_pair_distance() {
        // Unit vectors u ⟂ v; centroid (u+v)/2 has norm 1/√2 and u·c = 1/2,
        // so cos = (1/2)/(1/√2) = √2/2 and the distance is 1 − √2/2.
        let expected = 1.0 - 2f64.sqrt() / 2.0;
        let d = distances_to_centroid(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        for x in d {
            assert!((x - expected).abs() < 1e-12);
        }
        let e = default_embedder();
        let d = consistency_task2(&["aaaa", "bbbb"], &e).unwrap();
        assert!((d[0] - expected).abs() < 1e-12 && (d[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_codes_have_zero_distance() {
        let e = default_embedder();
        let codes = vec!["list.add(\"x\");"; 10];
        assert!(consistency_task2(&codes, &e).unwrap().iter().all(|&d| d.abs() < 1e-12));
        assert!(matches!(consistency_task2(&codes[..1], &e), Err(FactorError::TooFewExamples(1))));
    }

    #[test]
    fn probing() {
        let db = ApiDatabase::from_json_str(
            r#"{"packages":[{"name":"java.util","classes":[{"fqcn":"java.util.Base64"}]}]}"#,
        )
        .unwrap();
        let cls = db.query_class("java.util.Base64").unwrap();
        let text = prompts::render_probe_class(cls).text;
        let req = GenerationRequest::new("");
        for (reply, value, answer) in [("Yes", 1, ProbeAnswer::Yes), ("No", 0, ProbeAnswer::No), ("Maybe", 0, ProbeAnswer::Unparseable)] {
            let p = ScriptedProvider::new("m").with_prompt(&text, vec![ScriptedResponse::text(reply)]);
            let r = probe_factor(ProbeSubject::Class(cls), &p, &req).unwrap();
            assert_eq!((r.value, r.answer), (value, answer));
            assert_eq!(r.raw, reply);
        }
    }

    proptest! {
        #[test]
        fn ppl_at_least_one(xs in prop::collection::vec(-20.0f64..=0.0, 1..50)) {
            let p = perplexity(&xs).unwrap();
            prop_assert!(p >= 1.0);
            if xs.iter().all(|&x| x == 0.0) {
                prop_assert_eq!(p, 1.0);
            }
        }

        #[test]
        fn distances_scale_invariant(
            vs in prop::collection::vec(prop::collection::vec(0.01f64..10.0, 4), 2..8),
            k in 0.1f64..100.0,
        ) {
            let a = distances_to_centroid(&vs).unwrap();
            let scaled: Vec<Vec<f64>> = vs.iter().map(|v| v.iter().map(|x| x * k).collect()).collect();
            let b = distances_to_centroid(&scaled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn distances_permute_with_input(codes in prop::collection::vec("[a-z ;()]{3,30}", 2..6)) {
            let e = default_embedder();
            let refs: Vec<&str> = codes.iter().map(String::as_str).collect();
            let mut rev = refs.clone();
            rev.reverse();
            let a = consistency_task2(&refs, &e).unwrap();
            let mut b = consistency_task2(&rev, &e).unwrap();
            b.reverse();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn task1_consistency_grid(hits in prop::collection::vec(any::<bool>(), 1..20)) {
            let runs: Vec<BTreeSet<String>> = hits
                .iter()
                .map(|&h| if h { BTreeSet::from(["a".to_string()]) } else { BTreeSet::new() })
                .collect();
            let c = consistency_task1("a", &runs).unwrap();
            let r = runs.len() as f64;
            prop_assert!(((c * r) - (c * r).round()).abs() < 1e-9);
        }
    }
}

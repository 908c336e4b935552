//! Automated evaluation of API-oriented code generation by language models.
//!
//! The crate is organized along the evaluation pipeline:
//!
//! * [`apidoc`] loads the ground-truth documentation database.
//! * [`signature`] parses and matches recommended method signatures.
//! * [`llmclient`] talks to text-generation providers (or a scripted mock).
//! * [`prompts`] renders prompt templates and extracts structured output.
//! * [`execharness`] checks, compiles and runs generated examples.
//! * [`metrics`] aggregates verdicts and outcomes into quality metrics.
//! * [`factors`] computes per-item predictive factors.
//! * [`stats`] holds the statistical tests and the random forest.
//! * [`runner`] orchestrates runs over an append-only ledger.

pub mod apidoc;
pub mod signature;
pub mod concurrency;
pub mod digest;
pub mod llmclient;
pub mod javasrc;
pub mod prompts;
pub mod execharness;
pub mod metrics;
pub mod factors;
pub mod stats;
pub mod runner;

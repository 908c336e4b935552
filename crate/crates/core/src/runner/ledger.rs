//! Append-only JSONL run ledger.
//!
//! Line 1 is a [`LedgerHeader`]; every following line is a [`LedgerEntry`]
//! with a contiguous sequence number starting at 1. A finished run ends
//! with a `complete` marker carrying the record count.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AnalysisConfig, RagMode, Task};
use super::RunError;
use crate::apidoc::schema::DocFile;
use crate::apidoc::MethodSpec;
use crate::digest::sha256_parts;
use crate::execharness::{ErrorTaxonomyLabel, ExecOutcome};
use crate::llmclient::{Decoding, ExchangeLog, TokenLogprob};
use crate::prompts::{ProbeAnswer, PromptKind};

pub const LEDGER_FORMAT: &str = "apieval-ledger";
pub const LEDGER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub format: String,
    pub version: u32,
    pub model_id: String,
    pub tasks: BTreeSet<Task>,
    pub repetitions: u32,
    pub snippet_number: u32,
    pub api_list_size: usize,
    pub temperature: f64,
    pub decoding: Decoding,
    pub rag_mode: RagMode,
    pub seed: u64,
    pub timeout_seconds: u64,
    pub analysis: AnalysisConfig,
    pub popularity: BTreeMap<String, u64>,
    pub db: DocFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub fqcn: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodSpec>,
}

impl Subject {
    pub fn key(&self) -> String {
        match &self.method {
            Some(m) => format!("{}#{}", self.fqcn, m.display_signature()),
            None => self.fqcn.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestParams {
    pub temperature: f64,
    pub decoding: Decoding,
    pub max_tokens: u32,
    pub want_logprobs: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenLogprob>>,
    pub provider_model_id: String,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<ExchangeLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task1Line {
    pub line: String,
    pub canonical: String,
    pub verdict: crate::signature::VerdictKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<crate::signature::Task1ErrorKind>,
}

/// Outcome fields derived at run time. Task-2 execution results are the only
/// ones replayed as-is by recompute; everything else is re-derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Derived {
    Task1 { lines: Vec<Task1Line> },
    Task2 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        code: Option<String>,
        outcome: ExecOutcome,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        taxonomy: Option<ErrorTaxonomyLabel>,
    },
    Probe { answer: ProbeAnswer },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationEntry {
    pub seq: u64,
    /// Logical clock; equals `seq`.
    pub clock: u64,
    pub record_id: String,
    pub kind: PromptKind,
    pub subject: Subject,
    pub run_index: u32,
    pub rag_mode: RagMode,
    pub prompt_digest: String,
    pub request: RequestParams,
    pub response: ResponseRecord,
    pub derived: Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub seq: u64,
    pub clock: u64,
    pub record_id: String,
    pub kind: PromptKind,
    pub subject: Subject,
    pub run_index: u32,
    pub rag_mode: RagMode,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LedgerEntry {
    Generation(GenerationEntry),
    ProviderFailure(FailureEntry),
    Complete { seq: u64, records: u64 },
}

impl LedgerEntry {
    pub fn seq(&self) -> u64 {
        match self {
            LedgerEntry::Generation(g) => g.seq,
            LedgerEntry::ProviderFailure(f) => f.seq,
            LedgerEntry::Complete { seq, .. } => *seq,
        }
    }
}

pub fn record_id(kind: PromptKind, subject: &Subject, run_index: u32, rag: RagMode) -> String {
    sha256_parts(&[&format!("{kind:?}"), &subject.key(), &run_index.to_string(), rag.as_str()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    pub header: LedgerHeader,
    pub entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn generations(&self) -> impl Iterator<Item = &GenerationEntry> {
        self.entries.iter().filter_map(|e| match e {
            LedgerEntry::Generation(g) => Some(g),
            _ => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &FailureEntry> {
        self.entries.iter().filter_map(|e| match e {
            LedgerEntry::ProviderFailure(f) => Some(f),
            _ => None,
        })
    }

    /// Failures not superseded by a later successful generation.
    pub fn open_failures(&self) -> Vec<&FailureEntry> {
        let done: BTreeSet<&str> = self.generations().map(|g| g.record_id.as_str()).collect();
        self.failures().filter(|f| !done.contains(f.record_id.as_str())).collect()
    }

    pub fn is_complete(&self) -> bool {
        let records = self.entries.iter().filter(|e| !matches!(e, LedgerEntry::Complete { .. })).count() as u64;
        matches!(self.entries.last(), Some(LedgerEntry::Complete { records: r, .. }) if *r == records)
    }

    pub fn last_seq(&self) -> u64 {
        self.entries.last().map(LedgerEntry::seq).unwrap_or(0)
    }
}

fn bad(line: usize, msg: impl std::fmt::Display) -> RunError {
    RunError::Ledger(format!("line {line}: {msg}"))
}

/// What a ledger file holds, tolerating an interrupted final line.
pub struct Scan {
    pub ledger: Ledger,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
    pub torn_tail: bool,
}

pub fn scan(text: &str) -> Result<Scan, RunError> {
    let mut offset = 0usize;
    let mut header = None;
    let mut entries: Vec<LedgerEntry> = Vec::new();
    let mut torn_tail = false;
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let no = i + 1;
        if !raw.ends_with('\n') {
            torn_tail = true;
            break;
        }
        let line = raw.trim_end_matches('\n');
        if header.is_none() {
            let v: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(no, e))?;
            if v.get("format").and_then(|f| f.as_str()) != Some(LEDGER_FORMAT) {
                return Err(bad(no, "not an apieval ledger header"));
            }
            let version = v.get("version").and_then(|x| x.as_u64()).unwrap_or(0);
            if version != LEDGER_VERSION as u64 {
                return Err(RunError::LedgerVersion { found: version as u32, expected: LEDGER_VERSION });
            }
            header = Some(serde_json::from_value::<LedgerHeader>(v).map_err(|e| bad(no, e))?);
        } else {
            let e: LedgerEntry = serde_json::from_str(line).map_err(|e| bad(no, e))?;
            let expected = entries.last().map(LedgerEntry::seq).unwrap_or(0) + 1;
            if e.seq() != expected {
                return Err(RunError::TruncatedLedger { first_missing: expected });
            }
            entries.push(e);
        }
        offset += raw.len();
    }
    let header = header.ok_or_else(|| RunError::Ledger("empty ledger".into()))?;
    Ok(Scan { ledger: Ledger { header, entries }, valid_len: offset as u64, torn_tail })
}

/// Reads a finished ledger; an unfinished one is reported by the first
/// sequence number it lacks.
pub fn read_complete(path: &Path) -> Result<Ledger, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Ledger(format!("cannot read {}: {e}", path.display())))?;
    let s = scan(&text)?;
    if !s.ledger.is_complete() {
        return Err(RunError::TruncatedLedger { first_missing: s.ledger.last_seq() + 1 });
    }
    Ok(s.ledger)
}

/// Single serialized sink; every line is flushed before the next is taken.
pub struct LedgerWriter {
    out: BufWriter<File>,
    next_seq: u64,
    written: u64,
}

impl LedgerWriter {
    pub fn create(path: &Path, header: &LedgerHeader) -> Result<Self, RunError> {
        let file = OpenOptions::new().write(true).create_new(true).open(path).map_err(|e| {
            RunError::Io(format!("cannot create {}: {e}", path.display()))
        })?;
        let mut w = LedgerWriter { out: BufWriter::new(file), next_seq: 1, written: 0 };
        w.write_line(&serde_json::to_string(header).expect("header serializes"))?;
        Ok(w)
    }

    /// Reopens for appending after the well-formed prefix.
    pub fn append(path: &Path, scan: &Scan) -> Result<Self, RunError> {
        let file = OpenOptions::new().write(true).open(path).map_err(|e| {
            RunError::Io(format!("cannot open {}: {e}", path.display()))
        })?;
        file.set_len(scan.valid_len).map_err(|e| RunError::Io(e.to_string()))?;
        let mut out = BufWriter::new(file);
        use std::io::Seek;
        out.seek(std::io::SeekFrom::End(0)).map_err(|e| RunError::Io(e.to_string()))?;
        let written = scan.ledger.entries.iter().filter(|e| !matches!(e, LedgerEntry::Complete { .. })).count() as u64;
        Ok(LedgerWriter { out, next_seq: scan.ledger.last_seq() + 1, written })
    }

    fn write_line(&mut self, line: &str) -> Result<(), RunError> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .and_then(|_| self.out.flush())
            .map_err(|e| RunError::Io(e.to_string()))
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn write(&mut self, entry: LedgerEntry) -> Result<(), RunError> {
        debug_assert_eq!(entry.seq(), self.next_seq);
        self.write_line(&serde_json::to_string(&entry).expect("entry serializes"))?;
        self.next_seq += 1;
        if !matches!(entry, LedgerEntry::Complete { .. }) {
            self.written += 1;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), RunError> {
        let seq = self.next_seq;
        let records = self.written;
        self.write(LedgerEntry::Complete { seq, records })
    }
}

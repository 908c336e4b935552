//! Run orchestration over an append-only ledger.
//!
//! A run renders prompts, queries the provider through a bounded worker
//! pool, evaluates generated examples and appends one ledger line per
//! call. Reports are always derived from the ledger alone, so `recompute`
//! and `report` reproduce them without network or subprocess activity.

pub mod analysis;
pub mod config;
pub mod ledger;
pub mod pool;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;
use tracing::{info, warn};

pub use analysis::{analyze, write_reports, ReportSet};
pub use config::{load_config, parse_config, AnalysisConfig, ProviderKind, RagMode, RunConfig, Task};
pub use ledger::{
    read_complete, record_id, scan, Derived, FailureEntry, GenerationEntry, Ledger, LedgerEntry, LedgerHeader,
    LedgerWriter, RequestParams, ResponseRecord, Subject, LEDGER_FORMAT, LEDGER_VERSION,
};

use crate::apidoc::{ApiDatabase, MethodSpec};
use crate::digest::sha256_parts;
use crate::execharness::{classify_error, ExampleId, Harness, OutcomeKind, Spawner, SystemSpawner};
use crate::llmclient::{
    ChatCompletionsProvider, GenerationRequest, ScriptedProvider, TextGenerator, DEFAULT_MAX_TOKENS_TASK1,
    DEFAULT_MAX_TOKENS_TASK2,
};
use crate::prompts::{
    extract_code, parse_probe_answer, render_probe_api, render_probe_class, render_task1, render_task1_rag,
    render_task2, render_task2_rag, PromptKind, RenderedPrompt,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("documentation database: {0}")]
    Db(String),
    #[error("ledger error: {0}")]
    Ledger(String),
    #[error("ledger version {found} is not supported (expected {expected})")]
    LedgerVersion { found: u32, expected: u32 },
    #[error("ledger is truncated: record {first_missing} is missing")]
    TruncatedLedger { first_missing: u64 },
    #[error("provider setup failed: {0}")]
    Provider(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io(_) => EXIT_FAILURE,
            _ => EXIT_CONFIG,
        }
    }
}

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub ledger_path: PathBuf,
    pub reports_dir: PathBuf,
    pub generated: u64,
    pub failed: u64,
    pub skipped: u64,
    pub open_failures: usize,
    pub reports: ReportSet,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.open_failures > 0 {
            EXIT_PARTIAL
        } else {
            EXIT_OK
        }
    }
}

/// Analysis parameters that `recompute` may change.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisOverrides {
    pub lenient_type_vars: Option<bool>,
    pub forest_trees: Option<usize>,
    pub forest_seed: Option<u64>,
    pub pdp_points: Option<usize>,
}

impl AnalysisOverrides {
    pub fn apply(&self, base: &AnalysisConfig) -> AnalysisConfig {
        let mut a = base.clone();
        if let Some(v) = self.lenient_type_vars {
            a.match_options.lenient_type_vars = v;
        }
        if let Some(v) = self.forest_trees {
            a.forest.n_trees = v;
        }
        if let Some(v) = self.forest_seed {
            a.forest.seed = v;
        }
        if let Some(v) = self.pdp_points {
            a.pdp_points = v;
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JobKind {
    Task1,
    Task2,
    ProbeClass,
    ProbeApi,
}

#[derive(Debug, Clone)]
struct Job {
    kind: JobKind,
    prompt_kind: PromptKind,
    subject: Subject,
    run_index: u32,
    record_id: String,
}

/// A job result before it is given its place in the ledger.
enum Done {
    Generated(GenerationEntry),
    Failed(FailureEntry),
}

fn prompt_kind(kind: JobKind, rag: RagMode) -> PromptKind {
    match (kind, rag) {
        (JobKind::Task1, RagMode::DescT1) => PromptKind::Task1RagDesc,
        (JobKind::Task1, RagMode::DescApiT1) => PromptKind::Task1RagDescApi,
        (JobKind::Task1, _) => PromptKind::Task1,
        (JobKind::Task2, RagMode::DescT2) => PromptKind::Task2RagDesc,
        (JobKind::Task2, _) => PromptKind::Task2,
        (JobKind::ProbeClass, _) => PromptKind::ProbeClass,
        (JobKind::ProbeApi, _) => PromptKind::ProbeApi,
    }
}

/// Loads the documentation database and the optional popularity table.
pub fn load_database(cfg: &RunConfig) -> Result<(ApiDatabase, Vec<String>), RunError> {
    let db = ApiDatabase::load(&cfg.db_path).map_err(|e| RunError::Db(e.to_string()))?;
    match &cfg.popularity_path {
        Some(p) => {
            let with = db.ingest_popularity(p).map_err(|e| RunError::Db(e.to_string()))?;
            let missing: Vec<String> = db
                .packages()
                .filter(|pkg| !with.popularity_table().contains_key(&pkg.name))
                .map(|pkg| format!("no popularity count for package {}", pkg.name))
                .collect();
            Ok((with, missing))
        }
        None => Ok((db, Vec::new())),
    }
}

pub fn build_provider(kind: &ProviderKind) -> Result<Arc<dyn TextGenerator>, RunError> {
    match kind {
        ProviderKind::Mock { script } => {
            let p = ScriptedProvider::load(script).map_err(|e| RunError::Provider(e.to_string()))?;
            Ok(Arc::new(p))
        }
        ProviderKind::Http(c) => Ok(Arc::new(ChatCompletionsProvider::new(c.clone()))),
    }
}

pub struct Runner {
    cfg: RunConfig,
    provider: Arc<dyn TextGenerator>,
    spawner: Arc<dyn Spawner>,
}

impl Runner {
    pub fn new(cfg: RunConfig) -> Result<Self, RunError> {
        cfg.validate()?;
        let provider = build_provider(&cfg.provider)?;
        Ok(Runner { cfg, provider, spawner: Arc::new(SystemSpawner) })
    }

    pub fn with_provider(cfg: RunConfig, provider: Arc<dyn TextGenerator>) -> Self {
        Runner { cfg, provider, spawner: Arc::new(SystemSpawner) }
    }

    pub fn with_spawner(mut self, spawner: Arc<dyn Spawner>) -> Self {
        self.spawner = spawner;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn header(&self, db: &ApiDatabase) -> LedgerHeader {
        let c = &self.cfg;
        LedgerHeader {
            format: LEDGER_FORMAT.into(),
            version: LEDGER_VERSION,
            model_id: self.provider.model_id(),
            tasks: c.tasks.clone(),
            repetitions: c.repetitions,
            snippet_number: c.snippet_number,
            api_list_size: c.api_list_size,
            temperature: c.temperature,
            decoding: c.decoding,
            rag_mode: c.rag_mode,
            seed: c.seed,
            timeout_seconds: c.toolchain.timeout_seconds,
            analysis: c.analysis.clone(),
            popularity: db.popularity_table().clone(),
            db: db.to_document(),
        }
    }

    fn job(&self, kind: JobKind, subject: Subject, run_index: u32) -> Job {
        let prompt_kind = prompt_kind(kind, self.cfg.rag_mode);
        let record_id = record_id(prompt_kind, &subject, run_index, self.cfg.rag_mode);
        Job { kind, prompt_kind, subject, run_index, record_id }
    }

    fn render(&self, job: &Job, db: &ApiDatabase) -> Result<RenderedPrompt, String> {
        let c = &self.cfg;
        let cls = db.class(&job.subject.fqcn).map_err(|e| e.to_string())?;
        let method = || job.subject.method.as_ref().ok_or_else(|| "job lacks its method".to_string());
        let r = match job.prompt_kind {
            PromptKind::Task1 => Ok(render_task1(cls, c.snippet_number)),
            PromptKind::Task1RagDesc => render_task1_rag(db, &cls.fqcn, c.snippet_number, None),
            PromptKind::Task1RagDescApi => render_task1_rag(db, &cls.fqcn, c.snippet_number, Some(c.api_list_size)),
            PromptKind::Task2 => Ok(render_task2(method()?, cls)),
            PromptKind::Task2RagDesc => render_task2_rag(db, method()?),
            PromptKind::ProbeClass => Ok(render_probe_class(cls)),
            PromptKind::ProbeApi => Ok(render_probe_api(method()?)),
        };
        r.map_err(|e| e.to_string())
    }

    fn execute(&self, job: &Job, db: &ApiDatabase, harness: Option<&Harness>) -> Done {
        let fail = |stage: &str, error: String| {
            Done::Failed(FailureEntry {
                seq: 0,
                clock: 0,
                record_id: job.record_id.clone(),
                kind: job.prompt_kind,
                subject: job.subject.clone(),
                run_index: job.run_index,
                rag_mode: self.cfg.rag_mode,
                stage: stage.into(),
                error,
            })
        };
        let prompt = match self.render(job, db) {
            Ok(p) => p,
            Err(e) => return fail("render", e),
        };
        let seed = u64::from_str_radix(&sha256_parts(&[&self.cfg.seed.to_string(), &job.record_id])[..16], 16)
            .expect("hex digest");
        let request = GenerationRequest {
            prompt: prompt.text.clone(),
            temperature: self.cfg.temperature,
            decoding: self.cfg.decoding,
            max_tokens: if job.kind == JobKind::Task2 { DEFAULT_MAX_TOKENS_TASK2 } else { DEFAULT_MAX_TOKENS_TASK1 },
            want_logprobs: true,
            seed: Some(seed),
        };
        let response = match self.provider.generate(&request) {
            Ok(r) => r,
            Err(e) => {
                warn!(record = %job.record_id, error = %e, "provider call failed");
                return fail("generate", e.to_string());
            }
        };
        let derived = match job.kind {
            JobKind::Task1 => {
                let cls = db.class(&job.subject.fqcn).expect("rendered class exists");
                let g = stub_generation(job, &response.text, response.tokens.clone());
                let recs = analysis::task1_records(&g, cls, db, self.cfg.analysis.match_options);
                Derived::Task1 { lines: analysis::task1_lines(&recs) }
            }
            JobKind::Task2 => {
                let m = job.subject.method.as_ref().expect("task2 job has a method");
                let harness = harness.expect("task2 runs with a harness");
                let code = extract_code(&response.text);
                let id = ExampleId { run_id: format!("seed-{}", self.cfg.seed), example_id: job.record_id.clone() };
                let outcome = match harness.evaluate_example(code.as_deref().unwrap_or(""), m, &id) {
                    Ok(o) => o,
                    Err(e) => return fail("exec", e.to_string()),
                };
                let taxonomy = if outcome.kind == OutcomeKind::Success {
                    None
                } else {
                    match classify_error(&outcome, code.as_deref().unwrap_or(""), Some(&response.text), m, db) {
                        Ok(t) => Some(t),
                        Err(e) => return fail("classify", e.to_string()),
                    }
                };
                Derived::Task2 { code, outcome, taxonomy }
            }
            JobKind::ProbeClass | JobKind::ProbeApi => Derived::Probe { answer: parse_probe_answer(&response.text) },
        };
        Done::Generated(GenerationEntry {
            seq: 0,
            clock: 0,
            record_id: job.record_id.clone(),
            kind: job.prompt_kind,
            subject: job.subject.clone(),
            run_index: job.run_index,
            rag_mode: self.cfg.rag_mode,
            prompt_digest: prompt.digest,
            request: RequestParams {
                temperature: request.temperature,
                decoding: request.decoding,
                max_tokens: request.max_tokens,
                want_logprobs: request.want_logprobs,
                seed: request.seed,
            },
            response: ResponseRecord {
                text: response.text,
                tokens: response.tokens,
                provider_model_id: response.provider_model_id,
                attempts: response.attempts,
                warnings: response.warnings,
                exchange: response.exchange,
            },
            derived,
        })
    }

    /// Runs the jobs not yet completed in `done` and appends their entries.
    fn run_phase(
        &self,
        jobs: Vec<Job>,
        done: &BTreeSet<String>,
        db: &ApiDatabase,
        harness: Option<&Harness>,
        writer: &mut LedgerWriter,
        counts: &mut (u64, u64, u64),
        generated: &mut Vec<GenerationEntry>,
    ) -> Result<(), RunError> {
        let (todo, skip): (Vec<Job>, Vec<Job>) = jobs.into_iter().partition(|j| !done.contains(&j.record_id));
        counts.2 += skip.len() as u64;
        pool::run_ordered(&todo, self.cfg.parallelism, |j| self.execute(j, db, harness), |d| {
            let seq = writer.next_seq();
            let entry = match d {
                Done::Generated(mut g) => {
                    g.seq = seq;
                    g.clock = seq;
                    counts.0 += 1;
                    generated.push(g.clone());
                    LedgerEntry::Generation(g)
                }
                Done::Failed(mut f) => {
                    f.seq = seq;
                    f.clock = seq;
                    counts.1 += 1;
                    LedgerEntry::ProviderFailure(f)
                }
            };
            writer.write(entry)
        })
    }

    pub fn run(&self) -> Result<RunSummary, RunError> {
        let c = &self.cfg;
        c.validate()?;
        let (db, db_warnings) = load_database(c)?;
        for w in &db_warnings {
            warn!("{w}");
        }
        let header = self.header(&db);
        std::fs::create_dir_all(&c.output_dir)
            .map_err(|e| RunError::Io(format!("cannot create {}: {e}", c.output_dir.display())))?;
        let path = c.ledger_path();

        let (mut writer, prior) = if path.exists() {
            if !c.resume {
                return Err(RunError::Config(format!(
                    "{} already exists; pass --resume or choose another output directory",
                    path.display()
                )));
            }
            let text = std::fs::read_to_string(&path).map_err(|e| RunError::Io(e.to_string()))?;
            let s = scan(&text)?;
            if s.ledger.header != header {
                return Err(RunError::Config("existing ledger was written with a different configuration".into()));
            }
            if s.torn_tail {
                warn!("discarding an incomplete final ledger line");
            }
            info!(records = s.ledger.last_seq(), "resuming");
            (LedgerWriter::append(&path, &s)?, s.ledger.generations().cloned().collect::<Vec<_>>())
        } else {
            (LedgerWriter::create(&path, &header)?, Vec::new())
        };
        let done: BTreeSet<String> = prior.iter().map(|g| g.record_id.clone()).collect();
        let has_task1 = prior.iter().any(|g| analysis::is_task1(g.kind));
        if c.tasks.contains(&Task::Task2) && !c.tasks.contains(&Task::Task1) && !has_task1 {
            return Err(RunError::Config("task2 needs task1 results in this run or a prior ledger".into()));
        }

        let mut counts = (0u64, 0u64, 0u64);
        let mut generated = prior;
        let classes: Vec<_> = db.classes().collect();
        let mut phase1 = Vec::new();
        if c.tasks.contains(&Task::Task1) {
            for cls in &classes {
                for r in 0..c.repetitions {
                    phase1.push(self.job(JobKind::Task1, Subject { fqcn: cls.fqcn.clone(), method: None }, r));
                }
            }
        }
        if c.tasks.contains(&Task::Probe) {
            for cls in &classes {
                phase1.push(self.job(JobKind::ProbeClass, Subject { fqcn: cls.fqcn.clone(), method: None }, 0));
            }
        }
        self.run_phase(phase1, &done, &db, None, &mut writer, &mut counts, &mut generated)?;

        let methods: Vec<MethodSpec> = if c.tasks.contains(&Task::Task2) || c.tasks.contains(&Task::Probe) {
            analysis::exact_methods(&generated, &db, c.analysis.match_options)
        } else {
            Vec::new()
        };
        let mut phase2 = Vec::new();
        let subject = |m: &MethodSpec| Subject { fqcn: m.fqcn(), method: Some(m.clone()) };
        if c.tasks.contains(&Task::Task2) {
            if methods.is_empty() {
                warn!("no exactly matched method to generate examples for");
            }
            for m in &methods {
                for r in 0..c.repetitions {
                    phase2.push(self.job(JobKind::Task2, subject(m), r));
                }
            }
        }
        if c.tasks.contains(&Task::Probe) {
            for m in &methods {
                phase2.push(self.job(JobKind::ProbeApi, subject(m), 0));
            }
        }
        let harness = c
            .tasks
            .contains(&Task::Task2)
            .then(|| Harness::with_spawner(c.toolchain.clone(), self.spawner.clone()));
        self.run_phase(phase2, &done, &db, harness.as_ref(), &mut writer, &mut counts, &mut generated)?;
        writer.finish()?;

        let ledger = read_complete(&path)?;
        let mut reports = analyze(&ledger, &ledger.header.analysis)?;
        if !db_warnings.is_empty() {
            let w = reports.files.entry("warnings.txt".into()).or_default();
            let mut all: String = db_warnings.iter().map(|l| format!("{l}\n")).collect();
            all.push_str(w);
            *w = all;
            reports.warnings.splice(0..0, db_warnings);
        }
        write_reports(&reports, &c.reports_dir())?;
        let summary = RunSummary {
            ledger_path: path,
            reports_dir: c.reports_dir(),
            generated: counts.0,
            failed: counts.1,
            skipped: counts.2,
            open_failures: ledger.open_failures().len(),
            reports,
        };
        info!(generated = summary.generated, failed = summary.failed, skipped = summary.skipped, "run finished");
        Ok(summary)
    }
}

fn stub_generation(job: &Job, text: &str, tokens: Option<Vec<crate::llmclient::TokenLogprob>>) -> GenerationEntry {
    GenerationEntry {
        seq: 0,
        clock: 0,
        record_id: job.record_id.clone(),
        kind: job.prompt_kind,
        subject: job.subject.clone(),
        run_index: job.run_index,
        rag_mode: RagMode::None,
        prompt_digest: String::new(),
        request: RequestParams {
            temperature: 0.0,
            decoding: Default::default(),
            max_tokens: 1,
            want_logprobs: false,
            seed: None,
        },
        response: ResponseRecord {
            text: text.to_string(),
            tokens,
            provider_model_id: String::new(),
            attempts: 0,
            warnings: Vec::new(),
            exchange: None,
        },
        derived: Derived::Probe { answer: crate::prompts::ProbeAnswer::Unparseable },
    }
}

/// Re-derives every report from a finished ledger with optional analysis
/// overrides. Performs no network or subprocess activity.
pub fn recompute(ledger_path: &Path, overrides: &AnalysisOverrides) -> Result<(Ledger, ReportSet), RunError> {
    let ledger = read_complete(ledger_path)?;
    let cfg = overrides.apply(&ledger.header.analysis);
    let reports = analyze(&ledger, &cfg)?;
    Ok((ledger, reports))
}

/// Reports for a finished ledger under its recorded analysis settings.
pub fn report(ledger_path: &Path, out_dir: &Path) -> Result<(Ledger, ReportSet), RunError> {
    let (ledger, reports) = recompute(ledger_path, &AnalysisOverrides::default())?;
    write_reports(&reports, out_dir)?;
    Ok((ledger, reports))
}

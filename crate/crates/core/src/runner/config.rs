use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::execharness::ToolchainConfig;
use crate::llmclient::{Decoding, ProviderConfig, WireDialect, DEFAULT_TEMPERATURE};
use crate::prompts::{DEFAULT_API_LIST_SIZE, DEFAULT_SNIPPET_NUMBER};
use crate::signature::MatchOptions;
use crate::stats::ForestConfig;

pub const DEFAULT_REPETITIONS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Task1,
    Task2,
    Probe,
    Factors,
    Stats,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "task1" => Ok(Task::Task1),
            "task2" => Ok(Task::Task2),
            "probe" => Ok(Task::Probe),
            "factors" => Ok(Task::Factors),
            "stats" => Ok(Task::Stats),
            other => Err(format!("unknown task {other:?} (task1|task2|probe|factors|stats)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum RagMode {
    #[default]
    None,
    DescT1,
    DescApiT1,
    DescT2,
}

impl RagMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RagMode::None => "none",
            RagMode::DescT1 => "desc-t1",
            RagMode::DescApiT1 => "desc-api-t1",
            RagMode::DescT2 => "desc-t2",
        }
    }
}

impl fmt::Display for RagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RagMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "none" => Ok(RagMode::None),
            "desc-t1" => Ok(RagMode::DescT1),
            "desc-api-t1" => Ok(RagMode::DescApiT1),
            "desc-t2" => Ok(RagMode::DescT2),
            other => Err(format!("unknown rag mode {other:?} (none|desc-t1|desc-api-t1|desc-t2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderKind {
    /// Scripted responses from a JSON file.
    Mock { script: PathBuf },
    Http(ProviderConfig),
}

/// Parameters that only affect derivation from the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub match_options: MatchOptions,
    pub forest: ForestConfig,
    /// Number of grid points per partial-dependence series.
    pub pdp_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { match_options: MatchOptions::default(), forest: ForestConfig::default(), pdp_points: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub db_path: PathBuf,
    pub popularity_path: Option<PathBuf>,
    pub provider: ProviderKind,
    pub tasks: BTreeSet<Task>,
    pub repetitions: u32,
    pub snippet_number: u32,
    pub api_list_size: usize,
    pub temperature: f64,
    pub decoding: Decoding,
    pub rag_mode: RagMode,
    pub toolchain: ToolchainConfig,
    pub output_dir: PathBuf,
    pub parallelism: usize,
    pub resume: bool,
    pub seed: u64,
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn ledger_path(&self) -> PathBuf {
        self.output_dir.join("ledger.jsonl")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.output_dir.join("reports")
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.tasks.is_empty() {
            return Err(RunError::Config("no tasks selected".into()));
        }
        if self.repetitions == 0 {
            return Err(RunError::Config("repetitions must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(RunError::Config("parallelism must be positive".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(RunError::Config(format!("invalid temperature {}", self.temperature)));
        }
        if self.tasks.contains(&Task::Task2) {
            self.toolchain.validate().map_err(|e| RunError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, RunError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(RunError::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, RunError> {
    v.parse().map_err(|_| RunError::Config(format!("{key}: invalid number {v:?}")))
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses the flat `key = value` format. Blank lines and lines starting with
/// `#` are ignored; relative paths are resolved against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, RunError> {
    let mut kv: Vec<(String, String)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| RunError::Config(format!("line {}: expected key = value", no + 1)))?;
        let k = k.trim().to_string();
        if kv.iter().any(|(seen, _)| *seen == k) {
            return Err(RunError::Config(format!("line {}: duplicate key {k}", no + 1)));
        }
        kv.push((k, v.trim().to_string()));
    }
    let path = |v: &str| {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };

    let mut db_path = None;
    let mut popularity_path = None;
    let mut provider_name = "mock".to_string();
    let mut mock_script = None;
    let mut http = ProviderConfig::default();
    let mut tasks = BTreeSet::new();
    let mut repetitions = DEFAULT_REPETITIONS;
    let mut snippet_number = DEFAULT_SNIPPET_NUMBER;
    let mut api_list_size = DEFAULT_API_LIST_SIZE;
    let mut temperature = DEFAULT_TEMPERATURE;
    let mut decoding = Decoding::ProviderDefault;
    let mut rag_mode = RagMode::None;
    let mut toolchain_name = "javac".to_string();
    let mut java_path = PathBuf::from("java");
    let mut janino_dir = None;
    let mut compile_cmd = None;
    let mut run_cmd = None;
    let mut work_root = None;
    let mut timeout_seconds = None;
    let mut compile_timeout_seconds = None;
    let mut exec_slots = None;
    let mut keep_artifacts = false;
    let mut env_allowlist = None;
    let mut output_dir = base_dir.join("out");
    let mut parallelism = 1;
    let mut resume = false;
    let mut seed = 0;
    let mut analysis = AnalysisConfig::default();

    for (k, v) in &kv {
        let v = v.as_str();
        match k.as_str() {
            "db_path" => db_path = Some(path(v)),
            "popularity_path" => popularity_path = Some(path(v)),
            "provider" => provider_name = v.to_string(),
            "mock_script" => mock_script = Some(path(v)),
            "endpoint_url" => http.endpoint_url = v.to_string(),
            "model_id" => http.model_id = v.to_string(),
            "auth_env_var" => http.auth_env_var = if v.is_empty() { None } else { Some(v.to_string()) },
            "max_parallel" => http.max_parallel = parse_num(k, v)?,
            "max_attempts" => http.retry.max_attempts = parse_num(k, v)?,
            "base_backoff_ms" => http.retry.base_backoff_ms = parse_num(k, v)?,
            "request_timeout_ms" => http.request_timeout_ms = parse_num(k, v)?,
            "tasks" => {
                for t in list(v) {
                    tasks.insert(t.parse::<Task>().map_err(RunError::Config)?);
                }
            }
            "repetitions" => repetitions = parse_num(k, v)?,
            "snippet_number" => snippet_number = parse_num(k, v)?,
            "api_list_size" => api_list_size = parse_num(k, v)?,
            "temperature" => temperature = parse_num(k, v)?,
            "decoding" => decoding = v.parse().map_err(RunError::Config)?,
            "rag_mode" => rag_mode = v.parse().map_err(RunError::Config)?,
            "toolchain" => toolchain_name = v.to_string(),
            "java_path" => java_path = PathBuf::from(v),
            "janino_dir" => janino_dir = Some(path(v)),
            "compile_cmd" => compile_cmd = Some(v.to_string()),
            "run_cmd" => run_cmd = Some(v.to_string()),
            "work_root" => work_root = Some(path(v)),
            "timeout_seconds" => timeout_seconds = Some(parse_num(k, v)?),
            "compile_timeout_seconds" => compile_timeout_seconds = Some(parse_num(k, v)?),
            "exec_slots" => exec_slots = Some(parse_num(k, v)?),
            "keep_artifacts" => keep_artifacts = parse_bool(k, v)?,
            "env_allowlist" => env_allowlist = Some(list(v).map(String::from).collect()),
            "output_dir" => output_dir = path(v),
            "parallelism" => parallelism = parse_num(k, v)?,
            "resume" => resume = parse_bool(k, v)?,
            "seed" => seed = parse_num(k, v)?,
            "lenient_type_vars" => analysis.match_options.lenient_type_vars = parse_bool(k, v)?,
            "forest_trees" => analysis.forest.n_trees = parse_num(k, v)?,
            "forest_seed" => analysis.forest.seed = parse_num(k, v)?,
            "pdp_points" => analysis.pdp_points = parse_num(k, v)?,
            other => return Err(RunError::Config(format!("unknown key {other:?}"))),
        }
    }

    let provider = match provider_name.as_str() {
        "mock" => ProviderKind::Mock {
            script: mock_script.ok_or_else(|| RunError::Config("provider mock needs mock_script".into()))?,
        },
        "openai" => ProviderKind::Http(ProviderConfig { dialect: WireDialect::OpenAi, ..http }),
        "vllm" => ProviderKind::Http(ProviderConfig { dialect: WireDialect::VllmCompatible, ..http }),
        other => return Err(RunError::Config(format!("unknown provider {other:?} (mock|openai|vllm)"))),
    };
    if let ProviderKind::Http(p) = &provider {
        if p.max_parallel == 0 || p.retry.max_attempts == 0 {
            return Err(RunError::Config("max_parallel and max_attempts must be positive".into()));
        }
    }

    let work_root = work_root.unwrap_or_else(|| output_dir.join("work"));
    let mut toolchain = match toolchain_name.as_str() {
        "javac" => ToolchainConfig::javac(work_root),
        "janino" => {
            let dir = janino_dir.ok_or_else(|| RunError::Config("toolchain janino needs janino_dir".into()))?;
            ToolchainConfig::janino(&java_path, &dir, work_root)
        }
        "custom" => ToolchainConfig {
            compile_cmd: compile_cmd.clone().ok_or_else(|| RunError::Config("custom toolchain needs compile_cmd".into()))?,
            run_cmd: run_cmd.clone().ok_or_else(|| RunError::Config("custom toolchain needs run_cmd".into()))?,
            ..ToolchainConfig::javac(work_root)
        },
        other => return Err(RunError::Config(format!("unknown toolchain {other:?} (javac|janino|custom)"))),
    };
    if let Some(c) = compile_cmd {
        toolchain.compile_cmd = c;
    }
    if let Some(c) = run_cmd {
        toolchain.run_cmd = c;
    }
    if let Some(t) = timeout_seconds {
        toolchain.timeout_seconds = t;
    }
    if let Some(t) = compile_timeout_seconds {
        toolchain.compile_timeout_seconds = t;
    }
    if let Some(s) = exec_slots {
        toolchain.slots = s;
    }
    if let Some(e) = env_allowlist {
        toolchain.env_allowlist = e;
    }
    toolchain.keep_artifacts = keep_artifacts;

    let cfg = RunConfig {
        db_path: db_path.ok_or_else(|| RunError::Config("db_path is required".into()))?,
        popularity_path,
        provider,
        tasks,
        repetitions,
        snippet_number,
        api_list_size,
        temperature,
        decoding,
        rag_mode,
        toolchain,
        output_dir,
        parallelism,
        resume,
        seed,
        analysis,
    };
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

//! Invocation check, compilation and execution of generated examples, and
//! heuristic error categorization.

mod classify;
mod invoke;
mod process;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use crate::apidoc::MethodSpec;
use crate::concurrency::Semaphore;

pub use classify::{classify_error, ErrorSubType, ErrorTaxonomyLabel, ErrorTopType};
pub use invoke::{invokes_api, main_class_name};
pub use process::{CountingSpawner, ProcOutput, SpawnRequest, Spawner, SystemSpawner, OUTPUT_CAP};

pub const DEFAULT_TIMEOUT_SECONDS: u64 = 15;
pub const TERMINATION_GRACE: Duration = Duration::from_secs(2);

/// Configuration problems, as opposed to failures of the code under test.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("toolchain error: {0}")]
    Toolchain(String),
    #[error("invalid command template {template:?}: {message}")]
    Template { template: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("classify_error called on a successful outcome")]
    ClassifySuccess,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolchainConfig {
    /// Command template; `{file}`, `{outDir}` and `{mainClass}` are
    /// substituted per argument. Paths are relative to the work directory.
    pub compile_cmd: String,
    pub run_cmd: String,
    pub work_root: PathBuf,
    pub timeout_seconds: u64,
    pub compile_timeout_seconds: u64,
    pub env_allowlist: Vec<String>,
    pub keep_artifacts: bool,
    pub slots: usize,
}

impl ToolchainConfig {
    /// Reference JDK configuration.
    pub fn javac(work_root: impl Into<PathBuf>) -> Self {
        ToolchainConfig {
            compile_cmd: "javac -Xlint:deprecation -d {outDir} {file}".into(),
            run_cmd: "java -cp {outDir} {mainClass}".into(),
            work_root: work_root.into(),
            timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
            compile_timeout_seconds: 120,
            env_allowlist: vec!["PATH".into(), "HOME".into(), "JAVA_HOME".into(), "LANG".into()],
            keep_artifacts: false,
            slots: 1,
        }
    }

    /// JRE plus the Janino compiler, for hosts without a JDK.
    pub fn janino(java: &Path, jar_dir: &Path, work_root: impl Into<PathBuf>) -> Self {
        let java = shlex::try_quote(&java.to_string_lossy()).map(|c| c.into_owned()).unwrap_or_default();
        let cp = format!(
            "{}:{}",
            jar_dir.join("janino-3.1.9.jar").display(),
            jar_dir.join("commons-compiler-3.1.9.jar").display()
        );
        let cp = shlex::try_quote(&cp).map(|c| c.into_owned()).unwrap_or_default();
        ToolchainConfig {
            compile_cmd: format!(
                "{java} -cp {cp} org.codehaus.commons.compiler.samples.CompilerDemo -d {{outDir}} {{file}}"
            ),
            run_cmd: format!("{java} -cp {{outDir}} {{mainClass}}"),
            ..Self::javac(work_root)
        }
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        for (t, needs) in [(&self.compile_cmd, "{file}"), (&self.run_cmd, "{mainClass}")] {
            expand(t, &[])?;
            if !t.contains(needs) {
                return Err(ExecError::Template {
                    template: t.clone(),
                    message: format!("missing {needs} placeholder"),
                });
            }
        }
        if self.timeout_seconds == 0 {
            return Err(ExecError::Toolchain("timeout must be positive".into()));
        }
        Ok(())
    }
}

/// Splits a template shell-style, then substitutes placeholders inside each
/// argument. No shell is involved.
fn expand(template: &str, vars: &[(&str, &str)]) -> Result<Vec<String>, ExecError> {
    let words = shlex::split(template).ok_or_else(|| ExecError::Template {
        template: template.to_string(),
        message: "unbalanced quoting".into(),
    })?;
    if words.is_empty() {
        return Err(ExecError::Template {
            template: template.to_string(),
            message: "empty command".into(),
        });
    }
    Ok(words
        .into_iter()
        .map(|w| vars.iter().fold(w, |acc, (k, v)| acc.replace(k, v)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    NoApiInvoked,
    CompileError,
    RuntimeError,
    Timeout,
    Success,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub kind: OutcomeKind,
    pub stdout: String,
    pub stderr: String,
    pub exit_code: Option<i32>,
    /// Compiler diagnostics, kept for runs that compiled with warnings.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub compile_output: String,
    /// Deprecation warnings were present (also recorded on success).
    #[serde(default)]
    pub deprecation_warning: bool,
}

impl ExecOutcome {
    fn new(kind: OutcomeKind) -> Self {
        ExecOutcome {
            kind,
            stdout: String::new(),
            stderr: String::new(),
            exit_code: None,
            compile_output: String::new(),
            deprecation_warning: false,
        }
    }
}

/// Identifies one evaluation; selects `workRoot/<runId>/<exampleId>/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleId {
    pub run_id: String,
    pub example_id: String,
}

pub struct Harness {
    cfg: ToolchainConfig,
    spawner: Arc<dyn Spawner>,
    slots: Semaphore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileResult {
    Ok { diagnostics: String },
    Failed { diagnostics: String, exit_code: Option<i32> },
}

fn sanitize(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    match s.as_str() {
        "" | "." | ".." => "_".to_string(),
        _ => s,
    }
}

impl Harness {
    pub fn new(cfg: ToolchainConfig) -> Self {
        Self::with_spawner(cfg, Arc::new(SystemSpawner))
    }

    pub fn with_spawner(cfg: ToolchainConfig, spawner: Arc<dyn Spawner>) -> Self {
        let slots = Semaphore::new(cfg.slots);
        Harness { cfg, spawner, slots }
    }

    pub fn config(&self) -> &ToolchainConfig {
        &self.cfg
    }

    fn env(&self) -> Vec<(String, String)> {
        self.cfg
            .env_allowlist
            .iter()
            .filter_map(|k| std::env::var(k).ok().map(|v| (k.clone(), v)))
            .collect()
    }

    pub fn work_dir(&self, id: &ExampleId) -> PathBuf {
        self.cfg
            .work_root
            .join(sanitize(&id.run_id))
            .join(sanitize(&id.example_id))
    }

    /// Writes `code` to `<dir>/<MainClass>.java` and compiles it into
    /// `<dir>/classes`.
    pub fn compile(&self, code: &str, dir: &Path) -> Result<(String, CompileResult), ExecError> {
        let main = main_class_name(code);
        let file = format!("{main}.java");
        std::fs::write(dir.join(&file), code).map_err(|e| ExecError::Io(e.to_string()))?;
        std::fs::create_dir_all(dir.join("classes")).map_err(|e| ExecError::Io(e.to_string()))?;
        let argv = expand(
            &self.cfg.compile_cmd,
            &[("{file}", &file), ("{outDir}", "classes"), ("{mainClass}", &main)],
        )?;
        let env = self.env();
        let out = self.spawner.spawn(&SpawnRequest {
            argv: &argv,
            cwd: dir,
            env: &env,
            timeout: Duration::from_secs(self.cfg.compile_timeout_seconds.max(1)),
            grace: TERMINATION_GRACE,
        })?;
        let mut diagnostics = out.stderr;
        if !out.stdout.is_empty() {
            if !diagnostics.is_empty() && !diagnostics.ends_with('\n') {
                diagnostics.push('\n');
            }
            diagnostics.push_str(&out.stdout);
        }
        let result = if out.timed_out {
            diagnostics.push_str("compilation timed out\n");
            CompileResult::Failed { diagnostics, exit_code: None }
        } else if out.exit_code == Some(0) {
            CompileResult::Ok { diagnostics }
        } else {
            CompileResult::Failed { diagnostics, exit_code: out.exit_code }
        };
        Ok((main, result))
    }

    pub fn run(&self, dir: &Path, main_class: &str) -> Result<ProcOutput, ExecError> {
        let argv = expand(
            &self.cfg.run_cmd,
            &[("{outDir}", "classes"), ("{mainClass}", main_class), ("{file}", "")],
        )?;
        let env = self.env();
        self.spawner.spawn(&SpawnRequest {
            argv: &argv,
            cwd: dir,
            env: &env,
            timeout: Duration::from_secs(self.cfg.timeout_seconds),
            grace: TERMINATION_GRACE,
        })
    }

    /// Invocation check, then compile, then run; the first failing stage
    /// decides the outcome.
    pub fn evaluate_example(
        &self,
        code: &str,
        m: &MethodSpec,
        id: &ExampleId,
    ) -> Result<ExecOutcome, ExecError> {
        if code.trim().is_empty() || !invokes_api(code, m) {
            debug!(example = %id.example_id, "target API not invoked");
            return Ok(ExecOutcome::new(OutcomeKind::NoApiInvoked));
        }
        let _slot = self.slots.acquire();
        let dir = self.work_dir(id);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| ExecError::Io(e.to_string()))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| ExecError::Io(e.to_string()))?;
        let result = self.compile_and_run(code, &dir);
        if !self.cfg.keep_artifacts {
            let _ = std::fs::remove_dir_all(&dir);
        }
        let outcome = result?;
        info!(example = %id.example_id, kind = ?outcome.kind, "evaluated example");
        Ok(outcome)
    }

    fn compile_and_run(&self, code: &str, dir: &Path) -> Result<ExecOutcome, ExecError> {
        let (main, compiled) = self.compile(code, dir)?;
        let diagnostics = match compiled {
            CompileResult::Failed { diagnostics, exit_code } => {
                let mut o = ExecOutcome::new(OutcomeKind::CompileError);
                o.deprecation_warning = mentions_deprecation(&diagnostics);
                o.stderr = diagnostics;
                o.exit_code = exit_code;
                return Ok(o);
            }
            CompileResult::Ok { diagnostics } => diagnostics,
        };
        let run = self.run(dir, &main)?;
        let kind = if run.timed_out {
            OutcomeKind::Timeout
        } else if run.exit_code == Some(0) {
            OutcomeKind::Success
        } else {
            OutcomeKind::RuntimeError
        };
        Ok(ExecOutcome {
            kind,
            stdout: run.stdout,
            stderr: run.stderr,
            exit_code: run.exit_code,
            deprecation_warning: mentions_deprecation(&diagnostics),
            compile_output: diagnostics,
        })
    }
}

fn mentions_deprecation(diagnostics: &str) -> bool {
    let d = diagnostics.to_ascii_lowercase();
    d.contains("deprecated") || d.contains("deprecation")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_expansion() {
        let argv = expand("java -cp '{outDir}:lib dir' {mainClass}", &[("{outDir}", "classes"), ("{mainClass}", "Main")]).unwrap();
        assert_eq!(argv, ["java", "-cp", "classes:lib dir", "Main"]);
        assert!(expand("java 'unterminated", &[]).is_err());
        assert!(expand("   ", &[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ToolchainConfig::javac("/tmp/w");
        assert!(c.validate().is_ok());
        c.run_cmd = "java -cp classes".into();
        assert!(matches!(c.validate(), Err(ExecError::Template { .. })));
        let j = ToolchainConfig::janino(Path::new("/opt/jvm/jre/bin/java"), Path::new("/opt/jvm"), "/tmp/w");
        assert!(j.validate().is_ok());
        assert!(j.compile_cmd.contains("CompilerDemo"));
    }

    #[test]
    fn work_dirs_are_disjoint_and_confined() {
        let h = Harness::new(ToolchainConfig::javac("/tmp/w"));
        let a = h.work_dir(&ExampleId { run_id: "r".into(), example_id: "../x".into() });
        let b = h.work_dir(&ExampleId { run_id: "r".into(), example_id: "y".into() });
        assert_ne!(a, b);
        assert!(a.starts_with("/tmp/w/r"));
        assert!(!a.to_string_lossy().contains("/../"));
    }
}

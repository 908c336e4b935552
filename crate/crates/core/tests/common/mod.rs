#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use apieval_core::apidoc::ApiDatabase;
use apieval_core::execharness::{ExecError, ProcOutput, SpawnRequest, Spawner, ToolchainConfig};
use apieval_core::llmclient::{ScriptedProvider, ScriptedResponse, TokenLogprob};
use apieval_core::prompts::{render_probe_api, render_probe_class, render_task1, render_task2};
use apieval_core::runner::{AnalysisConfig, ProviderKind, RagMode, RunConfig, Task};

pub const MODEL: &str = "mock-model";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_db() -> ApiDatabase {
    ApiDatabase::load(fixtures().join("docs.json")).expect("fixture db loads")
}

pub fn java(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("java").join(format!("{name}.java"))).expect("java fixture")
}

/// Splits `text` into word and whitespace tokens with log-probabilities
/// around `base` (more negative means less confident).
pub fn tokens(text: &str, base: f64) -> Vec<TokenLogprob> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut last_ws = None;
    for ch in text.chars() {
        let ws = ch.is_whitespace();
        if last_ws.is_some_and(|l| l != ws) {
            out.push(std::mem::take(&mut cur));
        }
        cur.push(ch);
        last_ws = Some(ws);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, token)| TokenLogprob { token, logprob: base - 0.01 * (i % 5) as f64 })
        .collect()
}

pub fn with_tokens(text: String, base: f64) -> ScriptedResponse {
    let t = tokens(&text, base);
    ScriptedResponse { text, tokens: Some(t) }
}

pub fn task1_response(lines: &[(&str, &str)], base: f64) -> ScriptedResponse {
    let mut text = String::from("Here are some useful APIs:\n");
    for (i, (sig, desc)) in lines.iter().enumerate() {
        text.push_str(&format!("{}. \"{sig}\": {desc}\n", i + 1));
    }
    with_tokens(text, base)
}

pub fn task2_response(sig: &str, code: &str) -> ScriptedResponse {
    with_tokens(format!("{sig}: example.\nCode snippet:\n```java\n{code}```\n"), -0.2)
}

pub const ADD: &str = "boolean add(E e)";
pub const ADD_BAD: &str = "boolean addElement(E e)";
pub const REMOVE_MERGED: &str = "boolean remove(Object o)";

/// ArrayList: `add` in runs 0..8, a fabricated name in runs 8 and 9.
/// Hashtable: the merged `remove` overload in every run.
/// 20 extracted lines, 12 of them incorrect.
pub fn task1_script(db: &ApiDatabase, snippet_number: u32, reps: usize) -> Vec<(String, Vec<ScriptedResponse>)> {
    let list = db.class("java.util.ArrayList").unwrap();
    let table = db.class("java.util.Hashtable").unwrap();
    let list_runs = (0..reps)
        .map(|r| {
            if r < 8 {
                task1_response(&[(ADD, "Appends an element.")], -0.05)
            } else {
                task1_response(&[(ADD_BAD, "Appends an element.")], -1.5)
            }
        })
        .collect();
    let table_runs = (0..reps).map(|_| task1_response(&[(REMOVE_MERGED, "Removes a key.")], -0.9)).collect();
    vec![
        (render_task1(list, snippet_number).text, list_runs),
        (render_task1(table, snippet_number).text, table_runs),
    ]
}

pub fn probe_script(db: &ApiDatabase) -> Vec<(String, Vec<ScriptedResponse>)> {
    let add = add_method(db);
    vec![
        (render_probe_class(db.class("java.util.ArrayList").unwrap()).text, vec![with_tokens("Yes".into(), -0.01)]),
        (render_probe_class(db.class("java.util.Hashtable").unwrap()).text, vec![with_tokens("No".into(), -0.4)]),
        (render_probe_api(&add).text, vec![with_tokens("Yes, I know it.".into(), -0.02)]),
    ]
}

/// Task-2 responses for `add`, cycled in order.
pub fn task2_script(db: &ApiDatabase, programs: &[&str]) -> Vec<(String, Vec<ScriptedResponse>)> {
    let add = add_method(db);
    let cls = db.class("java.util.ArrayList").unwrap();
    let runs = programs.iter().map(|p| task2_response(ADD, &java(p))).collect();
    vec![(render_task2(&add, cls).text, runs)]
}

pub fn add_method(db: &ApiDatabase) -> apieval_core::apidoc::MethodSpec {
    db.class("java.util.ArrayList")
        .unwrap()
        .methods
        .iter()
        .find(|m| m.simple_name == "add" && m.param_types.len() == 1)
        .cloned()
        .unwrap()
}

pub fn provider(parts: Vec<(String, Vec<ScriptedResponse>)>) -> ScriptedProvider {
    parts.into_iter().fold(ScriptedProvider::new(MODEL), |p, (prompt, r)| p.with_prompt(&prompt, r))
}

/// The standard scenario: Task 1, probes, and three Task-2 programs.
pub fn standard_provider(db: &ApiDatabase) -> ScriptedProvider {
    let mut parts = task1_script(db, 5, 10);
    parts.extend(probe_script(db));
    parts.extend(task2_script(db, &["Clean", "MissingImport", "InfiniteLoop", "NoInvoke"]));
    provider(parts)
}

pub fn write_script(dir: &Path, p: &ScriptedProvider) -> PathBuf {
    let path = dir.join("mock_script.json");
    std::fs::write(&path, p.to_json_string()).unwrap();
    path
}

pub fn run_config(out: &Path, script: &Path, tasks: &[Task], reps: u32) -> RunConfig {
    RunConfig {
        db_path: fixtures().join("docs.json"),
        popularity_path: Some(fixtures().join("popularity.csv")),
        provider: ProviderKind::Mock { script: script.to_path_buf() },
        tasks: tasks.iter().copied().collect::<BTreeSet<_>>(),
        repetitions: reps,
        snippet_number: 5,
        api_list_size: 10,
        temperature: 0.6,
        decoding: Default::default(),
        rag_mode: RagMode::None,
        toolchain: ToolchainConfig::javac(out.join("work")),
        output_dir: out.to_path_buf(),
        parallelism: 1,
        resume: false,
        seed: 7,
        analysis: AnalysisConfig { forest: small_forest(), ..AnalysisConfig::default() },
    }
}

pub fn small_forest() -> apieval_core::stats::ForestConfig {
    apieval_core::stats::ForestConfig { n_trees: 20, seed: 3, ..Default::default() }
}

/// Compiler and JVM stand-in: compiles when ArrayList is imported, runs
/// forever when the source loops forever, and succeeds otherwise.
pub struct FakeJvm;

impl Spawner for FakeJvm {
    fn spawn(&self, req: &SpawnRequest<'_>) -> Result<ProcOutput, ExecError> {
        let src = std::fs::read_to_string(req.cwd.join("Main.java")).unwrap_or_default();
        let compile = req.argv.iter().any(|a| a.ends_with(".java"));
        let out = |code: Option<i32>, stdout: &str, stderr: &str, timed_out: bool| ProcOutput {
            exit_code: code,
            stdout: stdout.into(),
            stderr: stderr.into(),
            timed_out,
            elapsed: Duration::from_millis(1),
        };
        Ok(if compile {
            if src.contains("import java.util.ArrayList;") {
                out(Some(0), "", "", false)
            } else {
                out(
                    Some(1),
                    "",
                    "File 'Main.java', Line 3, Column 25: Cannot determine simple type name \"ArrayList\"",
                    false,
                )
            }
        } else if src.contains("while (true)") {
            out(None, "", "", true)
        } else {
            out(Some(0), "[Hello]\n", "", false)
        })
    }
}

pub fn fake_jvm() -> Arc<dyn Spawner> {
    Arc::new(FakeJvm)
}

/// Janino toolchain when a JRE and the Janino jars are present. The
/// directory comes from `APIEVAL_JVM_DIR`, defaulting to `/opt/jvm`.
pub fn janino_toolchain(work_root: &Path) -> Option<ToolchainConfig> {
    let dir = std::env::var_os("APIEVAL_JVM_DIR").map(PathBuf::from).unwrap_or_else(|| "/opt/jvm".into());
    let java = dir.join("jre/bin/java");
    (java.exists() && dir.join("janino-3.1.9.jar").exists()).then(|| ToolchainConfig::janino(&java, &dir, work_root))
}

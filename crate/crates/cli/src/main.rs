use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apieval_core::llmclient::Decoding;
use apieval_core::runner::{
    load_config, recompute, report, write_reports, AnalysisOverrides, RagMode, RunError, Runner, Task, EXIT_CONFIG,
};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

/// Evaluate API recommendation and code example generation by language models.
#[derive(Debug, Parser)]
#[command(name = "apieval", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a configured run and write its ledger and reports.
    Run(RunArgs),
    /// Re-derive every report from a ledger, optionally with new analysis settings.
    Recompute(RecomputeArgs),
    /// Write the reports of a ledger under its recorded settings.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured task set; repeatable.
    #[arg(long = "task", value_name = "task1|task2|probe|factors|stats")]
    tasks: Vec<Task>,
    #[arg(long, value_name = "none|desc-t1|desc-api-t1|desc-t2")]
    rag: Option<RagMode>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    temp: Option<f64>,
    #[arg(long, value_name = "greedy|beam:W|topk:K|default")]
    decoding: Option<Decoding>,
    /// Continue an interrupted run in the same output directory.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RecomputeArgs {
    #[arg(long)]
    ledger: PathBuf,
    /// Treat single-letter type variables as wildcards when matching.
    #[arg(long)]
    lenient_type_vars: bool,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    forest_seed: Option<u64>,
    #[arg(long)]
    pdp_points: Option<usize>,
    /// Defaults to `recomputed/` next to the ledger.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    ledger: PathBuf,
    /// Defaults to `reports/` next to the ledger.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn beside(ledger: &Path, name: &str) -> PathBuf {
    ledger.parent().unwrap_or(Path::new(".")).join(name)
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(a: RunArgs) -> Result<i32, RunError> {
    let mut cfg = load_config(&a.config)?;
    if !a.tasks.is_empty() {
        cfg.tasks = a.tasks.into_iter().collect();
    }
    if let Some(r) = a.rag {
        cfg.rag_mode = r;
    }
    if let Some(n) = a.reps {
        cfg.repetitions = n;
    }
    if let Some(t) = a.temp {
        cfg.temperature = t;
    }
    if let Some(d) = a.decoding {
        cfg.decoding = d;
    }
    if let Some(p) = a.parallelism {
        cfg.parallelism = p;
    }
    if let Some(o) = a.out {
        cfg.toolchain.work_root = o.join("work");
        cfg.output_dir = o;
    }
    cfg.resume |= a.resume;
    let s = Runner::new(cfg)?.run()?;
    println!("ledger: {}", s.ledger_path.display());
    println!("reports: {}", s.reports_dir.display());
    println!("generated {}, failed {}, skipped {}", s.generated, s.failed, s.skipped);
    if s.open_failures > 0 {
        eprintln!("{} call(s) failed; rerun with --resume to retry them", s.open_failures);
    }
    print!("{}", s.reports.files.get("summary.md").map(String::as_str).unwrap_or(""));
    Ok(s.exit_code())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match cli.command {
        Command::Run(a) => match run(a) {
            Ok(code) => ExitCode::from(code as u8),
            Err(e) => fail(e),
        },
        Command::Recompute(a) => {
            let o = AnalysisOverrides {
                lenient_type_vars: a.lenient_type_vars.then_some(true),
                forest_trees: a.trees,
                forest_seed: a.forest_seed,
                pdp_points: a.pdp_points,
            };
            let out = a.out.unwrap_or_else(|| beside(&a.ledger, "recomputed"));
            match recompute(&a.ledger, &o).and_then(|(l, r)| write_reports(&r, &out).map(|_| (l, r))) {
                Ok((l, r)) => {
                    println!("wrote {} report file(s) to {}", r.files.len(), out.display());
                    ExitCode::from(if l.open_failures().is_empty() { 0 } else { 3 })
                }
                Err(e) => fail(e),
            }
        }
        Command::Report(a) => {
            let out = a.out.unwrap_or_else(|| beside(&a.ledger, "reports"));
            match report(&a.ledger, &out) {
                Ok((l, r)) => {
                    print!("{}", r.files.get("summary.md").map(String::as_str).unwrap_or(""));
                    ExitCode::from(if l.open_failures().is_empty() { 0 } else { 3 })
                }
                Err(e) => fail(e),
            }
        }
    }
}

//! Deterministic derivation of every report from a ledger.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::{Path, PathBuf};

use super::config::{AnalysisConfig, Task};
use super::ledger::{Derived, GenerationEntry, Ledger, Task1Line};
use super::RunError;
use crate::apidoc::{ApiDatabase, ClassDoc, MethodSpec};
use crate::execharness::{classify_error, OutcomeKind};
use crate::factors::{
    api_length, consistency_task1, consistency_task2, default_embedder, logprobs_in_span, perplexity,
    rendering_length, FactorVector,
};
use crate::metrics::{apportion_tenths, format_tenths, reports_to_csv};
use crate::metrics::{
    aggregate_task1, aggregate_task2, MetricsReport, ScopeLevel, Task1Record, Task2Record, INCORRECT_API,
    NO_API_INVOKED, TOTAL, UNCOMPILABLE, UNEXECUTABLE,
};
use crate::prompts::{extract_api_line_spans, extract_code, parse_probe_answer, PromptKind};
use crate::signature::{classify_task1_error, exact_method, match_in_database, parse_signature, MatchOptions};
use crate::stats::{
    aggregate_package_factors, classifier_report_text, comparisons_to_csv, compare_groups, correlations_to_csv,
    high_correlation_pairs, importance_to_csv, package_correlations, partial_dependence, pdp_to_csv,
    train_random_forest, ApiFactorRow, CorrelationRow, GroupComparison,
};

pub fn is_task1(kind: PromptKind) -> bool {
    matches!(kind, PromptKind::Task1 | PromptKind::Task1RagDesc | PromptKind::Task1RagDescApi)
}

pub fn is_task2(kind: PromptKind) -> bool {
    matches!(kind, PromptKind::Task2 | PromptKind::Task2RagDesc)
}

/// Extraction, parsing and matching of one Task-1 response.
pub fn task1_records(g: &GenerationEntry, cls: &ClassDoc, db: &ApiDatabase, opts: MatchOptions) -> Vec<Task1Record> {
    let tokens = g.response.tokens.as_deref();
    extract_api_line_spans(&g.response.text)
        .into_iter()
        .map(|(line, span)| {
            let parsed = parse_signature(&line);
            let verdict = match_in_database(&parsed, cls, db, opts);
            Task1Record {
                class_fqcn: cls.fqcn.clone(),
                package_name: cls.package_name.clone(),
                run_index: g.run_index,
                raw_line: line,
                error_kind: classify_task1_error(&verdict).ok(),
                parsed,
                verdict,
                token_logprobs: tokens.map(|t| logprobs_in_span(t, span)),
            }
        })
        .collect()
}

pub fn task1_lines(records: &[Task1Record]) -> Vec<Task1Line> {
    records
        .iter()
        .map(|r| Task1Line {
            line: r.raw_line.clone(),
            canonical: r.parsed.canonical(),
            verdict: r.verdict.kind,
            error_kind: r.error_kind,
        })
        .collect()
}

/// Distinct documented methods recommended exactly at least once, sorted.
pub fn exact_methods<'a>(
    gens: impl IntoIterator<Item = &'a GenerationEntry>,
    db: &ApiDatabase,
    opts: MatchOptions,
) -> Vec<MethodSpec> {
    let mut out: BTreeMap<(String, String), MethodSpec> = BTreeMap::new();
    for g in gens.into_iter().filter(|g| is_task1(g.kind)) {
        let Some(cls) = db.query_class(&g.subject.fqcn) else { continue };
        for (line, _) in extract_api_line_spans(&g.response.text) {
            if let Some(m) = exact_method(&parse_signature(&line), cls, opts) {
                out.entry((m.fqcn(), m.display_signature())).or_insert_with(|| m.clone());
            }
        }
    }
    out.into_values().collect()
}

pub struct Derivation {
    pub task1: Vec<Task1Record>,
    /// Successful Task-1 generations per class, keyed by run index.
    pub task1_runs: BTreeMap<String, BTreeMap<u32, BTreeSet<String>>>,
    pub task2: Vec<(Task2Record, String)>,
    pub class_probes: BTreeMap<String, u8>,
    pub api_probes: BTreeMap<String, u8>,
    pub warnings: Vec<String>,
}

pub fn derive(ledger: &Ledger, db: &ApiDatabase, opts: MatchOptions) -> Result<Derivation, RunError> {
    let mut d = Derivation {
        task1: Vec::new(),
        task1_runs: BTreeMap::new(),
        task2: Vec::new(),
        class_probes: BTreeMap::new(),
        api_probes: BTreeMap::new(),
        warnings: Vec::new(),
    };
    for g in ledger.generations() {
        match g.kind {
            k if is_task1(k) => {
                let cls = db.class(&g.subject.fqcn).map_err(|e| RunError::Ledger(e.to_string()))?;
                let recs = task1_records(g, cls, db, opts);
                let set = recs.iter().map(|r| r.parsed.canonical()).collect();
                d.task1_runs.entry(cls.fqcn.clone()).or_default().insert(g.run_index, set);
                d.task1.extend(recs);
            }
            k if is_task2(k) => {
                let Derived::Task2 { code: stored, outcome, .. } = &g.derived else {
                    return Err(RunError::Ledger(format!("record {} lacks an execution outcome", g.seq)));
                };
                let m = g
                    .subject
                    .method
                    .clone()
                    .ok_or_else(|| RunError::Ledger(format!("record {} lacks its method", g.seq)))?;
                let code = extract_code(&g.response.text);
                if code != *stored {
                    d.warnings.push(format!("record {}: re-extracted code differs; outcome replayed", g.seq));
                }
                let taxonomy = if outcome.kind == OutcomeKind::Success {
                    None
                } else {
                    Some(
                        classify_error(outcome, code.as_deref().unwrap_or(""), Some(&g.response.text), &m, db)
                            .map_err(|e| RunError::Ledger(e.to_string()))?,
                    )
                };
                let logprobs = g.response.tokens.as_ref().map(|t| t.iter().map(|t| t.logprob).collect());
                let record = Task2Record {
                    method: m,
                    run_index: g.run_index,
                    code,
                    outcome: outcome.clone(),
                    taxonomy,
                    token_logprobs: logprobs,
                };
                d.task2.push((record, g.response.text.clone()));
            }
            PromptKind::ProbeClass => {
                d.class_probes.insert(g.subject.fqcn.clone(), parse_probe_answer(&g.response.text).as_bool() as u8);
            }
            PromptKind::ProbeApi => {
                d.api_probes.insert(g.subject.key(), parse_probe_answer(&g.response.text).as_bool() as u8);
            }
            _ => {}
        }
    }
    Ok(d)
}

/// One row per analysed item with its label (1 = incorrect / erroneous).
pub struct FactorTable {
    pub rows: Vec<ApiFactorRow>,
    pub labels: Vec<usize>,
}

fn ppl_or_nan(lp: Option<&Vec<f64>>) -> f64 {
    lp.and_then(|v| perplexity(v).ok()).unwrap_or(f64::NAN)
}

pub fn task1_factors(d: &Derivation, db: &ApiDatabase) -> FactorTable {
    let mut t = FactorTable { rows: Vec::new(), labels: Vec::new() };
    let runs: BTreeMap<&str, Vec<BTreeSet<String>>> = d
        .task1_runs
        .iter()
        .map(|(k, v)| (k.as_str(), v.values().cloned().collect()))
        .collect();
    for r in &d.task1 {
        let canonical = r.parsed.canonical();
        let consistency = runs
            .get(r.class_fqcn.as_str())
            .and_then(|rs| consistency_task1(&canonical, rs).ok())
            .unwrap_or(f64::NAN);
        let probe = d.class_probes.get(&r.class_fqcn).map(|&v| v as f64).unwrap_or(f64::NAN);
        t.rows.push(ApiFactorRow {
            package: r.package_name.clone(),
            class_fqcn: r.class_fqcn.clone(),
            api: canonical.clone(),
            values: [
                db.popularity(&r.package_name) as f64,
                rendering_length(&canonical) as f64,
                probe,
                ppl_or_nan(r.token_logprobs.as_ref()),
                consistency,
            ],
        });
        t.labels.push(!r.verdict.is_exact() as usize);
    }
    t
}

pub fn task2_factors(d: &Derivation, db: &ApiDatabase, warnings: &mut Vec<String>) -> FactorTable {
    let mut by_method: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, (r, _)) in d.task2.iter().enumerate() {
        by_method.entry(format!("{}#{}", r.method.fqcn(), r.method.display_signature())).or_default().push(i);
    }
    let mut distance = vec![f64::NAN; d.task2.len()];
    let embedder = default_embedder();
    for (key, idx) in &by_method {
        if idx.len() == 1 {
            distance[idx[0]] = 0.0;
            continue;
        }
        let texts: Vec<&str> = idx
            .iter()
            .map(|&i| d.task2[i].0.code.as_deref().unwrap_or(d.task2[i].1.as_str()))
            .collect();
        match consistency_task2(&texts, &embedder) {
            Ok(ds) => idx.iter().zip(ds).for_each(|(&i, v)| distance[i] = v),
            Err(e) => warnings.push(format!("consistency for {key}: {e}")),
        }
    }
    let mut t = FactorTable { rows: Vec::new(), labels: Vec::new() };
    for (i, (r, _)) in d.task2.iter().enumerate() {
        let m = &r.method;
        let key = format!("{}#{}", m.fqcn(), m.display_signature());
        t.rows.push(ApiFactorRow {
            package: m.package_name.clone(),
            class_fqcn: m.fqcn(),
            api: m.display_signature(),
            values: [
                db.popularity(&m.package_name) as f64,
                api_length(m) as f64,
                d.api_probes.get(&key).map(|&v| v as f64).unwrap_or(f64::NAN),
                ppl_or_nan(r.token_logprobs.as_ref()),
                distance[i],
            ],
        });
        t.labels.push((r.outcome.kind != OutcomeKind::Success) as usize);
    }
    t
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn factors_csv(t: &FactorTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["package", "class", "api", "label"];
    header.extend(FactorVector::NAMES);
    w.write_record(&header).expect("in-memory write");
    for (r, l) in t.rows.iter().zip(&t.labels) {
        let mut rec = vec![r.package.clone(), r.class_fqcn.clone(), r.api.clone(), l.to_string()];
        rec.extend(r.values.iter().map(|v| fmt_num(*v)));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Grid of up to `points` distinct quantiles of `col`.
fn quantile_grid(col: &[f64], points: usize) -> Vec<f64> {
    let mut s = col.to_vec();
    s.sort_by(f64::total_cmp);
    let points = points.max(2);
    let mut g: Vec<f64> = (0..points)
        .map(|i| s[((s.len() - 1) as f64 * i as f64 / (points - 1) as f64).round() as usize])
        .collect();
    g.dedup();
    g
}

struct TaskStats {
    comparisons: Vec<GroupComparison>,
    correlations: Vec<CorrelationRow>,
}

fn task_stats(
    name: &str,
    t: &FactorTable,
    package_metric: &BTreeMap<String, f64>,
    cfg: &AnalysisConfig,
    files: &mut BTreeMap<String, String>,
    warnings: &mut Vec<String>,
) -> TaskStats {
    let mut out = TaskStats { comparisons: Vec::new(), correlations: Vec::new() };
    if t.rows.is_empty() {
        warnings.push(format!("{name}: no items to analyse"));
        return out;
    }
    let usable: Vec<usize> = (0..5)
        .filter(|&f| {
            let ok = t.rows.iter().all(|r| r.values[f].is_finite());
            if !ok {
                warnings.push(format!("{name}: factor {} unavailable for some items; excluded", FactorVector::NAMES[f]));
            }
            ok
        })
        .collect();
    let column = |f: usize| -> Vec<f64> { t.rows.iter().map(|r| r.values[f]).collect() };
    for &f in &usable {
        let col = column(f);
        let a: Vec<f64> = col.iter().zip(&t.labels).filter(|(_, &l)| l == 1).map(|(v, _)| *v).collect();
        let b: Vec<f64> = col.iter().zip(&t.labels).filter(|(_, &l)| l == 0).map(|(v, _)| *v).collect();
        match compare_groups(FactorVector::NAMES[f], &a, &b) {
            Ok(c) => out.comparisons.push(c),
            Err(e) => warnings.push(format!("{name}: comparison of {}: {e}", FactorVector::NAMES[f])),
        }
    }
    match aggregate_package_factors(&t.rows) {
        Ok(pk) => {
            out.correlations = package_correlations(name, &pk, package_metric);
            if out.correlations.iter().any(|c| c.value.is_none()) {
                warnings.push(format!("{name}: some package-level correlations are undefined over {} package(s)", pk.len()));
            }
        }
        Err(e) => warnings.push(format!("{name}: package aggregation: {e}")),
    }
    let names: Vec<&str> = usable.iter().map(|&f| FactorVector::NAMES[f]).collect();
    let cols: Vec<Vec<f64>> = usable.iter().map(|&f| column(f)).collect();
    for (a, b, r) in high_correlation_pairs(&names, &cols) {
        warnings.push(format!("{name}: factors {a} and {b} are highly correlated ({r:.3})"));
    }
    if usable.is_empty() {
        return out;
    }
    let x: Vec<Vec<f64>> = t.rows.iter().map(|r| usable.iter().map(|&f| r.values[f]).collect()).collect();
    let feature_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    match train_random_forest(&x, &t.labels, &feature_names, &cfg.forest) {
        Ok((model, report)) => {
            files.insert(format!("classifier_{name}.csv"), classifier_report_text(&report));
            files.insert(format!("importance_{name}.csv"), importance_to_csv(&report.feature_importance));
            files.insert(
                format!("classifier_{name}.json"),
                serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
            );
            for (j, fname) in feature_names.iter().enumerate() {
                let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
                let grid = quantile_grid(&col, cfg.pdp_points);
                if let Ok(series) = partial_dependence(&model, j, &grid, &x, 1) {
                    files.insert(format!("pdp_{name}_{fname}.csv"), pdp_to_csv(fname, &series));
                }
            }
        }
        Err(e) => warnings.push(format!("{name}: classifier not trained: {e}")),
    }
    out
}

fn model_report<'a>(reports: &'a [MetricsReport]) -> Option<&'a MetricsReport> {
    reports.iter().find(|r| r.scope.level == ScopeLevel::Model)
}

fn package_metric(reports: &[MetricsReport], metric: &str) -> BTreeMap<String, f64> {
    reports
        .iter()
        .filter(|r| r.scope.level == ScopeLevel::Package)
        .filter_map(|r| r.ratio(metric).map(|x| (r.scope.key.clone(), x.proportion())))
        .collect()
}

fn summary_md(model: &str, t1: &[MetricsReport], t2: &[MetricsReport], ledger: &Ledger) -> String {
    let pct = |r: Option<&MetricsReport>, k: &str| -> String {
        r.and_then(|r| r.ratio(k))
            .map(|x| format_tenths(apportion_tenths(&[x.numerator], x.denominator)[0]))
            .unwrap_or_else(|| "-".into())
    };
    let m1 = model_report(t1);
    let m2 = model_report(t2);
    let (none, comp, exec, total) = match m2 {
        Some(r) => {
            let parts = [NO_API_INVOKED, UNCOMPILABLE, UNEXECUTABLE];
            let nums: Vec<u64> = parts.iter().map(|k| r.counts[*k].numerator).collect();
            let t = apportion_tenths(&nums, r.counts[TOTAL].denominator);
            (format_tenths(t[0]), format_tenths(t[1]), format_tenths(t[2]), format_tenths(t.iter().sum()))
        }
        None => ("-".into(), "-".into(), "-".into(), "-".into()),
    };
    let mut s = String::new();
    let _ = writeln!(s, "# Evaluation summary\n");
    let _ = writeln!(s, "| Model | IncorrectAPI% | NoAPIInvoked% | Uncompilable% | Unexecutable% | Total% |");
    let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|");
    let _ = writeln!(s, "| {model} | {} | {none} | {comp} | {exec} | {total} |", pct(m1, INCORRECT_API));
    let _ = writeln!(s);
    let gens = ledger.generations().count();
    let open = ledger.open_failures().len();
    let _ = writeln!(s, "Generations: {gens}. Unresolved provider failures: {open}.");
    if let Some(r) = m1 {
        let c = r.ratio(INCORRECT_API).expect("task1 report has IncorrectAPI");
        let _ = writeln!(s, "Task 1: {} of {} extracted APIs incorrect.", c.numerator, c.denominator);
    }
    if let Some(r) = m2 {
        let c = r.ratio(TOTAL).expect("task2 report has Total");
        let _ = writeln!(s, "Task 2: {} of {} examples erroneous.", c.numerator, c.denominator);
    }
    s
}

fn breakdown_csv(r: &MetricsReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "hallucination", "count", "percent"]).expect("in-memory write");
    if let Some(b) = &r.task1_breakdown {
        let total: u64 = b.counts.values().sum();
        let kinds: Vec<_> = b.counts.keys().copied().collect();
        let nums: Vec<u64> = b.counts.values().copied().collect();
        let tenths = apportion_tenths(&nums, total);
        for ((k, n), t) in kinds.iter().zip(&nums).zip(&tenths) {
            w.write_record([k.as_str(), k.hallucination_label(), &n.to_string(), &format_tenths(*t)])
                .expect("in-memory write");
        }
        let om = b.overload_merge;
        w.write_record([
            "overloadMerge",
            "",
            &om.numerator.to_string(),
            &format_tenths(apportion_tenths(&[om.numerator], om.denominator)[0]),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn taxonomy_csv(records: &[(Task2Record, String)]) -> String {
    let mut hist: BTreeMap<(String, String), u64> = BTreeMap::new();
    for (r, _) in records {
        if let Some(t) = r.taxonomy {
            *hist.entry((format!("{:?}", t.top), t.sub.as_str().to_string())).or_default() += 1;
        }
    }
    let total: u64 = hist.values().sum();
    let nums: Vec<u64> = hist.values().copied().collect();
    let tenths = apportion_tenths(&nums, total);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["top", "sub", "count", "percent"]).expect("in-memory write");
    for (((top, sub), n), t) in hist.iter().zip(&tenths) {
        w.write_record([top, sub, &n.to_string(), &format_tenths(*t)]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Every report file, by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSet {
    pub files: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

pub fn database_of(ledger: &Ledger) -> Result<ApiDatabase, RunError> {
    let db = ApiDatabase::from_document(&ledger.header.db).map_err(|e| RunError::Ledger(e.to_string()))?;
    Ok(db.with_popularity_table(ledger.header.popularity.clone()))
}

pub fn analyze(ledger: &Ledger, cfg: &AnalysisConfig) -> Result<ReportSet, RunError> {
    let db = database_of(ledger)?;
    let d = derive(ledger, &db, cfg.match_options)?;
    let model = ledger.header.model_id.as_str();
    let tasks = &ledger.header.tasks;
    let mut files = BTreeMap::new();
    let mut warnings = d.warnings.clone();
    for f in ledger.open_failures() {
        warnings.push(format!("record {} ({:?} {} run {}): {}", f.seq, f.kind, f.subject.key(), f.run_index, f.error));
    }

    let t1_records: Vec<Task1Record> = d.task1.clone();
    let t2_records: Vec<Task2Record> = d.task2.iter().map(|(r, _)| r.clone()).collect();
    let t1 = aggregate_task1(&t1_records, model);
    let t2 = aggregate_task2(&t2_records, model);
    if !t1.is_empty() {
        files.insert("metrics_task1.csv".into(), reports_to_csv(&t1));
        if let Some(m) = model_report(&t1) {
            files.insert("task1_breakdown.csv".into(), breakdown_csv(m));
        }
    }
    if !t2.is_empty() {
        files.insert("metrics_task2.csv".into(), reports_to_csv(&t2));
        files.insert("taxonomy.csv".into(), taxonomy_csv(&d.task2));
    }
    let all: BTreeMap<&str, &Vec<MetricsReport>> = [("task1", &t1), ("task2", &t2)].into_iter().collect();
    files.insert("metrics.json".into(), serde_json::to_string_pretty(&all).expect("metrics serialize") + "\n");
    files.insert("summary.md".into(), summary_md(model, &t1, &t2, ledger));

    let want_factors = tasks.contains(&Task::Factors) || tasks.contains(&Task::Stats);
    if want_factors {
        let mut comparisons = Vec::new();
        let mut correlations = Vec::new();
        let tables = [
            ("task1", task1_factors(&d, &db), package_metric(&t1, INCORRECT_API)),
            ("task2", task2_factors(&d, &db, &mut warnings), package_metric(&t2, TOTAL)),
        ];
        for (name, table, metric) in &tables {
            if table.rows.is_empty() {
                continue;
            }
            files.insert(format!("factors_{name}.csv"), factors_csv(table));
            if tasks.contains(&Task::Stats) {
                let s = task_stats(name, table, metric, cfg, &mut files, &mut warnings);
                comparisons.extend(s.comparisons.into_iter().map(|c| (name.to_string(), c)));
                correlations.extend(s.correlations);
            }
        }
        if tasks.contains(&Task::Stats) {
            let mut csv = String::from("task,");
            let body = comparisons_to_csv(&comparisons.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>());
            let mut lines = body.lines();
            csv.push_str(lines.next().unwrap_or_default());
            csv.push('\n');
            for ((task, _), line) in comparisons.iter().zip(lines) {
                let _ = writeln!(csv, "{task},{line}");
            }
            files.insert("comparisons.csv".into(), csv);
            files.insert("correlations.csv".into(), correlations_to_csv(&correlations));
        }
    }
    let mut w = String::new();
    for line in &warnings {
        let _ = writeln!(w, "{line}");
    }
    files.insert("warnings.txt".into(), w);
    Ok(ReportSet { files, warnings })
}

pub fn write_reports(set: &ReportSet, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for (name, body) in &set.files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| RunError::Io(format!("cannot write {}: {e}", p.display())))?;
        out.push(p);
    }
    Ok(out)
}

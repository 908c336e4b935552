//! Task-level quality metrics with class, package and model aggregation.

mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apidoc::MethodSpec;
use crate::execharness::{ErrorTaxonomyLabel, ExecOutcome, OutcomeKind};
use crate::signature::{MatchVerdict, MismatchPart, ParsedSignature, Task1ErrorKind};

pub use report::{apportion_tenths, format_tenths, reports_to_csv, summary_table};

pub const INCORRECT_API: &str = "IncorrectAPI";
pub const NO_API_INVOKED: &str = "NoAPIInvoked";
pub const UNCOMPILABLE: &str = "Uncompilable";
pub const UNEXECUTABLE: &str = "Unexecutable";
pub const TOTAL: &str = "Total";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no records in scope {0}")]
    EmptyScope(String),
    #[error("no incorrect records to break down")]
    NoIncorrectRecords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeLevel {
    Class,
    Package,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scope {
    pub level: ScopeLevel,
    pub key: String,
}

impl Scope {
    pub fn new(level: ScopeLevel, key: impl Into<String>) -> Self {
        Scope { level, key: key.into() }
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let level = match self.level {
            ScopeLevel::Class => "class",
            ScopeLevel::Package => "package",
            ScopeLevel::Model => "model",
        };
        write!(f, "{level}:{}", self.key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task1Record {
    pub class_fqcn: String,
    pub package_name: String,
    pub run_index: u32,
    pub raw_line: String,
    pub parsed: ParsedSignature,
    pub verdict: MatchVerdict,
    pub error_kind: Option<Task1ErrorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task2Record {
    pub method: MethodSpec,
    pub run_index: u32,
    pub code: Option<String>,
    pub outcome: ExecOutcome,
    pub taxonomy: Option<ErrorTaxonomyLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio { numerator, denominator }
    }

    /// `0` for an empty denominator.
    pub fn proportion(self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    pub fn percent(self) -> f64 {
        100.0 * self.proportion()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Task1Breakdown {
    pub counts: BTreeMap<Task1ErrorKind, u64>,
    /// Within IncorrectReturnTypeOrParameter only.
    pub overload_merge: Ratio,
    /// How often each signature part disagreed, over mismatch records.
    pub mismatch_parts: BTreeMap<MismatchPart, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scope: Scope,
    pub counts: BTreeMap<String, Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task1_breakdown: Option<Task1Breakdown>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub taxonomy_histogram: BTreeMap<String, u64>,
}

impl MetricsReport {
    pub fn ratio(&self, metric: &str) -> Option<Ratio> {
        self.counts.get(metric).copied()
    }
}

pub fn breakdown_task1_errors<'a>(
    records: impl IntoIterator<Item = &'a Task1Record>,
) -> Result<Task1Breakdown, MetricsError> {
    let mut b = Task1Breakdown::default();
    let mut any = false;
    for r in records {
        let Some(kind) = r.error_kind else { continue };
        any = true;
        *b.counts.entry(kind).or_default() += 1;
        if kind == Task1ErrorKind::IncorrectReturnTypeOrParameter {
            b.overload_merge.denominator += 1;
            if r.verdict.overload_merge {
                b.overload_merge.numerator += 1;
            }
            for p in &r.verdict.mismatch_parts {
                *b.mismatch_parts.entry(*p).or_default() += 1;
            }
        }
    }
    if any {
        Ok(b)
    } else {
        Err(MetricsError::NoIncorrectRecords)
    }
}

/// IncorrectAPI% over every extracted line, duplicates counted.
pub fn compute_task1_metrics(records: &[&Task1Record], scope: Scope) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyScope(scope.to_string()));
    }
    let incorrect = records.iter().filter(|r| !r.verdict.is_exact()).count() as u64;
    let mut counts = BTreeMap::new();
    counts.insert(INCORRECT_API.to_string(), Ratio::new(incorrect, records.len() as u64));
    Ok(MetricsReport {
        scope,
        counts,
        task1_breakdown: breakdown_task1_errors(records.iter().copied()).ok(),
        taxonomy_histogram: BTreeMap::new(),
    })
}

/// NoAPIInvoked%, Uncompilable%, Unexecutable% and their sum over one
/// shared denominator. Timeouts count as unexecutable.
pub fn compute_task2_metrics(records: &[&Task2Record], scope: Scope) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyScope(scope.to_string()));
    }
    let n = records.len() as u64;
    let (mut none, mut comp, mut exec) = (0u64, 0u64, 0u64);
    let mut hist: BTreeMap<String, u64> = BTreeMap::new();
    for r in records {
        match r.outcome.kind {
            OutcomeKind::NoApiInvoked => none += 1,
            OutcomeKind::CompileError => comp += 1,
            OutcomeKind::RuntimeError | OutcomeKind::Timeout => exec += 1,
            OutcomeKind::Success => {}
        }
        if let Some(t) = r.taxonomy {
            *hist.entry(t.sub.as_str().to_string()).or_default() += 1;
        }
    }
    let mut counts = BTreeMap::new();
    counts.insert(NO_API_INVOKED.to_string(), Ratio::new(none, n));
    counts.insert(UNCOMPILABLE.to_string(), Ratio::new(comp, n));
    counts.insert(UNEXECUTABLE.to_string(), Ratio::new(exec, n));
    counts.insert(TOTAL.to_string(), Ratio::new(none + comp + exec, n));
    Ok(MetricsReport {
        scope,
        counts,
        task1_breakdown: None,
        taxonomy_histogram: hist,
    })
}

fn group<'a, T>(items: &'a [T], key: impl Fn(&T) -> String) -> BTreeMap<String, Vec<&'a T>> {
    let mut m: BTreeMap<String, Vec<&T>> = BTreeMap::new();
    for it in items {
        m.entry(key(it)).or_default().push(it);
    }
    m
}

/// Class, package and model reports, in that order, keys sorted.
pub fn aggregate_task1(records: &[Task1Record], model: &str) -> Vec<MetricsReport> {
    let mut out = Vec::new();
    for (k, rs) in group(records, |r| r.class_fqcn.clone()) {
        out.extend(compute_task1_metrics(&rs, Scope::new(ScopeLevel::Class, k)));
    }
    for (k, rs) in group(records, |r| r.package_name.clone()) {
        out.extend(compute_task1_metrics(&rs, Scope::new(ScopeLevel::Package, k)));
    }
    let all: Vec<&Task1Record> = records.iter().collect();
    out.extend(compute_task1_metrics(&all, Scope::new(ScopeLevel::Model, model)));
    out
}

pub fn aggregate_task2(records: &[Task2Record], model: &str) -> Vec<MetricsReport> {
    let mut out = Vec::new();
    for (k, rs) in group(records, |r| r.method.fqcn()) {
        out.extend(compute_task2_metrics(&rs, Scope::new(ScopeLevel::Class, k)));
    }
    for (k, rs) in group(records, |r| r.method.package_name.clone()) {
        out.extend(compute_task2_metrics(&rs, Scope::new(ScopeLevel::Package, k)));
    }
    let all: Vec<&Task2Record> = records.iter().collect();
    out.extend(compute_task2_metrics(&all, Scope::new(ScopeLevel::Model, model)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{parse_signature, VerdictKind};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn t1(class: &str, pkg: &str, kind: VerdictKind, merge: bool) -> Task1Record {
        let error_kind = match kind {
            VerdictKind::Exact => None,
            VerdictKind::NameExistsSignatureMismatch => Some(Task1ErrorKind::IncorrectReturnTypeOrParameter),
            VerdictKind::NameNotFound => Some(Task1ErrorKind::MethodNameNotExist),
            VerdictKind::NotMethod => Some(Task1ErrorKind::NotMethod),
            VerdictKind::Malformed => Some(Task1ErrorKind::InstructionInconsistency),
        };
        Task1Record {
            class_fqcn: class.into(),
            package_name: pkg.into(),
            run_index: 0,
            raw_line: "x".into(),
            parsed: parse_signature("void x()"),
            verdict: MatchVerdict {
                kind,
                overload_merge: merge,
                mismatch_parts: if merge { BTreeSet::from([MismatchPart::ReturnType]) } else { BTreeSet::new() },
                declared_on_parent: false,
            },
            error_kind,
            token_logprobs: None,
        }
    }

    fn t2(kind: OutcomeKind) -> Task2Record {
        Task2Record {
            method: MethodSpec {
                package_name: "java.util".into(),
                class_name: "ArrayList".into(),
                simple_name: "add".into(),
                return_type: "boolean".into(),
                param_types: vec!["E".into()],
                param_names: vec![None],
                is_static: false,
                is_deprecated: false,
                summary: String::new(),
                description: String::new(),
            },
            run_index: 0,
            code: None,
            outcome: ExecOutcome {
                kind,
                stdout: String::new(),
                stderr: String::new(),
                exit_code: None,
                compile_output: String::new(),
                deprecation_warning: false,
            },
            taxonomy: None,
            token_logprobs: None,
        }
    }

    #[test]
    fn incorrect_api_ratio() {
        let mut rs: Vec<Task1Record> = (0..4).map(|_| t1("a.B", "a", VerdictKind::Exact, false)).collect();
        rs.extend((0..6).map(|_| t1("a.B", "a", VerdictKind::NameNotFound, false)));
        let refs: Vec<&Task1Record> = rs.iter().collect();
        let r = compute_task1_metrics(&refs, Scope::new(ScopeLevel::Model, "m")).unwrap();
        assert_eq!(r.ratio(INCORRECT_API).unwrap(), Ratio::new(6, 10));
        assert!((r.ratio(INCORRECT_API).unwrap().percent() - 60.0).abs() < 1e-12);
        assert!(compute_task1_metrics(&[], Scope::new(ScopeLevel::Model, "m")).is_err());
    }

    #[test]
    fn task2_shared_denominator() {
        let mut rs = Vec::new();
        rs.extend((0..2).map(|_| t2(OutcomeKind::NoApiInvoked)));
        rs.extend((0..3).map(|_| t2(OutcomeKind::CompileError)));
        rs.push(t2(OutcomeKind::Timeout));
        rs.extend((0..4).map(|_| t2(OutcomeKind::Success)));
        let refs: Vec<&Task2Record> = rs.iter().collect();
        let r = compute_task2_metrics(&refs, Scope::new(ScopeLevel::Model, "m")).unwrap();
        assert_eq!(r.ratio(NO_API_INVOKED).unwrap(), Ratio::new(2, 10));
        assert_eq!(r.ratio(UNCOMPILABLE).unwrap(), Ratio::new(3, 10));
        assert_eq!(r.ratio(UNEXECUTABLE).unwrap(), Ratio::new(1, 10));
        assert_eq!(r.ratio(TOTAL).unwrap(), Ratio::new(6, 10));
    }

    #[test]
    fn breakdown_and_merge_share() {
        let mut rs = vec![
            t1("a.B", "a", VerdictKind::NameNotFound, false),
            t1("a.B", "a", VerdictKind::NameNotFound, false),
            t1("a.B", "a", VerdictKind::NameNotFound, false),
            t1("a.B", "a", VerdictKind::NotMethod, false),
        ];
        let b = breakdown_task1_errors(&rs).unwrap();
        assert_eq!(b.counts[&Task1ErrorKind::MethodNameNotExist], 3);
        assert_eq!(b.counts[&Task1ErrorKind::NotMethod], 1);
        rs.push(t1("a.B", "a", VerdictKind::NameExistsSignatureMismatch, true));
        rs.push(t1("a.B", "a", VerdictKind::NameExistsSignatureMismatch, false));
        let b = breakdown_task1_errors(&rs).unwrap();
        assert_eq!(b.overload_merge.proportion(), 0.5);
        assert_eq!(
            breakdown_task1_errors(&[t1("a.B", "a", VerdictKind::Exact, false)]),
            Err(MetricsError::NoIncorrectRecords)
        );
    }

    fn kind_strategy() -> impl Strategy<Value = VerdictKind> {
        prop_oneof![
            Just(VerdictKind::Exact),
            Just(VerdictKind::NameNotFound),
            Just(VerdictKind::NotMethod),
            Just(VerdictKind::Malformed),
            Just(VerdictKind::NameExistsSignatureMismatch),
        ]
    }

    proptest! {
        #[test]
        fn scopes_sum_up(items in prop::collection::vec((0usize..4, kind_strategy()), 1..60)) {
            let classes = ["p.A", "p.B", "q.C", "q.D"];
            let rs: Vec<Task1Record> = items
                .iter()
                .map(|(c, k)| t1(classes[*c], &classes[*c][..1], *k, false))
                .collect();
            let reports = aggregate_task1(&rs, "m");
            let sum = |level: ScopeLevel| {
                reports.iter().filter(|r| r.scope.level == level).fold((0, 0), |(a, b), r| {
                    let x = r.ratio(INCORRECT_API).unwrap();
                    (a + x.numerator, b + x.denominator)
                })
            };
            prop_assert_eq!(sum(ScopeLevel::Class), sum(ScopeLevel::Package));
            prop_assert_eq!(sum(ScopeLevel::Package), sum(ScopeLevel::Model));
        }

        #[test]
        fn task2_total_is_exact_sum(kinds in prop::collection::vec(0u8..5, 1..80)) {
            let all = [OutcomeKind::NoApiInvoked, OutcomeKind::CompileError, OutcomeKind::RuntimeError, OutcomeKind::Timeout, OutcomeKind::Success];
            let rs: Vec<Task2Record> = kinds.iter().map(|k| t2(all[*k as usize])).collect();
            for r in aggregate_task2(&rs, "m") {
                let parts = [NO_API_INVOKED, UNCOMPILABLE, UNEXECUTABLE].map(|k| r.ratio(k).unwrap());
                let total = r.ratio(TOTAL).unwrap();
                prop_assert!(parts.iter().all(|p| p.denominator == total.denominator));
                prop_assert_eq!(parts.iter().map(|p| p.numerator).sum::<u64>(), total.numerator);
                prop_assert!((0.0..=1.0).contains(&total.proportion()));
                let tenths = apportion_tenths(&parts.map(|p| p.numerator), total.denominator);
                prop_assert_eq!(tenths.iter().sum::<u64>(), apportion_tenths(&[total.numerator], total.denominator)[0]);
            }
        }
    }
}

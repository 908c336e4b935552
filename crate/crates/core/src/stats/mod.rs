//! Group comparisons, effect sizes, correlations, sample sizing and a random
//! forest classifier with importance and partial dependence.

mod forest;
mod rank;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::factors::FactorVector;

pub use forest::{
    classification_metrics, feature_importance, fit_forest, partial_dependence, stratified_split,
    train_random_forest, ClassMetrics, ClassifierReport, DecisionTree, ForestConfig, ForestModel, Node,
};
pub use rank::{cliffs_delta, mann_whitney_exact, mann_whitney_normal, mann_whitney_u, Magnitude, MannWhitney, EXACT_MAX_POOLED};

/// Pairs at or above this absolute correlation are flagged.
pub const HIGH_CORRELATION: f64 = 0.7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {need} values, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("constant input has no correlation")]
    Constant,
    #[error("invalid confidence {0}")]
    InvalidConfidence(f64),
    #[error("invalid margin of error {0}")]
    InvalidMargin(f64),
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("no features")]
    NoFeatures,
    #[error("rows have differing feature counts")]
    RaggedFeatures,
    #[error("model has no trees")]
    Untrained,
    #[error("feature index {index} out of range for {count} features")]
    FeatureOutOfRange { index: usize, count: usize },
    #[error("package {0} has no records")]
    EmptyGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

impl CorrelationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub factor_name: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub u_statistic: f64,
    pub p_value: f64,
    pub cliffs_d: f64,
    pub magnitude: Magnitude,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn compare_groups(factor_name: &str, a: &[f64], b: &[f64]) -> Result<GroupComparison, StatsError> {
    let mw = mann_whitney_u(a, b)?;
    let (d, magnitude) = cliffs_delta(a, b)?;
    Ok(GroupComparison {
        factor_name: factor_name.to_string(),
        mean_a: mean(a),
        mean_b: mean(b),
        u_statistic: mw.u,
        p_value: mw.p_value,
        cliffs_d: d,
        magnitude,
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Constant);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn correlation(xs: &[f64], ys: &[f64], method: CorrelationMethod) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 3 {
        return Err(StatsError::TooShort { need: 3, got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    match method {
        CorrelationMethod::Pearson => pearson(xs, ys),
        CorrelationMethod::Spearman => pearson(&average_ranks(xs), &average_ranks(ys)),
    }
}

/// Cochran's sample size with finite-population correction, rounded up.
/// The critical value is the two-sided normal quantile rounded to 4 places.
pub fn representative_sample_size(population: u64, confidence: f64, margin: f64) -> Result<u64, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidConfidence(confidence));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(StatsError::InvalidMargin(margin));
    }
    if population == 0 {
        return Err(StatsError::EmptyPopulation);
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let z = (z * 1e4).round() / 1e4;
    let n0 = z * z * 0.25 / (margin * margin);
    let n = n0 / (1.0 + (n0 - 1.0) / population as f64);
    Ok(((n - 1e-9).ceil() as u64).clamp(1, population))
}

/// One API's factors in [`FactorVector::NAMES`] order, tagged with its
/// package and class. NaN marks a factor that could not be measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiFactorRow {
    pub package: String,
    pub class_fqcn: String,
    pub api: String,
    pub values: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageFactorRow {
    pub package: String,
    pub n_apis: usize,
    pub n_classes: usize,
    /// In [`FactorVector::NAMES`] order; NaN when no API had the factor.
    pub values: [f64; 5],
}

pub const PROBING_INDEX: usize = 2;

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 })
}

/// Numeric factors become package medians; probing becomes the share of
/// classes whose probe answer was Yes.
pub fn aggregate_package_factors(rows: &[ApiFactorRow]) -> Result<Vec<PackageFactorRow>, StatsError> {
    let mut groups: BTreeMap<&str, Vec<&ApiFactorRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(&r.package).or_default().push(r);
    }
    let mut out = Vec::new();
    for (pkg, rs) in groups {
        if rs.is_empty() {
            return Err(StatsError::EmptyGroup(pkg.to_string()));
        }
        let mut values = [f64::NAN; 5];
        for (f, slot) in values.iter_mut().enumerate() {
            if f == PROBING_INDEX {
                continue;
            }
            let col: Vec<f64> = rs.iter().map(|r| r.values[f]).filter(|v| v.is_finite()).collect();
            *slot = median(&col).unwrap_or(f64::NAN);
        }
        let mut class_probe: BTreeMap<&str, f64> = BTreeMap::new();
        for r in &rs {
            if r.values[PROBING_INDEX].is_finite() {
                class_probe.entry(&r.class_fqcn).or_insert(r.values[PROBING_INDEX]);
            }
        }
        if !class_probe.is_empty() {
            values[PROBING_INDEX] =
                class_probe.values().filter(|&&v| v == 1.0).count() as f64 / class_probe.len() as f64;
        }
        let n_classes = rs.iter().map(|r| r.class_fqcn.as_str()).collect::<BTreeSet<_>>().len();
        out.push(PackageFactorRow { package: pkg.to_string(), n_apis: rs.len(), n_classes, values });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub scope: String,
    pub factor: String,
    pub method: CorrelationMethod,
    /// `None` when undefined (constant column or fewer than 3 packages).
    pub value: Option<f64>,
}

/// Correlation of each package factor with a package metric (e.g. the
/// IncorrectAPI proportion), both methods.
pub fn package_correlations(
    scope: &str,
    packages: &[PackageFactorRow],
    metric: &BTreeMap<String, f64>,
) -> Vec<CorrelationRow> {
    let paired: Vec<(&PackageFactorRow, f64)> =
        packages.iter().filter_map(|p| metric.get(&p.package).map(|m| (p, *m))).collect();
    let ys: Vec<f64> = paired.iter().map(|p| p.1).collect();
    let mut out = Vec::new();
    for (f, name) in FactorVector::NAMES.iter().enumerate() {
        let xs: Vec<f64> = paired.iter().map(|p| p.0.values[f]).collect();
        for method in [CorrelationMethod::Pearson, CorrelationMethod::Spearman] {
            out.push(CorrelationRow {
                scope: scope.to_string(),
                factor: name.to_string(),
                method,
                value: correlation(&xs, &ys, method).ok(),
            });
        }
    }
    out
}

/// Factor pairs whose absolute Pearson correlation reaches [`HIGH_CORRELATION`].
pub fn high_correlation_pairs(names: &[&str], columns: &[Vec<f64>]) -> Vec<(String, String, f64)> {
    let mut out = Vec::new();
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            if let Ok(r) = correlation(&columns[i], &columns[j], CorrelationMethod::Pearson) {
                if r.abs() >= HIGH_CORRELATION {
                    out.push((names[i].to_string(), names[j].to_string(), r));
                }
            }
        }
    }
    out
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub fn correlations_to_csv(rows: &[CorrelationRow]) -> String {
    csv_string(
        &["scope", "factor", "method", "value"],
        rows.iter().map(|r| {
            vec![r.scope.clone(), r.factor.clone(), r.method.as_str().to_string(), r.value.map(num).unwrap_or_default()]
        }),
    )
}

pub fn pdp_to_csv(feature: &str, series: &[(f64, f64)]) -> String {
    csv_string(
        &["feature", "gridValue", "meanProbability"],
        series.iter().map(|(g, p)| vec![feature.to_string(), num(*g), num(*p)]),
    )
}

pub fn comparisons_to_csv(rows: &[GroupComparison]) -> String {
    csv_string(
        &["factor", "meanA", "meanB", "u", "pValue", "cliffsD", "magnitude"],
        rows.iter().map(|r| {
            vec![
                r.factor_name.clone(),
                num(r.mean_a),
                num(r.mean_b),
                num(r.u_statistic),
                num(r.p_value),
                num(r.cliffs_d),
                r.magnitude.as_str().to_string(),
            ]
        }),
    )
}

pub fn classifier_report_text(r: &ClassifierReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "class,precision,recall,f1,support");
    for (c, m) in &r.per_class {
        let _ = writeln!(s, "{c},{},{},{},{}", num(m.precision), num(m.recall), num(m.f1), m.support);
    }
    let w = &r.weighted;
    let _ = writeln!(s, "weighted,{},{},{},{}", num(w.precision), num(w.recall), num(w.f1), w.support);
    s
}

pub fn importance_to_csv(importance: &BTreeMap<String, f64>) -> String {
    csv_string(&["feature", "importance"], importance.iter().map(|(k, v)| vec![k.clone(), num(*v)]))
}

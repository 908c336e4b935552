use std::fmt::Write;

use super::{MetricsReport, Ratio, ScopeLevel, NO_API_INVOKED, TOTAL, UNCOMPILABLE, UNEXECUTABLE};

/// Percentages in tenths of a percent, rounded so that the parts add up to
/// the rounded percentage of their sum (largest-remainder method).
pub fn apportion_tenths(numerators: &[u64], denominator: u64) -> Vec<u64> {
    if denominator == 0 {
        return vec![0; numerators.len()];
    }
    let d = denominator as u128;
    let total: u128 = numerators.iter().map(|&n| n as u128).sum();
    let target = (2 * 1000 * total + d) / (2 * d);
    let mut parts: Vec<(u128, u128, usize)> = numerators
        .iter()
        .enumerate()
        .map(|(i, &n)| ((1000 * n as u128) / d, (1000 * n as u128) % d, i))
        .collect();
    let floor_sum: u128 = parts.iter().map(|p| p.0).sum();
    let mut deficit = target.saturating_sub(floor_sum);
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| parts[b].1.cmp(&parts[a].1).then(a.cmp(&b)));
    for i in order {
        if deficit == 0 {
            break;
        }
        if parts[i].1 > 0 {
            parts[i].0 += 1;
            deficit -= 1;
        }
    }
    parts.into_iter().map(|p| p.0 as u64).collect()
}

pub fn format_tenths(t: u64) -> String {
    format!("{}.{}", t / 10, t % 10)
}

fn level_str(l: ScopeLevel) -> &'static str {
    match l {
        ScopeLevel::Class => "class",
        ScopeLevel::Package => "package",
        ScopeLevel::Model => "model",
    }
}

/// Display percentages for every count of a report, with the Task-2 parts
/// apportioned against their total.
fn percent_strings(r: &MetricsReport) -> Vec<(String, Ratio, String)> {
    let parts = [NO_API_INVOKED, UNCOMPILABLE, UNEXECUTABLE];
    let mut out = Vec::new();
    if parts.iter().all(|k| r.counts.contains_key(*k)) {
        let nums: Vec<u64> = parts.iter().map(|k| r.counts[*k].numerator).collect();
        let den = r.counts[NO_API_INVOKED].denominator;
        let tenths = apportion_tenths(&nums, den);
        for (k, t) in parts.iter().zip(&tenths) {
            out.push((k.to_string(), r.counts[*k], format_tenths(*t)));
        }
        if let Some(total) = r.counts.get(TOTAL) {
            out.push((TOTAL.to_string(), *total, format_tenths(tenths.iter().sum())));
        }
    }
    for (k, ratio) in &r.counts {
        if out.iter().any(|(name, _, _)| name == k) {
            continue;
        }
        let t = apportion_tenths(&[ratio.numerator], ratio.denominator)[0];
        out.push((k.clone(), *ratio, format_tenths(t)));
    }
    out
}

/// One row per scope and metric; breakdown and taxonomy counts follow.
pub fn reports_to_csv(reports: &[MetricsReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scope_level", "scope_key", "metric", "numerator", "denominator", "percent"])
        .expect("in-memory write");
    for r in reports {
        let level = level_str(r.scope.level);
        let mut row = |metric: &str, ratio: Ratio, pct: String| {
            w.write_record([
                level,
                &r.scope.key,
                metric,
                &ratio.numerator.to_string(),
                &ratio.denominator.to_string(),
                &pct,
            ])
            .expect("in-memory write");
        };
        for (k, ratio, pct) in percent_strings(r) {
            row(&k, ratio, pct);
        }
        if let Some(b) = &r.task1_breakdown {
            let incorrect: u64 = b.counts.values().sum();
            for (kind, n) in &b.counts {
                let ratio = Ratio::new(*n, incorrect);
                let pct = format_tenths(apportion_tenths(&[*n], incorrect)[0]);
                row(&format!("task1:{}", kind.as_str()), ratio, pct);
            }
            let pct = format_tenths(apportion_tenths(&[b.overload_merge.numerator], b.overload_merge.denominator)[0]);
            row("overloadMerge", b.overload_merge, pct);
        }
        let tax_total: u64 = r.taxonomy_histogram.values().sum();
        for (sub, n) in &r.taxonomy_histogram {
            let pct = format_tenths(apportion_tenths(&[*n], tax_total)[0]);
            row(&format!("taxonomy:{sub}"), Ratio::new(*n, tax_total), pct);
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Aligned plain-text table of the model-scope reports.
pub fn summary_table(reports: &[MetricsReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:<16} {:>8} {:>10} {:>8}", "scope", "metric", "count", "of", "%");
    for r in reports.iter().filter(|r| r.scope.level == ScopeLevel::Model) {
        for (k, ratio, pct) in percent_strings(r) {
            let _ = writeln!(
                s,
                "{:<28} {:<16} {:>8} {:>10} {:>8}",
                r.scope.to_string(),
                k,
                ratio.numerator,
                ratio.denominator,
                pct
            );
        }
    }
    s
}

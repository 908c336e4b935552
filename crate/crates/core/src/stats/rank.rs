use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::StatsError;

/// Largest pooled size for which the exact null distribution is used.
pub const EXACT_MAX_POOLED: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(d: f64) -> Self {
        let a = d.abs();
        if a < 0.147 {
            Magnitude::Negligible
        } else if a < 0.33 {
            Magnitude::Small
        } else if a < 0.474 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Magnitude::Negligible => "negligible",
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U for the first sample: pairs with a > b plus half the ties.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

fn check(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Mid-ranks (1-based) of the pooled sample, doubled so they stay integral.
fn doubled_ranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1; doubled mean is i+j+2
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney U test. Exact null distribution (conditional on
/// the observed ties) when `a.len() + b.len() <= 16`, normal approximation
/// with tie and continuity correction otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    check(a, b)?;
    if a.len() + b.len() <= EXACT_MAX_POOLED {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

fn u_doubled(a: &[f64], b: &[f64]) -> (u64, Vec<u64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_ranks(&pooled);
    let n = a.len() as u64;
    let r2: u64 = ranks[..a.len()].iter().sum();
    (r2 - n * (n + 1), ranks, ties)
}

pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    check(a, b)?;
    let (n, m) = (a.len(), b.len());
    let (u2, ranks, _) = u_doubled(a, b);
    // counts[k][s]: subsets of size k whose doubled rank sum is s
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    let mut counts = vec![vec![0f64; width]; n + 1];
    counts[0][0] = 1.0;
    for (seen, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for k in (1..=n.min(seen + 1)).rev() {
            let (lo, hi) = counts.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (r..width).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let offset = (n * (n + 1)) as i64;
    let center = (n * m) as i64;
    let observed = (u2 as i64 - center).abs();
    let mut total = 0.0;
    let mut extreme = 0.0;
    for (s, &c) in counts[n].iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        total += c;
        if (s as i64 - offset - center).abs() >= observed {
            extreme += c;
        }
    }
    Ok(MannWhitney { u: u2 as f64 / 2.0, p_value: (extreme / total).min(1.0), exact: true })
}

pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    check(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (u2, _, ties) = u_doubled(a, b);
    let u = u2 as f64 / 2.0;
    let big_n = n + m;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = n * m / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if var <= 0.0 {
        return Ok(MannWhitney { u, p_value: 1.0, exact: false });
    }
    let dev = ((u - n * m / 2.0).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let std = Normal::standard();
    let p = (2.0 * std.sf(z)).min(1.0);
    Ok(MannWhitney { u, p_value: p, exact: false })
}

/// Cliff's delta via sort and merge; equal to the pairwise definition.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<(f64, Magnitude), StatsError> {
    check(a, b)?;
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    // for each x: below = #y < x, not_above = #y <= x; both pointers only advance
    let (mut below, mut not_above) = (0usize, 0usize);
    let mut dominance: i64 = 0;
    for &x in &xs {
        while below < ys.len() && ys[below] < x {
            below += 1;
        }
        while not_above < ys.len() && ys[not_above] <= x {
            not_above += 1;
        }
        let above = ys.len() - not_above;
        dominance += below as i64 - above as i64;
    }
    let d = dominance as f64 / (a.len() * b.len()) as f64;
    Ok((d, Magnitude::of(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_cliff(a: &[f64], b: &[f64]) -> f64 {
        let mut s: i64 = 0;
        for x in a {
            for y in b {
                s += (x > y) as i64 - (x < y) as i64;
            }
        }
        s as f64 / (a.len() * b.len()) as f64
    }

    /// Enumerates every split of the pooled values into groups of n and m.
    fn brute_mw(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let n = a.len();
        let u_of = |mask: u32| {
            let mut u = 0.0;
            for i in 0..pooled.len() {
                if mask >> i & 1 == 0 {
                    continue;
                }
                for j in 0..pooled.len() {
                    if mask >> j & 1 == 1 {
                        continue;
                    }
                    u += if pooled[i] > pooled[j] { 1.0 } else if pooled[i] == pooled[j] { 0.5 } else { 0.0 };
                }
            }
            u
        };
        let center = (a.len() * b.len()) as f64 / 2.0;
        let obs = (u_of((1u32 << n) - 1) - center).abs();
        let (mut tot, mut ext) = (0u64, 0u64);
        for mask in 0u32..(1 << pooled.len()) {
            if mask.count_ones() as usize != n {
                continue;
            }
            tot += 1;
            if (u_of(mask) - center).abs() >= obs - 1e-12 {
                ext += 1;
            }
        }
        ext as f64 / tot as f64
    }

    #[test]
    fn separated_samples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        let (d, mag) = cliffs_delta(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(d, -1.0);
        assert_eq!(mag, Magnitude::Large);
    }

    #[test]
    fn ties_match_enumeration() {
        let a = [1.0, 1.0, 2.0];
        let b = [1.0, 2.0, 2.0];
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!((r.p_value - brute_mw(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn identical_samples() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert!(r.p_value >= 0.9);
        let (d, mag) = cliffs_delta(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(mag, Magnitude::Negligible);
        assert!(mann_whitney_normal(&[1.0; 10], &[1.0; 10]).unwrap().p_value == 1.0);
    }

    #[test]
    fn thresholds() {
        assert_eq!(Magnitude::of(0.10), Magnitude::Negligible);
        assert_eq!(Magnitude::of(-0.20), Magnitude::Small);
        assert_eq!(Magnitude::of(0.40), Magnitude::Medium);
        assert_eq!(Magnitude::of(0.50), Magnitude::Large);
        assert_eq!(Magnitude::of(0.147), Magnitude::Small);
        assert_eq!(Magnitude::of(0.474), Magnitude::Large);
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(StatsError::EmptyInput));
        assert_eq!(cliffs_delta(&[1.0], &[]), Err(StatsError::EmptyInput));
    }

    #[test]
    fn normal_path_large_samples() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let b: Vec<f64> = (10..30).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(!r.exact);
        assert_eq!(r.u, 50.0);
        assert!(r.p_value < 0.01);
    }

    fn small_vec(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0i32..6).prop_map(f64::from), 1..=max)
    }

    proptest! {
        #[test]
        fn cliff_fast_equals_brute(a in prop::collection::vec((-10i32..10).prop_map(f64::from), 1..=30),
                                   b in prop::collection::vec((-10i32..10).prop_map(f64::from), 1..=30)) {
            let (d, _) = cliffs_delta(&a, &b).unwrap();
            prop_assert_eq!(d, brute_cliff(&a, &b));
            let (e, _) = cliffs_delta(&b, &a).unwrap();
            prop_assert_eq!(d, -e);
            prop_assert!(d.abs() <= 1.0);
        }

        #[test]
        fn exact_equals_enumeration(a in small_vec(6), b in small_vec(6)) {
            let r = mann_whitney_exact(&a, &b).unwrap();
            prop_assert!((r.p_value - brute_mw(&a, &b)).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }

        #[test]
        fn monotone_invariance(a in small_vec(10), b in small_vec(10)) {
            let f = |v: &Vec<f64>| v.iter().map(|x| (x * 0.7).exp() + 3.0).collect::<Vec<_>>();
            let r1 = mann_whitney_u(&a, &b).unwrap();
            let r2 = mann_whitney_u(&f(&a), &f(&b)).unwrap();
            prop_assert_eq!(r1.u, r2.u);
            prop_assert!((r1.p_value - r2.p_value).abs() < 1e-12);
        }
    }
}

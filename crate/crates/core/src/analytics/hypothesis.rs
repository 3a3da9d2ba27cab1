//! Pearson correlation and the two classic rank tests.
//!
//! Rank tests use midranks for ties. Their exact null distributions are
//! built by dynamic programming over doubled ranks (midranks are multiples
//! of 1/2, so doubling keeps everything integral), conditional on the
//! observed tie pattern. Two-sided p-values count every outcome at least as
//! far from the null mean as the observed one.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Pearson,
    MannWhitneyU,
    WilcoxonSignedRank,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::Pearson => "pearson",
            TestMethod::MannWhitneyU => "mann_whitney_u",
            TestMethod::WilcoxonSignedRank => "wilcoxon_signed_rank",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Pearson: r. Rank tests: |z| / sqrt(N).
    pub effect_r: f64,
    /// Sample sizes actually used (one entry for paired tests).
    pub n: Vec<usize>,
    pub method: TestMethod,
    /// p-value from the exact null distribution rather than the normal
    /// approximation.
    pub exact: bool,
}

/// Largest smaller-group size for which the exact Mann-Whitney p is used.
pub const MWU_EXACT_MAX: usize = 8;
/// Largest number of non-zero pairs for which the exact Wilcoxon p is used.
pub const WILCOXON_EXACT_MAX: usize = 25;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn two_sided_normal_p(z: f64) -> f64 {
    (2.0 * (1.0 - standard_normal().cdf(z.abs()))).clamp(0.0, 1.0)
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Pearson's r with a two-sided t-test on `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Validation(format!("pearson needs n >= 3, got {n}")));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("pearson of a constant vector".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(TestResult {
        statistic: r,
        p_value,
        effect_r: r,
        n: vec![n],
        method: TestMethod::Pearson,
        exact: false,
    })
}

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn doubled(ranks: &[f64]) -> Vec<usize> {
    ranks.iter().map(|r| (2.0 * r).round() as usize).collect()
}

/// Counts of `k`-subsets of `weights` by their sum.
fn subset_sum_counts(weights: &[usize], k: usize) -> Vec<f64> {
    let max_sum: usize = {
        let mut w = weights.to_vec();
        w.sort_unstable_by(|a, b| b.cmp(a));
        w.iter().take(k).sum()
    };
    // table[j][s]: subsets of size j with sum s among the weights seen so far.
    let mut table = vec![vec![0.0f64; max_sum + 1]; k + 1];
    table[0][0] = 1.0;
    for &w in weights {
        for j in (1..=k).rev() {
            let (lower, upper) = table.split_at_mut(j);
            let prev = &lower[j - 1];
            let cur = &mut upper[0];
            for s in (w..=max_sum).rev() {
                cur[s] += prev[s - w];
            }
        }
    }
    table.swap_remove(k)
}

/// Mann-Whitney U test. `statistic` is U for sample `a`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("mann-whitney needs two non-empty samples".into()));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;

    let mean_u = (na * nb) as f64 / 2.0;
    let ties = tie_term(&ranks);
    let nf = n as f64;
    let var_u = (na * nb) as f64 / 12.0 * ((nf + 1.0) - ties / (nf * (nf - 1.0)));
    let sd_u = var_u.max(0.0).sqrt();
    let z = if sd_u > 0.0 { (u_a - mean_u) / sd_u } else { 0.0 };

    let exact = na.min(nb) <= MWU_EXACT_MAX;
    let p_value = if exact {
        mwu_exact_p(&ranks, na)
    } else if sd_u > 0.0 {
        let corrected = ((u_a - mean_u).abs() - 0.5).max(0.0);
        two_sided_normal_p(corrected / sd_u)
    } else {
        1.0
    };
    Ok(TestResult {
        statistic: u_a,
        p_value,
        effect_r: z.abs() / nf.sqrt(),
        n: vec![na, nb],
        method: TestMethod::MannWhitneyU,
        exact,
    })
}

/// `sum (t^3 - t)` over tie groups of the ranks.
fn tie_term(ranks: &[f64]) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Permutation p-value of the rank sum of the first `na` entries.
fn mwu_exact_p(ranks: &[f64], na: usize) -> f64 {
    let n = ranks.len();
    let weights = doubled(ranks);
    // Work with the smaller group; the deviation from the null mean is the
    // same for either group.
    let (k, observed): (usize, usize) = if na <= n - na {
        (na, weights[..na].iter().sum())
    } else {
        (n - na, weights[na..].iter().sum())
    };
    let centre = (k * (n + 1)) as i64;
    let obs_dev = (observed as i64 - centre).abs();
    let counts = subset_sum_counts(&weights, k);
    let total: f64 = counts.iter().sum();
    let extreme: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as i64 - centre).abs() >= obs_dev)
        .map(|(_, c)| c)
        .sum();
    (extreme / total).min(1.0)
}

/// Treatment of zero differences in the signed-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    /// Discard zero differences before ranking.
    #[default]
    Drop,
    /// Rank zeros with the rest, then discard their ranks.
    Pratt,
}

pub fn wilcoxon_signed_rank(pre: &[f64], post: &[f64]) -> Result<TestResult> {
    wilcoxon_signed_rank_with(pre, post, ZeroMethod::Drop)
}

/// Wilcoxon signed-rank test on `post - pre`. `statistic` is
/// `min(W+, W-)`.
pub fn wilcoxon_signed_rank_with(pre: &[f64], post: &[f64], zeros: ZeroMethod) -> Result<TestResult> {
    if pre.len() != post.len() {
        return Err(Error::Validation(format!(
            "paired samples differ in length: {} vs {}",
            pre.len(),
            post.len()
        )));
    }
    check_finite(pre, "pre")?;
    check_finite(post, "post")?;
    let diffs: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).collect();
    let ranked: Vec<f64> = match zeros {
        ZeroMethod::Drop => diffs.iter().copied().filter(|d| *d != 0.0).collect(),
        ZeroMethod::Pratt => diffs.clone(),
    };
    let abs_ranks = midranks(&ranked.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let (signed, ranks): (Vec<f64>, Vec<f64>) = ranked
        .iter()
        .zip(&abs_ranks)
        .filter(|(d, _)| **d != 0.0)
        .map(|(d, r)| (*d, *r))
        .unzip();
    let n_used = ranks.len();
    if n_used == 0 {
        return Err(Error::DegenerateInput("all paired differences are zero".into()));
    }

    let w_plus: f64 = signed.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;
    let mean = total / 2.0;
    let sd = (ranks.iter().map(|r| r * r).sum::<f64>() / 4.0).sqrt();
    let z = if sd > 0.0 { (w_plus - mean) / sd } else { 0.0 };

    let exact = n_used <= WILCOXON_EXACT_MAX;
    let p_value = if exact {
        let weights = doubled(&ranks);
        let observed: usize = signed
            .iter()
            .zip(&weights)
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, w)| w)
            .sum();
        signed_rank_exact_p(&weights, observed)
    } else {
        two_sided_normal_p(z)
    };
    Ok(TestResult {
        statistic: w_plus.min(w_minus),
        p_value,
        effect_r: z.abs() / (n_used as f64).sqrt(),
        n: vec![n_used],
        method: TestMethod::WilcoxonSignedRank,
        exact,
    })
}

/// Exact p of the positive-rank sum over all `2^n` sign assignments.
fn signed_rank_exact_p(weights: &[usize], observed: usize) -> f64 {
    let total: usize = weights.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &w in weights {
        for s in (w..=total).rev() {
            counts[s] += counts[s - w];
        }
    }
    // Compare 2 S against the total to stay in integers.
    let obs_dev = (2 * observed as i64 - total as i64).abs();
    let all: f64 = counts.iter().sum();
    let extreme: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| (2 * s as i64 - total as i64).abs() >= obs_dev)
        .map(|(_, c)| c)
        .sum();
    (extreme / all).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(pearson(&x, &x).unwrap().statistic, 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &neg).unwrap().statistic, -1.0);
        let r = pearson(&x, &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert_eq!(r.statistic, 0.8);
        assert_eq!(r.effect_r, 0.8);
        // t = 0.8 sqrt(3 / 0.36) = 2.3094 on 3 df.
        assert_abs_diff_eq!(r.p_value, 0.104088, epsilon = 1e-5);
        assert!(matches!(pearson(&x, &[1.0; 5]), Err(Error::DegenerateInput(_))));
        assert!(pearson(&x[..2], &x[..2]).is_err());
    }

    #[test]
    fn midranks_handle_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn mwu_examples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.exact);
        // Two of the 20 labelings are this extreme.
        assert_abs_diff_eq!(r.p_value, 0.1, epsilon = 1e-15);

        let same = [0.3, 0.5, 0.9, 1.2];
        let r = mann_whitney_u(&same, &same).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.effect_r, 0.0);

        let a = [0.1, 0.4, 0.4, 2.0, 3.5];
        let b = [0.2, 0.4, 1.0];
        let ua = mann_whitney_u(&a, &b).unwrap().statistic;
        let ub = mann_whitney_u(&b, &a).unwrap().statistic;
        assert_eq!(ua + ub, 15.0);
        assert!(mann_whitney_u(&[], &b).is_err());
    }

    #[test]
    fn mwu_normal_approximation_for_large_groups() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..20).map(|i| i as f64 + 10.5).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 0.01);
        assert!(r.effect_r > 0.3 && r.effect_r <= 1.0);
    }

    #[test]
    fn wilcoxon_examples() {
        let pre = [0.1, 0.5, 0.3, 0.9, 0.7];
        let post: Vec<f64> = pre.iter().map(|v| v + 0.25).collect();
        let r = wilcoxon_signed_rank(&pre, &post).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 2.0 / 32.0, epsilon = 1e-15);

        let pre = [0.0; 4];
        let r = wilcoxon_signed_rank(&pre, &[1.0, -1.0, 2.0, -2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);

        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn wilcoxon_drops_zeros_by_default() {
        let pre = [1.0, 2.0, 3.0, 4.0];
        let post = [1.0, 2.5, 3.5, 5.0];
        let dropped = wilcoxon_signed_rank(&pre, &post).unwrap();
        assert_eq!(dropped.n, vec![3]);
        let pratt = wilcoxon_signed_rank_with(&pre, &post, ZeroMethod::Pratt).unwrap();
        assert_eq!(pratt.n, vec![3]);
        assert!(pratt.p_value <= dropped.p_value);
    }

    #[test]
    fn wilcoxon_large_n_uses_normal_approximation() {
        let pre: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let post: Vec<f64> = pre.iter().enumerate().map(|(i, v)| v + if i % 4 == 0 { -0.5 } else { 1.0 + i as f64 * 0.01 }).collect();
        let r = wilcoxon_signed_rank(&pre, &post).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 0.001);
    }
}

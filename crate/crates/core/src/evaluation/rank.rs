use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Exact Mann-Whitney null distributions are enumerated up to this many
/// rank splits.
pub const EXACT_ENUMERATION_LIMIT: f64 = 1e6;
/// Exact signed-rank distributions are used up to this many nonzero pairs.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// The second sample (or the `after` member of each pair) is larger.
    OneSidedGreater,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub alternative: Alternative,
}

/// 1-based ranks with ties sharing their average rank.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end share ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// `sum (t^3 - t)` over groups of tied values.
fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        total += t * t * t - t;
        start = end;
    }
    total
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn upper_normal_tail(z: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sf(z)
}

/// One-sided test that `b` is stochastically greater than `a`; the
/// statistic is `U` of `b`. Exact when at most
/// [`EXACT_ENUMERATION_LIMIT`] rank splits exist.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    mann_whitney_u_with(a, b, None)
}

/// [`mann_whitney_u`] with the method forced (`None` picks automatically).
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: Option<TestMethod>) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Mann-Whitney U needs two nonempty samples"));
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = rank_average(&pooled);
    let rank_sum_b: f64 = ranks[na..].iter().sum();
    let u = rank_sum_b - (nb * (nb + 1)) as f64 / 2.0;
    let method = method.unwrap_or(if binomial(n, nb) <= EXACT_ENUMERATION_LIMIT {
        TestMethod::Exact
    } else {
        TestMethod::NormalApprox
    });
    let p_value = match method {
        TestMethod::Exact => {
            // subset counts of doubled (integer) rank sums
            let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
            let max_sum: usize = doubled.iter().sum();
            let mut ways = vec![vec![0.0f64; max_sum + 1]; nb + 1];
            ways[0][0] = 1.0;
            for (seen, &r) in doubled.iter().enumerate() {
                for j in (0..nb.min(seen + 1)).rev() {
                    let (lo, hi) = ways.split_at_mut(j + 1);
                    for s in (0..=max_sum - r).rev() {
                        let c = lo[j][s];
                        if c != 0.0 {
                            hi[0][s + r] += c;
                        }
                    }
                }
            }
            let observed = (2.0 * rank_sum_b).round() as usize;
            let tail: f64 = ways[nb][observed..].iter().sum();
            tail / binomial(n, nb)
        }
        TestMethod::NormalApprox => {
            let nn = n as f64;
            let mean = (na * nb) as f64 / 2.0;
            let var =
                (na * nb) as f64 / 12.0 * ((nn + 1.0) - tie_term(&pooled) / (nn * (nn - 1.0)));
            if var <= 0.0 {
                1.0
            } else {
                upper_normal_tail((u - mean - 0.5) / var.sqrt())
            }
        }
    };
    Ok(TestResult {
        statistic: u,
        p_value: p_value.clamp(0.0, 1.0),
        method,
        alternative: Alternative::OneSidedGreater,
    })
}

/// One-sided signed-rank test that `after` exceeds `before`; the statistic
/// is the positive-difference rank sum `W+`. Zero differences are dropped.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<TestResult> {
    wilcoxon_signed_rank_with(pairs, None)
}

pub fn wilcoxon_signed_rank_with(
    pairs: &[(f64, f64)],
    method: Option<TestMethod>,
) -> Result<TestResult> {
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|(b, a)| a - b)
        .filter(|&d| d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::Data(
            "Wilcoxon signed-rank test: all differences are zero".into(),
        ));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = rank_average(&abs);
    let w: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, &d)| d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let method = method.unwrap_or(if n <= WILCOXON_EXACT_MAX_N {
        TestMethod::Exact
    } else {
        TestMethod::NormalApprox
    });
    let p_value = match method {
        TestMethod::Exact => {
            let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
            let max_sum: usize = doubled.iter().sum();
            let mut ways = vec![0.0f64; max_sum + 1];
            ways[0] = 1.0;
            for &r in &doubled {
                for s in (r..=max_sum).rev() {
                    ways[s] += ways[s - r];
                }
            }
            let observed = (2.0 * w).round() as usize;
            let tail: f64 = ways[observed..].iter().sum();
            tail / 2f64.powi(n as i32)
        }
        TestMethod::NormalApprox => {
            let nn = n as f64;
            let mean = nn * (nn + 1.0) / 4.0;
            let var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term(&abs) / 48.0;
            if var <= 0.0 {
                1.0
            } else {
                upper_normal_tail((w - mean - 0.5) / var.sqrt())
            }
        }
    };
    Ok(TestResult {
        statistic: w,
        p_value: p_value.clamp(0.0, 1.0),
        method,
        alternative: Alternative::OneSidedGreater,
    })
}

/// Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid(format!(
            "Spearman correlation needs two samples of equal length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let rx = rank_average(x);
    let ry = rank_average(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numerical(
            "Spearman correlation undefined: constant ranks".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

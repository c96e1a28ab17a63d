//! Wilcoxon signed-rank test on paired residuals, t-based confidence
//! intervals and box-plot summaries.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("every paired difference is zero")]
    AllZeroDifferences,
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
}

/// Largest number of non-zero differences handled by the exact null
/// distribution; above it the normal approximation is used.
pub const EXACT_MAX_M: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W+, W−)
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Two-sided.
    pub p_value: f64,
    /// Number of non-zero differences.
    pub m: usize,
    pub method: PMethod,
}

/// Average ranks of `values` (1-based), plus the tie-group sizes.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share rank ((i+1) + (j+1)) / 2
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of sign assignments whose doubled positive-rank sum is at most
/// `limit2`. Ranks are passed doubled so average ranks stay integral.
fn exact_count_at_most(ranks2: &[u64], limit2: u64) -> u64 {
    let total: u64 = ranks2.iter().sum();
    let mut ways = vec![0u64; total as usize + 1];
    ways[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if ways[s] != 0 {
                ways[s + r] += ways[s];
            }
        }
        reach += r;
    }
    ways[..=(limit2.min(total) as usize)].iter().sum()
}

fn normal_p(m: usize, statistic: f64, ties: &[usize]) -> f64 {
    let mf = m as f64;
    let mean = mf * (mf + 1.0) / 4.0;
    let tie_adj: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie_adj;
    if var <= 0.0 {
        return 1.0;
    }
    // statistic <= mean, so the continuity correction moves it up.
    let z = ((statistic - mean + 0.5) / var.sqrt()).min(0.0);
    // two-sided: 2·Φ(z) = erfc(−z/√2)
    erfc(-z / std::f64::consts::SQRT_2).min(1.0)
}

struct SignedRanks {
    ranks: Vec<f64>,
    positive: Vec<bool>,
    ties: Vec<usize>,
}

fn signed_ranks(a: &[f64], b: &[f64]) -> Result<SignedRanks, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::Empty);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    Ok(SignedRanks { ranks, positive: diffs.iter().map(|d| *d > 0.0).collect(), ties })
}

fn test_with(sr: &SignedRanks, method: PMethod) -> WilcoxonResult {
    let m = sr.ranks.len();
    let w_plus: f64 = sr.ranks.iter().zip(&sr.positive).filter(|(_, p)| **p).map(|(r, _)| r).sum();
    let w_minus: f64 = sr.ranks.iter().zip(&sr.positive).filter(|(_, p)| !**p).map(|(r, _)| r).sum();
    let statistic = w_plus.min(w_minus);
    let p_value = match method {
        PMethod::Exact => {
            let ranks2: Vec<u64> = sr.ranks.iter().map(|r| (2.0 * r) as u64).collect();
            let count = exact_count_at_most(&ranks2, (2.0 * statistic) as u64);
            exact_p_from_count(count, m)
        }
        PMethod::Normal => normal_p(m, statistic, &sr.ties),
    };
    WilcoxonResult { statistic, w_plus, w_minus, p_value, m, method }
}

/// Two-sided p from the number of the 2^m sign assignments with a
/// positive-rank sum at most the observed statistic.
pub fn exact_p_from_count(count: u64, m: usize) -> f64 {
    (2.0 * count as f64 / (1u64 << m) as f64).min(1.0)
}

/// Two-sided Wilcoxon signed-rank test of `a − b`.
///
/// Zero differences are dropped, tied magnitudes share their average rank.
/// With at most [`EXACT_MAX_M`] non-zero differences the p-value comes from
/// the exact null distribution of the signed-rank sum; above that a normal
/// approximation with tie-corrected variance and a 0.5 continuity
/// correction is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, StatsError> {
    let sr = signed_ranks(a, b)?;
    let method = if sr.ranks.len() <= EXACT_MAX_M { PMethod::Exact } else { PMethod::Normal };
    Ok(test_with(&sr, method))
}

/// Same test with the p-value method forced.
pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: PMethod) -> Result<WilcoxonResult, StatsError> {
    let sr = signed_ranks(a, b)?;
    if method == PMethod::Exact && sr.ranks.len() > 62 {
        return Ok(test_with(&sr, PMethod::Normal));
    }
    Ok(test_with(&sr, method))
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Quantile of Student's t for `p` in (0.5, 1), by bisection on the CDF
/// until the bracket is narrower than 1e-12 (relative).
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    debug_assert!(p > 0.5 && p < 1.0 && df > 0.0);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub mean: f64,
    /// Half-width of the 95% t confidence interval of the mean.
    pub half_width: f64,
    pub n: usize,
}

pub fn interval_summary(values: &[f64]) -> Result<IntervalSummary, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFewValues(n));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = student_t_quantile(0.975, (n - 1) as f64);
    Ok(IntervalSummary { mean, half_width: t * var.sqrt() / (n as f64).sqrt(), n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position (n − 1)·q.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(BoxplotStats {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

//! Two-sample hypothesis testing on event-count distributions.
//!
//! The test is Welch's unequal-variance t-test with Welch–Satterthwaite
//! degrees of freedom and a two-tailed p-value from the Student t
//! distribution. Two samples that are both constant get a fixed verdict:
//! equal constants are indistinguishable (`t = 0`, `p = 1`), different
//! constants are maximally distinguishable (`t = ±inf`, `p = 0`).

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significance level matching a 95% confidence interval.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance; zero for a single observation.
    pub variance: f64,
    /// Exact sum of the counts, when known. Lets the difference of two
    /// large, close means be taken without cancellation.
    #[serde(skip)]
    sum: Option<u128>,
}

/// Compares the reported statistics only; the exact sum is a precision aid.
impl PartialEq for SummaryStats {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.mean == other.mean && self.variance == other.variance
    }
}

impl SummaryStats {
    pub fn new(n: usize, mean: f64, variance: f64) -> Self {
        Self {
            n,
            mean,
            variance,
            sum: None,
        }
    }

    /// A single observation carries no spread information.
    pub fn is_degenerate(&self) -> bool {
        self.n < 2
    }

    fn standard_error_sq(&self) -> f64 {
        self.variance / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Absent when `t` is infinite (both samples constant).
    pub df: Option<f64>,
    pub p: f64,
    pub alpha: f64,
    pub reject: bool,
}

impl TTestResult {
    /// Builds a result from externally reported `t` and `p` values.
    pub fn from_reported(t: f64, df: Option<f64>, p: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
        }
        Ok(Self {
            t,
            df,
            p,
            alpha,
            reject: p < alpha,
        })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

pub fn summarize(counts: &[u64]) -> Result<SummaryStats> {
    if counts.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = counts.len();
    let sum: u128 = counts.iter().map(|&c| c as u128).sum();
    let mean = sum as f64 / n as f64;
    let variance = if n < 2 {
        0.0
    } else {
        let ss: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - mean;
                d * d
            })
            .sum();
        ss / (n - 1) as f64
    };
    Ok(SummaryStats {
        n,
        mean,
        variance,
        sum: Some(sum),
    })
}

/// Welch t-statistic and Welch–Satterthwaite degrees of freedom.
pub fn welch_t(a: &SummaryStats, b: &SummaryStats) -> Result<(f64, f64)> {
    if a.n < 2 || b.n < 2 {
        return Err(Error::InsufficientSamples(format!(
            "Welch t-test needs at least 2 observations per sample, got {} and {}",
            a.n, b.n
        )));
    }
    if a.variance == 0.0 && b.variance == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let va = a.standard_error_sq();
    let vb = b.standard_error_sq();
    let se2 = va + vb;
    let t = mean_difference(a, b) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    Ok((t, df))
}

/// `a.mean - b.mean`, computed as `(sum_a * n_b - sum_b * n_a) / (n_a * n_b)`
/// in integers when both sums are known.
fn mean_difference(a: &SummaryStats, b: &SummaryStats) -> f64 {
    let exact = (|| {
        let (sa, sb) = (a.sum?, b.sum?);
        let lhs = sa.checked_mul(b.n as u128)?;
        let rhs = sb.checked_mul(a.n as u128)?;
        let denom = a.n as f64 * b.n as f64;
        Some(if lhs >= rhs {
            (lhs - rhs) as f64 / denom
        } else {
            -((rhs - lhs) as f64 / denom)
        })
    })();
    exact.unwrap_or(a.mean - b.mean)
}

/// Two-tailed p-value of a Student t statistic with `df` degrees of freedom.
pub fn p_two_tailed(t: f64, df: f64) -> f64 {
    debug_assert!(df > 0.0);
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    let t2 = t * t;
    // x = df / (df + t^2), y = 1 - x computed without cancellation
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    special::regularized_incomplete_beta(df / 2.0, 0.5, x, y)
}

/// Welch's two-sample t-test on raw counts, rejecting when `p < alpha`.
pub fn t_test(a_counts: &[u64], b_counts: &[u64], alpha: f64) -> Result<TTestResult> {
    check_alpha(alpha)?;
    if a_counts.len() < 2 || b_counts.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "t-test needs at least 2 observations per sample, got {} and {}",
            a_counts.len(),
            b_counts.len()
        )));
    }
    let a = summarize(a_counts)?;
    let b = summarize(b_counts)?;
    t_test_from_summaries(&a, &b, alpha)
}

pub fn t_test_from_summaries(a: &SummaryStats, b: &SummaryStats, alpha: f64) -> Result<TTestResult> {
    check_alpha(alpha)?;
    match welch_t(a, b) {
        Ok((t, df)) => {
            let p = p_two_tailed(t, df);
            Ok(TTestResult {
                t,
                df: Some(df),
                p,
                alpha,
                reject: p < alpha,
            })
        }
        Err(Error::DegenerateVariance) if mean_difference(a, b) == 0.0 => Ok(TTestResult {
            t: 0.0,
            df: None,
            p: 1.0,
            alpha,
            reject: false,
        }),
        Err(Error::DegenerateVariance) => Ok(TTestResult {
            t: if mean_difference(a, b) > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            df: None,
            p: 0.0,
            alpha,
            reject: true,
        }),
        Err(e) => Err(e),
    }
}

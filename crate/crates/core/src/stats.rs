//! Paired comparison of two samples: Wilcoxon signed-rank test and the
//! Vargha-Delaney A12 effect size.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest number of non-zero differences handled by exact enumeration.
pub const EXACT_MAX_N: usize = 20;
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// The first sample tends to be smaller.
    Less,
    /// The first sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact up to [`EXACT_MAX_N`] pairs, normal approximation above.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Average ranks (1-based) of `|d|`, ties sharing the mean of their positions.
fn signed_ranks(d: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k;
        while e + 1 < idx.len() && d[idx[e + 1]].abs() == d[idx[k]].abs() {
            e += 1;
        }
        let r = (k + e) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=e] {
            ranks[i] = r;
        }
        k = e + 1;
    }
    ranks
}

/// Null distribution of twice the positive rank sum: `counts[s]` sign
/// assignments give doubled sum `s`.
fn doubled_sum_counts(ranks: &[f64]) -> Vec<f64> {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p(ranks: &[f64], w_plus: f64, alt: Alternative) -> f64 {
    let counts = doubled_sum_counts(ranks);
    let total_assignments = 2f64.powi(ranks.len() as i32);
    let cdf = |w: f64| -> f64 {
        let lim = (2.0 * w).round() as usize;
        counts.iter().take(lim + 1).sum::<f64>() / total_assignments
    };
    let w_minus = ranks.iter().sum::<f64>() - w_plus;
    let p = match alt {
        Alternative::TwoSided => 2.0 * cdf(w_plus.min(w_minus)),
        Alternative::Less => cdf(w_plus),
        // P(T >= w_plus) equals P(T <= w_minus) by symmetry
        Alternative::Greater => cdf(w_minus),
    };
    p.min(1.0)
}

fn normal_p(ranks: &[f64], w_plus: f64, alt: Alternative) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut k = 0;
    while k < sorted.len() {
        let mut e = k;
        while e + 1 < sorted.len() && sorted[e + 1] == sorted[k] {
            e += 1;
        }
        let t = (e - k + 1) as f64;
        tie_term += t * t * t - t;
        k = e + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    let upper = |z: f64| 1.0 - std_normal.cdf(z);
    let p = match alt {
        Alternative::TwoSided => {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
            2.0 * upper(z)
        }
        Alternative::Less => std_normal.cdf((w_plus - mean + 0.5) / sd),
        Alternative::Greater => upper((w_plus - mean - 0.5) / sd),
    };
    p.clamp(0.0, 1.0)
}

/// Two-sided Wilcoxon signed-rank test on the paired differences `a - b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    wilcoxon_with(a, b, Alternative::TwoSided, Method::Auto)
}

pub fn wilcoxon_with(a: &[f64], b: &[f64], alt: Alternative, method: Method) -> Result<Wilcoxon> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&x| x != 0.0).collect();
    if d.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    if d.len() < MIN_PAIRS {
        return Err(Error::TooFewPairs(d.len()));
    }
    let ranks = signed_ranks(&d);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x < 0.0).map(|(_, r)| r).sum();
    let exact = match method {
        Method::Auto => d.len() <= EXACT_MAX_N,
        Method::Exact => true,
        Method::Normal => false,
    };
    let p_value = if exact {
        exact_p(&ranks, w_plus, alt)
    } else {
        normal_p(&ranks, w_plus, alt)
    };
    Ok(Wilcoxon {
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value,
        n: d.len(),
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(a12: f64) -> Self {
        let d = (a12 - 0.5).abs();
        if d < 0.06 {
            Magnitude::Negligible
        } else if d < 0.14 {
            Magnitude::Small
        } else if d < 0.21 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }
}

/// Probability that a value drawn from `a` exceeds one drawn from `b`, ties
/// counting half.
///
/// # Panics
///
/// Panics if either sample is empty.
pub fn vargha_delaney_a12(a: &[f64], b: &[f64]) -> (f64, Magnitude) {
    assert!(!a.is_empty() && !b.is_empty(), "A12 needs two non-empty samples");
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    // twice the number of wins, ties counting one
    let mut score: u64 = 0;
    for &x in a {
        let below = sorted.partition_point(|&y| y < x);
        let not_above = sorted.partition_point(|&y| y <= x);
        score += 2 * below as u64 + (not_above - below) as u64;
    }
    let v = a12_from_score(score, 2 * a.len() as u64 * b.len() as u64);
    (v, Magnitude::of(v))
}

/// Computes `score / denom`, taking the complement for the upper half so that
/// swapping the samples gives values summing to exactly 1.
pub(crate) fn a12_from_score(score: u64, denom: u64) -> f64 {
    if 2 * score <= denom {
        score as f64 / denom as f64
    } else {
        1.0 - (denom - score) as f64 / denom as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    /// Wilcoxon statistic, 0 when the test is undefined.
    pub statistic: f64,
    /// 1 when the test is undefined (all or nearly all pairs tied).
    pub p_value: f64,
    pub a12: f64,
    pub magnitude: Magnitude,
    pub alternative: Alternative,
    pub nonzero_pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Compares paired samples; tests a two-sided or one-sided alternative.
pub fn compare(a: &[f64], b: &[f64], alternative: Alternative) -> ComparisonResult {
    let (a12, magnitude) = vargha_delaney_a12(a, b);
    match wilcoxon_with(a, b, alternative, Method::Auto) {
        Ok(w) => ComparisonResult {
            statistic: w.statistic,
            p_value: w.p_value,
            a12,
            magnitude,
            alternative,
            nonzero_pairs: w.n,
            note: None,
        },
        Err(e) => ComparisonResult {
            statistic: 0.0,
            p_value: 1.0,
            a12,
            magnitude,
            alternative,
            nonzero_pairs: a.iter().zip(b).filter(|(x, y)| x != y).count(),
            note: Some(e.to_string()),
        },
    }
}

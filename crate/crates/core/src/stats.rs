//! Rank-based comparison of several classifiers over several datasets:
//! Friedman χ², the Iman-Davenport F statistic and Holm's step-down
//! post-hoc procedure against a control classifier.
//!
//! The distribution functions are implemented here on top of the
//! regularized incomplete gamma and beta functions.

use serde::{Deserialize, Serialize};

use crate::error::{GfmmError, Result};

/// Per-dataset ranks of k classifiers over N datasets (rank 1 is best).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl RankMatrix {
    /// Wrap precomputed rank rows. Each row must sum to `k(k+1)/2`.
    pub fn from_ranks(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = names.len();
        check_shape(k, &rows)?;
        let expected = (k * (k + 1)) as f64 / 2.0;
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|r| !(1.0..=k as f64).contains(r)) {
                return Err(GfmmError::InvalidParameter(format!("row {}: ranks must lie in 1..={k}", i + 1)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - expected).abs() > 1e-6 {
                return Err(GfmmError::InvalidParameter(format!(
                    "row {}: ranks sum to {sum}, expected {expected}",
                    i + 1
                )));
            }
        }
        Ok(Self { names, rows })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Number of datasets.
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Number of classifiers.
    pub fn k(&self) -> usize {
        self.names.len()
    }

    /// Column means, optionally rounded to `decimals` places (half away from zero).
    pub fn average_ranks(&self, decimals: Option<u32>) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.k())
            .map(|j| {
                let mean = self.rows.iter().map(|r| r[j]).sum::<f64>() / n;
                match decimals {
                    Some(d) => round_to(mean, d),
                    None => mean,
                }
            })
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn check_shape(k: usize, rows: &[Vec<f64>]) -> Result<()> {
    if k < 2 {
        return Err(GfmmError::InvalidParameter("need at least two classifiers".into()));
    }
    if rows.len() < 2 {
        return Err(GfmmError::InvalidParameter("need at least two datasets".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != k {
            return Err(GfmmError::DimensionMismatch { expected: k, found: row.len() });
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(GfmmError::InvalidParameter(format!("row {}: missing value", i + 1)));
        }
    }
    Ok(())
}

fn round_to(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round() / scale
}

/// Ascending ranks with midranks for ties.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Rank each row of an error table; the lowest error gets rank 1.
pub fn rank_rows(names: Vec<String>, errors: &[Vec<f64>]) -> Result<RankMatrix> {
    check_shape(names.len(), errors)?;
    let rows = errors.iter().map(|r| midranks(r)).collect();
    Ok(RankMatrix { names, rows })
}

/// Friedman and Iman-Davenport statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n: usize,
    pub k: usize,
    pub average_ranks: Vec<f64>,
    pub chi2_f: f64,
    pub chi2_df: usize,
    pub chi2_p: f64,
    pub f_f: f64,
    pub f_df: (usize, usize),
    pub f_p: f64,
    pub alpha: f64,
    pub f_critical: f64,
    /// Whether the null hypothesis of equal average ranks is rejected at `alpha`.
    pub reject: bool,
}

/// Friedman test on a rank matrix.
///
/// `rank_decimals` rounds the average ranks before the statistic is formed,
/// which reproduces results computed from tables printed to that precision.
pub fn friedman(ranks: &RankMatrix, alpha: f64, rank_decimals: Option<u32>) -> Result<TestResult> {
    check_alpha(alpha)?;
    let (n, k) = (ranks.n(), ranks.k());
    let avg = ranks.average_ranks(rank_decimals);
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = avg.iter().map(|r| r * r).sum();
    let chi2 = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let d1 = k - 1;
    let d2 = (k - 1) * (n - 1);
    let denom = nf * (kf - 1.0) - chi2;
    let f_f = if denom <= 0.0 {
        f64::INFINITY
    } else {
        (nf - 1.0) * chi2 / denom
    };
    let f_p = f_dist_sf(f_f, d1 as f64, d2 as f64)?;
    let f_critical = f_critical_value(alpha, d1 as f64, d2 as f64)?;
    Ok(TestResult {
        n,
        k,
        average_ranks: avg,
        chi2_f: chi2,
        chi2_df: d1,
        chi2_p: chi2_sf(chi2, d1 as f64)?,
        f_f,
        f_df: (d1, d2),
        f_p,
        alpha,
        f_critical,
        reject: f_f > f_critical,
    })
}

/// One row of a Holm table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmRow {
    pub step: usize,
    pub comparator: String,
    pub z: f64,
    pub p: f64,
    pub threshold: f64,
    pub reject: bool,
}

/// Holm step-down comparison of `control` against every other classifier.
///
/// Rows come back sorted by ascending p-value.
pub fn holm(ranks: &RankMatrix, control: usize, alpha: f64, rank_decimals: Option<u32>) -> Result<Vec<HolmRow>> {
    check_alpha(alpha)?;
    let k = ranks.k();
    if control >= k {
        return Err(GfmmError::InvalidParameter(format!(
            "control index {control} out of range for {k} classifiers"
        )));
    }
    let avg = ranks.average_ranks(rank_decimals);
    let se = ((k * (k + 1)) as f64 / (6.0 * ranks.n() as f64)).sqrt();
    let mut rows: Vec<HolmRow> = (0..k)
        .filter(|&j| j != control)
        .map(|j| {
            let z = (avg[control] - avg[j]) / se;
            HolmRow {
                step: 0,
                comparator: ranks.names()[j].clone(),
                z,
                p: two_sided_p(z),
                threshold: 0.0,
                reject: false,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.p.total_cmp(&b.p));
    let mut still_rejecting = true;
    for (i, row) in rows.iter_mut().enumerate() {
        row.step = i + 1;
        row.threshold = alpha / (k - row.step) as f64;
        still_rejecting &= row.p <= row.threshold;
        row.reject = still_rejecting;
    }
    Ok(rows)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(GfmmError::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Spearman rank correlation (midranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(GfmmError::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 2 || x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(GfmmError::InvalidParameter("spearman needs at least two finite pairs".into()));
    }
    let (rx, ry) = (midranks(x), midranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GfmmError::InvalidParameter("spearman undefined for a constant sequence".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

// ---- distributions ----

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let tail = 0.5 * gamma_q(0.5, 0.5 * x * x);
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// `2 (1 - Φ(|z|))`, computed without cancellation.
pub fn two_sided_p(z: f64) -> f64 {
    gamma_q(0.5, 0.5 * z * z)
}

/// Survival function of the chi-squared distribution with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0 && df.is_finite()) || x.is_nan() {
        return Err(GfmmError::InvalidParameter(format!("invalid chi2 arguments x={x}, df={df}")));
    }
    Ok(if x <= 0.0 { 1.0 } else { gamma_q(0.5 * df, 0.5 * x) })
}

/// Survival function `P(F > x)` of the F distribution.
pub fn f_dist_sf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    if !(d1 >= 1.0 && d2 >= 1.0 && d1.is_finite() && d2.is_finite()) {
        return Err(GfmmError::InvalidParameter(format!(
            "F degrees of freedom must be >= 1, got ({d1}, {d2})"
        )));
    }
    if x.is_nan() {
        return Err(GfmmError::InvalidParameter("F statistic is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(beta_reg(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * x)))
}

/// Upper `alpha` quantile of F(d1, d2), by bisection on the survival function.
pub fn f_critical_value(alpha: f64, d1: f64, d2: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut hi = 1.0;
    while f_dist_sf(hi, d1, d2)? > alpha {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_dist_sf(mid, d1, d2)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x)`.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = sum;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

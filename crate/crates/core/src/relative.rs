//! Relative precision `P̂_R = P̂_C1 / P̂_C2` and its log-scale interval.
//!
//! The per-subject variance `σ̂²_P` is evaluated on cell *proportions*
//! `n_i / N`, so `σ̂²_P / N` is the delta-method variance of `log P̂_R`
//! with `N` the paired-table total.

use serde::{Deserialize, Serialize};

use crate::data::PairedTable;
use crate::error::{Error, Result};
use crate::special::{normal_quantile, normal_sf};
use crate::test_result::{Method, TestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePrecisionResult {
    pub rp: f64,
    pub sigma2: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    pub n: f64,
    pub xi: f64,
    /// True when the interval excludes `xi`.
    pub reject: bool,
}

fn precisions(pt: &PairedTable) -> Result<(f64, f64)> {
    let p1 = pt.precision1().ok_or_else(|| Error::UndefinedPrecision {
        classifier: pt.classifier1.clone(),
        class: pt.class_label.clone(),
    })?;
    let p2 = pt.precision2().ok_or_else(|| Error::UndefinedPrecision {
        classifier: pt.classifier2.clone(),
        class: pt.class_label.clone(),
    })?;
    Ok((p1, p2))
}

pub fn relative_precision(pt: &PairedTable) -> Result<f64> {
    let (p1, p2) = precisions(pt)?;
    if p2 == 0.0 {
        return Err(Error::Degenerate(format!(
            "precision of {:?} is zero on class {:?}; relative precision undefined",
            pt.classifier2, pt.class_label
        )));
    }
    Ok(p1 / p2)
}

/// Per-subject variance of `log P̂_R`.
pub fn rp_sigma2(pt: &PairedTable) -> Result<f64> {
    let (p1, p2) = precisions(pt)?;
    let total = pt.total() as f64;
    let [_, _, n3, _, n5, n6, n7, _] = pt.cells().map(|c| c as f64 / total);
    if n5 + n6 <= 0.0 || n5 + n7 <= 0.0 {
        return Err(Error::Degenerate(format!(
            "no true positives for one classifier on class {:?}",
            pt.class_label
        )));
    }
    let terms = [
        ("n6(1-P2)", n6 * (1.0 - p2)),
        ("n5(P2-P1)", n5 * (p2 - p1)),
        ("2(n7+n3)P1P2", 2.0 * (n7 + n3) * p1 * p2),
        ("n7(1-3P1)", n7 * (1.0 - 3.0 * p1)),
    ];
    let sigma2 = terms.iter().map(|(_, t)| t).sum::<f64>() / ((n5 + n7) * (n5 + n6));
    // the braces are a sum of squares in exact arithmetic; only rounding
    // can push them below zero
    if sigma2 < -1e-12 {
        let (name, value) = terms
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("four terms");
        return Err(Error::Degenerate(format!(
            "negative log-RP variance {sigma2:e} on class {:?} (term {name} = {value:e})",
            pt.class_label
        )));
    }
    Ok(sigma2.max(0.0))
}

/// Interval for `P̂_R` at level `1 − alpha`, with decision against `xi`.
/// `n` is the observation count scaling the variance, normally
/// `pt.total()`.
pub fn rp_interval(pt: &PairedTable, alpha: f64, n: f64, xi: f64) -> Result<RelativePrecisionResult> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0,1), got {alpha}")));
    }
    if n.is_nan() || n <= 0.0 {
        return Err(Error::InvalidArgument(format!("N must be positive, got {n}")));
    }
    let rp = relative_precision(pt)?;
    if rp <= 0.0 {
        return Err(Error::Degenerate(format!(
            "relative precision is zero on class {:?}",
            pt.class_label
        )));
    }
    let sigma2 = rp_sigma2(pt)?;
    let half = normal_quantile(1.0 - alpha / 2.0) * (sigma2 / n).sqrt();
    let ci_low = (rp.ln() - half).exp();
    let ci_high = (rp.ln() + half).exp();
    Ok(RelativePrecisionResult {
        rp,
        sigma2,
        ci_low,
        ci_high,
        alpha,
        n,
        xi,
        reject: ci_low > xi || ci_high < xi,
    })
}

/// Two-sided test of `P̂_R = xi` on the log scale. The statistic is `z²`.
pub fn rp_test(pt: &PairedTable, xi: f64, alpha: f64) -> Result<TestResult> {
    if xi.is_nan() || xi <= 0.0 {
        return Err(Error::InvalidArgument(format!("xi must be positive, got {xi}")));
    }
    let n = pt.total() as f64;
    let interval = rp_interval(pt, alpha, n, xi)?;
    let n_used = pt.total();
    let shift = interval.rp.ln() - xi.ln();
    if shift == 0.0 {
        return Ok(TestResult::chi_square(0.0, 1.0, Method::Rp, n_used));
    }
    let se = (interval.sigma2 / n).sqrt();
    if se == 0.0 {
        return Err(Error::Degenerate(format!(
            "zero log-RP variance with RP {} on class {:?}",
            interval.rp, pt.class_label
        )));
    }
    let z = shift / se;
    let mut r = TestResult::chi_square(z * z, 1.0, Method::Rp, n_used);
    // normal tail directly: identical in value, keeps precision for large |z|
    r.p_value = (2.0 * normal_sf(z.abs())).min(1.0);
    Ok(r)
}

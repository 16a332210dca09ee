//! Monte-Carlo comparison of the pooled two-proportion Z-test with the
//! generalized score test on correlated precision estimates.
//!
//! Paired data are generated per observation. A Gaussian copula with latent
//! correlation `rho` decides whether each classifier predicts the class,
//! both at marginal rate `positive_rate`; `rho` therefore sets how often the
//! two classifiers predict positive on the same observation, which is what
//! correlates their precision estimates. Truth is then drawn with a
//! probability that depends on the overlap cell:
//!
//! * both predict positive: `q_b = (p1 + p2) / 2`
//! * only classifier `k`: `q_k = q_b + (r / P10) (p_k − q_b)`
//!
//! with `P11` the bivariate-normal orthant probability and `P10 = r − P11`.
//! Then `E[correct | C_k predicts] = p_k` exactly.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{gs_statistic, Correction};
use crate::data::PairedTable;
use crate::error::{Error, Result};
use crate::resample::replicate_rng;
use crate::special::{bvn_upper, normal_quantile, normal_sf};
use crate::test_result::{Method, TestResult};

pub const DEFAULT_POSITIVE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Marginal success probabilities; target precisions in the paired
    /// simulation.
    pub p1: f64,
    pub p2: f64,
    pub rho: f64,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Predicted-positive rate of each classifier in the paired simulation.
    pub positive_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 1000,
            p1: 0.7,
            p2: 0.7,
            rho: 0.0,
            replications: 2000,
            alpha: 0.05,
            seed: 1,
            positive_rate: DEFAULT_POSITIVE_RATE,
        }
    }
}

fn open_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        open_unit("p1", self.p1)?;
        open_unit("p2", self.p2)?;
        open_unit("alpha", self.alpha)?;
        open_unit("positive rate", self.positive_rate)?;
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        if self.n == 0 || self.replications == 0 {
            return Err(Error::InvalidArgument("n and replications must be at least 1".into()));
        }
        Ok(())
    }
}

fn latent_pair(rng: &mut impl Rng, rho: f64) -> (f64, f64) {
    let z1: f64 = StandardNormal.sample(rng);
    let e: f64 = StandardNormal.sample(rng);
    (z1, rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * e)
}

/// `n` pairs of binaries with margins `p1`, `p2` from a Gaussian copula,
/// drawn from the stream of `replicate`.
pub fn gen_correlated_binary(cfg: &SimConfig, replicate: u64) -> Result<Vec<(bool, bool)>> {
    cfg.validate()?;
    let h1 = normal_quantile(1.0 - cfg.p1);
    let h2 = normal_quantile(1.0 - cfg.p2);
    let mut rng = replicate_rng(cfg.seed, replicate);
    Ok((0..cfg.n)
        .map(|_| {
            let (z1, z2) = latent_pair(&mut rng, cfg.rho);
            (z1 > h1, z2 > h2)
        })
        .collect())
}

/// Pooled two-proportion Z-test, two-sided. The statistic is `z²`.
pub fn two_proportion_z_test(successes1: u64, n1: u64, successes2: u64, n2: u64) -> Result<TestResult> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("both sample sizes must be positive".into()));
    }
    if successes1 > n1 || successes2 > n2 {
        return Err(Error::InvalidArgument("successes cannot exceed trials".into()));
    }
    let n_used = n1 + n2;
    let (a, b) = (n1 as f64, n2 as f64);
    let pooled = (successes1 + successes2) as f64 / (a + b);
    if pooled == 0.0 || pooled == 1.0 {
        return Ok(TestResult::chi_square(0.0, 1.0, Method::ZTest, n_used)
            .with_note("pooled proportion is 0 or 1; z-test degenerate, p set to 1"));
    }
    let diff = successes1 as f64 / a - successes2 as f64 / b;
    let z = diff / (pooled * (1.0 - pooled) * (1.0 / a + 1.0 / b)).sqrt();
    let mut r = TestResult::chi_square(z * z, 1.0, Method::ZTest, n_used);
    r.p_value = (2.0 * normal_sf(z.abs())).min(1.0);
    Ok(r)
}

/// Truth probabilities per overlap cell: `(q_both, q_only1, q_only2)`.
fn truth_rates(p1: f64, p2: f64, r: f64, rho: f64) -> Result<(f64, f64, f64)> {
    let qb = 0.5 * (p1 + p2);
    if p1 == p2 {
        return Ok((qb, qb, qb));
    }
    let h = normal_quantile(1.0 - r);
    let p11 = bvn_upper(h, h, rho);
    let p10 = r - p11;
    if p10 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rho {rho} leaves no single-classifier positives; unequal precisions are impossible"
        )));
    }
    let q1 = qb + (r / p10) * (p1 - qb);
    let q2 = qb + (r / p10) * (p2 - qb);
    if !(0.0..=1.0).contains(&q1) || !(0.0..=1.0).contains(&q2) {
        return Err(Error::InvalidArgument(format!(
            "precisions {p1} and {p2} are too far apart for rho {rho} at positive rate {r}"
        )));
    }
    Ok((qb, q1, q2))
}

/// One observation of the paired simulation: prediction flags plus the
/// uniform that decides truth. Kept separate so a grid of precision gaps
/// can share the same draws.
#[derive(Debug, Clone, Copy)]
struct Draw {
    c1: bool,
    c2: bool,
    u: f64,
}

fn draws(cfg: &SimConfig, replicate: u64) -> Vec<Draw> {
    let h = normal_quantile(1.0 - cfg.positive_rate);
    let mut rng = replicate_rng(cfg.seed, replicate);
    (0..cfg.n)
        .map(|_| {
            let (z1, z2) = latent_pair(&mut rng, cfg.rho);
            Draw {
                c1: z1 > h,
                c2: z2 > h,
                u: rng.random(),
            }
        })
        .collect()
}

fn tabulate(draws: &[Draw], rates: (f64, f64, f64)) -> PairedTable {
    let mut n = [0u64; 8];
    for d in draws {
        let q = match (d.c1, d.c2) {
            (true, true) => rates.0,
            (true, false) => rates.1,
            (false, true) => rates.2,
            (false, false) => 0.0,
        };
        let cell = match (d.c1, d.c2) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        } + if d.u < q { 4 } else { 0 };
        n[cell] += 1;
    }
    PairedTable::from_cells(n)
}

/// Paired table for replicate `replicate` with target precisions `p1`, `p2`.
/// Observations neither classifier predicts positive land in `n4`.
pub fn simulate_paired_table(cfg: &SimConfig, replicate: u64) -> Result<PairedTable> {
    cfg.validate()?;
    let rates = truth_rates(cfg.p1, cfg.p2, cfg.positive_rate, cfg.rho)?;
    Ok(tabulate(&draws(cfg, replicate), rates))
}

fn gs_rejects(pt: &PairedTable, alpha: f64) -> bool {
    // degenerate tables (no positives, zero denominator) count as acceptance
    gs_statistic(pt, Correction::None).is_ok_and(|r| r.rejects(alpha))
}

fn z_rejects(pt: &PairedTable, alpha: f64) -> bool {
    two_proportion_z_test(pt.a(), pt.t1(), pt.e(), pt.t5()).is_ok_and(|r| r.rejects(alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    /// Precision gap `p1 − p2` in percentage points.
    pub difference: f64,
    pub test: String,
    pub rejections: usize,
    pub replications: usize,
    pub rejection_rate: f64,
}

/// Rejection rates of the GS and Z tests for each precision gap (in
/// percentage points) with `p2 = cfg.p1 − gap`. `cfg.p2` is ignored. All
/// gaps share the same random draws within a replicate.
pub fn power_curve(differences: &[f64], cfg: &SimConfig) -> Result<Vec<PowerPoint>> {
    cfg.validate()?;
    let rates: Vec<(f64, f64, f64)> = differences
        .iter()
        .map(|&d| {
            let p2 = cfg.p1 - d / 100.0;
            open_unit("p1 - difference", p2)?;
            truth_rates(cfg.p1, p2, cfg.positive_rate, cfg.rho)
        })
        .collect::<Result<_>>()?;

    let per_replicate: Vec<Vec<(bool, bool)>> = (0..cfg.replications)
        .into_par_iter()
        .map(|b| {
            let d = draws(cfg, b as u64);
            rates
                .iter()
                .map(|&q| {
                    let pt = tabulate(&d, q);
                    (gs_rejects(&pt, cfg.alpha), z_rejects(&pt, cfg.alpha))
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(2 * differences.len());
    for (k, &d) in differences.iter().enumerate() {
        let gs = per_replicate.iter().filter(|r| r[k].0).count();
        let z = per_replicate.iter().filter(|r| r[k].1).count();
        for (test, rejections) in [("gs", gs), ("z", z)] {
            out.push(PowerPoint {
                difference: d,
                test: test.to_string(),
                rejections,
                replications: cfg.replications,
                rejection_rate: rejections as f64 / cfg.replications as f64,
            });
        }
    }
    Ok(out)
}

/// Tab-separated curve with header `difference test rejection_rate`.
pub fn curve_tsv(points: &[PowerPoint]) -> String {
    let mut s = String::from("difference\ttest\trejection_rate\n");
    for p in points {
        s.push_str(&format!("{}\t{}\t{}\n", p.difference, p.test, p.rejection_rate));
    }
    s
}

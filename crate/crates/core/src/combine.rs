//! Global-null tests over per-class p-values: Simes, and Dai's scaled
//! Lancaster statistic with Satterthwaite degrees of freedom.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chi2_isf, chi2_sf};
use crate::test_result::{Method, TestResult};

pub const DEFAULT_WEIGHT: f64 = 2.0;
pub const RECOMMENDED_REPLICATES: usize = 1000;

fn check_p(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (i, &x) in p.iter().enumerate() {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p-value {i} is {x}; must lie in (0, 1]"
            )));
        }
    }
    Ok(())
}

/// Simes' global p-value `min_i L·p_(i)/i`, capped at 1.
///
/// The result's `statistic` is that same minimum and `df` is `L`.
pub fn simes_global_p(p_values: &[f64]) -> Result<TestResult> {
    check_p(p_values)?;
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let l = sorted.len() as f64;
    let global = sorted
        .iter()
        .enumerate()
        // p·(L/i) keeps the i = L term exact
        .map(|(i, &p)| p * (l / (i + 1) as f64))
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    Ok(TestResult {
        statistic: global,
        df: l,
        p_value: global,
        method: Method::Simes,
        n_used: sorted.len() as u64,
        notes: Vec::new(),
    })
}

/// Chi-square(w) upper quantile at `p`: the Lancaster transform of one
/// p-value. Equals `−2 ln p` when `w = 2`.
pub fn lancaster_transform(p: f64, weight: f64) -> f64 {
    if p >= 1.0 {
        return 0.0;
    }
    chi2_isf(p, weight)
}

fn check_weights(weights: &[f64], len: usize) -> Result<()> {
    if weights.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {len} p-values",
            weights.len()
        )));
    }
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(format!("weight {i} is {w}; must be positive")));
    }
    Ok(())
}

/// `T = Σ_i χ²_{w_i}` upper quantile at `p_i`.
pub fn lancaster_statistic(p_values: &[f64], weights: &[f64]) -> Result<f64> {
    check_weights(weights, p_values.len())?;
    if let Some(i) = p_values.iter().position(|&p| p == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "p-value {i} is 0; its transform is infinite"
        )));
    }
    check_p(p_values)?;
    Ok(p_values
        .iter()
        .zip(weights)
        .map(|(&p, &w)| lancaster_transform(p, w))
        .sum())
}

/// Covariance of the transformed p-values, estimated from replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct PvalueCovariance {
    pub matrix: DMatrix<f64>,
    pub replicates: usize,
    pub warnings: Vec<String>,
}

/// Sample covariance of the Lancaster-transformed columns of a `B×L`
/// replicate table (one row per replicate).
///
/// Replicate p-values of exactly 0 are raised to the smallest positive
/// double, with a warning, so their transform stays finite.
pub fn bootstrap_pvalue_covariance(replicates: &[Vec<f64>], weights: &[f64]) -> Result<PvalueCovariance> {
    let b = replicates.len();
    if b < 2 {
        return Err(Error::InvalidArgument(format!(
            "covariance needs at least 2 replicates, got {b}"
        )));
    }
    let l = weights.len();
    check_weights(weights, l)?;
    let mut warnings = Vec::new();
    if b < RECOMMENDED_REPLICATES {
        warnings.push(format!(
            "only {b} bootstrap replicates; at least {RECOMMENDED_REPLICATES} are recommended"
        ));
    }
    let mut clamped = 0usize;
    let mut x = DMatrix::<f64>::zeros(b, l);
    for (r, row) in replicates.iter().enumerate() {
        if row.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "replicate {r} has {} p-values, expected {l}",
                row.len()
            )));
        }
        for (j, &p) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "replicate {r}, p-value {j} is {p}; must lie in [0, 1]"
                )));
            }
            let p = if p == 0.0 {
                clamped += 1;
                f64::MIN_POSITIVE
            } else {
                p
            };
            x[(r, j)] = lancaster_transform(p, weights[j]);
        }
    }
    if clamped > 0 {
        warnings.push(format!(
            "{clamped} replicate p-values were 0 and were raised to {:e}",
            f64::MIN_POSITIVE
        ));
    }
    let means = x.row_mean();
    for mut row in x.row_iter_mut() {
        row -= &means;
    }
    let matrix = x.transpose() * &x / (b - 1) as f64;
    for j in 0..l {
        if matrix[(j, j)] == 0.0 {
            warnings.push(format!("p-value column {j} is constant across replicates"));
        }
    }
    Ok(PvalueCovariance {
        matrix,
        replicates: b,
        warnings,
    })
}

/// How the p-values depend on each other.
#[derive(Debug, Clone, PartialEq)]
pub enum Dependence {
    Independent,
    /// `L×L` covariance of the transformed p-values.
    Covariance(DMatrix<f64>),
    /// `B×L` bootstrap p-values, one row per replicate.
    Replicates(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombineInput {
    pub p_values: Vec<f64>,
    /// Defaults to 2 for every p-value.
    pub weights: Option<Vec<f64>>,
    pub dependence: Dependence,
}

impl CombineInput {
    pub fn independent(p_values: Vec<f64>) -> Self {
        CombineInput {
            p_values,
            weights: None,
            dependence: Dependence::Independent,
        }
    }
}

/// Intermediate quantities of Dai's method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaiComponents {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub nu: f64,
    pub c: f64,
}

pub fn dai_components(input: &CombineInput) -> Result<(DaiComponents, Vec<String>)> {
    let l = input.p_values.len();
    let weights = input.weights.clone().unwrap_or_else(|| vec![DEFAULT_WEIGHT; l]);
    let t = lancaster_statistic(&input.p_values, &weights)?;

    let mut warnings = Vec::new();
    let cross = match &input.dependence {
        Dependence::Independent => 0.0,
        Dependence::Covariance(m) => off_diagonal_sum(m, l)?,
        Dependence::Replicates(reps) => {
            let cov = bootstrap_pvalue_covariance(reps, &weights)?;
            warnings = cov.warnings;
            off_diagonal_sum(&cov.matrix, l)?
        }
    };
    let mean: f64 = weights.iter().sum();
    let variance = 2.0 * mean + 2.0 * cross;
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::Degenerate(format!(
            "Var(T) = {variance:e} is not positive; the covariances are too negative"
        )));
    }
    let nu = 2.0 * mean * mean / variance;
    Ok((
        DaiComponents {
            t,
            mean,
            variance,
            nu,
            c: nu / mean,
        },
        warnings,
    ))
}

/// `Σ_{i<j} p_ij`, after checking shape and symmetry.
fn off_diagonal_sum(m: &DMatrix<f64>, l: usize) -> Result<f64> {
    if m.nrows() != l || m.ncols() != l {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, expected {l}x{l}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut sum = 0.0;
    for i in 0..l {
        for j in i + 1..l {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::InvalidArgument(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
            sum += m[(i, j)];
        }
    }
    Ok(sum)
}

/// Dai's combined p: `cT` against chi-square(`ν`). The result's statistic
/// is `cT` and `df` is `ν`.
pub fn dai_combined_p(input: &CombineInput) -> Result<TestResult> {
    let (k, warnings) = dai_components(input)?;
    let scaled = k.c * k.t;
    let mut r = TestResult {
        statistic: scaled,
        df: k.nu,
        p_value: chi2_sf(scaled, k.nu).clamp(f64::MIN_POSITIVE, 1.0),
        method: Method::Dai,
        n_used: input.p_values.len() as u64,
        notes: Vec::new(),
    };
    for w in warnings {
        r.push_note(w);
    }
    Ok(r)
}

/// Parses a reported p-value. A bound such as `"<0.0001"` becomes the bound
/// itself, together with a note saying so.
pub fn parse_p_value(raw: &str) -> Result<(f64, Option<String>)> {
    let s = raw.trim();
    let (body, bound) = match s.strip_prefix('<') {
        Some(rest) => (rest.trim_start_matches('=').trim(), true),
        None => (s, false),
    };
    let p: f64 = body
        .parse()
        .map_err(|_| Error::Malformed(format!("cannot parse p-value {raw:?}")))?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("p-value {raw:?} must lie in (0, 1]")));
    }
    let note = bound.then(|| format!("p-value reported as {s:?} was taken as {p}"));
    Ok((p, note))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simes_examples() {
        assert!((simes_global_p(&[0.01, 0.04, 0.03]).unwrap().p_value - 0.03).abs() < 1e-15);
        assert!((simes_global_p(&[0.2, 0.2, 0.2, 0.2]).unwrap().p_value - 0.2).abs() < 1e-15);
        assert_eq!(simes_global_p(&[0.37]).unwrap().p_value, 0.37);
        assert_eq!(simes_global_p(&[0.9, 0.8]).unwrap().p_value, 0.9);
    }

    #[test]
    fn simes_rejects_bad_input() {
        assert!(matches!(simes_global_p(&[]), Err(Error::EmptyInput)));
        assert!(simes_global_p(&[0.0]).is_err());
        assert!(simes_global_p(&[1.2]).is_err());
    }

    #[test]
    fn weight_two_is_fisher() {
        let t = lancaster_statistic(&[0.05, 0.05], &[2.0, 2.0]).unwrap();
        assert!((t - (-4.0 * 0.05f64.ln())).abs() < 1e-12);
        assert!((t - 11.982_929_094_215_963).abs() < 1e-12);
        assert_eq!(lancaster_transform(1.0, 3.0), 0.0);
    }

    #[test]
    fn zero_p_names_index() {
        let e = lancaster_statistic(&[0.5, 0.0], &[2.0, 2.0]).unwrap_err();
        assert!(e.to_string().contains('1'));
    }

    #[test]
    fn dai_independent_is_fisher() {
        let r = dai_combined_p(&CombineInput::independent(vec![0.05, 0.05])).unwrap();
        assert!((r.p_value - 0.017_478_661_367_769_962).abs() < 1e-12);
        assert_eq!(r.df, 4.0);
        let (k, _) = dai_components(&CombineInput::independent(vec![0.3, 0.1, 0.7])).unwrap();
        assert_eq!(k.c, 1.0);
        assert_eq!(k.nu, 6.0);
    }

    #[test]
    fn dai_negative_variance() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, -5.0, -5.0, 4.0]);
        let input = CombineInput {
            p_values: vec![0.2, 0.3],
            weights: None,
            dependence: Dependence::Covariance(m),
        };
        assert!(matches!(dai_combined_p(&input), Err(Error::Degenerate(_))));
    }

    #[test]
    fn duplicated_pvalues_are_penalised() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let p: f64 = rng.random_range(1e-9..1.0);
                vec![p, p]
            })
            .collect();
        let p = vec![0.02, 0.02];
        let dependent = dai_combined_p(&CombineInput {
            p_values: p.clone(),
            weights: None,
            dependence: Dependence::Replicates(reps),
        })
        .unwrap();
        let independent = dai_combined_p(&CombineInput::independent(p)).unwrap();
        assert!(dependent.p_value > independent.p_value);
    }

    #[test]
    fn bootstrap_covariance_shapes() {
        assert!(bootstrap_pvalue_covariance(&[vec![0.5, 0.5]], &[2.0, 2.0]).is_err());
        let reps = vec![vec![0.1, 0.1, 0.4], vec![0.5, 0.5, 0.4], vec![0.9, 0.9, 0.4]];
        let c = bootstrap_pvalue_covariance(&reps, &[2.0, 2.0, 2.0]).unwrap();
        assert!((c.matrix[(0, 1)] - c.matrix[(0, 0)]).abs() < 1e-12);
        assert!(c.warnings.iter().any(|w| w.contains("column 2 is constant")));
        assert!(c.warnings.iter().any(|w| w.contains("recommended")));
    }

    #[test]
    fn independent_columns_have_small_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = 5000;
        let reps: Vec<Vec<f64>> = (0..b)
            .map(|_| (0..3).map(|_| 1.0 - rng.random::<f64>()).collect())
            .collect();
        let c = bootstrap_pvalue_covariance(&reps, &[2.0; 3]).unwrap();
        // each transform is chi-square(2): variance 4, so se(cov) = 4/sqrt(B)
        let se = 4.0 / (b as f64).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(c.matrix[(i, j)].abs() < 3.0 * se);
                }
            }
        }
    }

    #[test]
    fn parse_bounds() {
        let (p, note) = parse_p_value("<0.0001").unwrap();
        assert_eq!(p, 0.0001);
        assert!(note.is_some());
        assert_eq!(parse_p_value(" 0.25 ").unwrap(), (0.25, None));
        assert!(parse_p_value("abc").is_err());
        assert!(parse_p_value("0").is_err());
    }
}

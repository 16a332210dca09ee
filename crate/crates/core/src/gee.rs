//! Marginal logistic model for precision, fitted by IRLS under an
//! independence working correlation, with cluster-robust (sandwich)
//! covariance and Wald tests on the classifier contrasts.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::closed_form::{gs_from_cells, Cells};
use crate::data::BinarySubset;
use crate::error::{Error, Result};
use crate::special::normal_quantile;
use crate::test_result::{Method, TestResult};

pub const MAX_ITERATIONS: usize = 100;
pub const DEVIANCE_TOLERANCE: f64 = 1e-10;
/// Coefficients beyond this magnitude indicate (quasi-)separation.
pub const SEPARATION_THRESHOLD: f64 = 15.0;

const MU_EPS: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: DVector<f64>,
    /// `[XᵀŴX]⁻¹` at the solution.
    pub model_covariance: DMatrix<f64>,
    pub sandwich_covariance: Option<DMatrix<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub deviance: f64,
    pub notes: Vec<String>,
}

fn sigmoid(eta: f64) -> f64 {
    let mu = if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    };
    mu.clamp(MU_EPS, 1.0 - MU_EPS)
}

fn deviance(y: &[f64], mu: &DVector<f64>) -> f64 {
    let mut d = 0.0;
    for (yi, &mi) in y.iter().zip(mu.iter()) {
        d -= if *yi > 0.5 { mi.ln() } else { (1.0 - mi).ln() };
    }
    2.0 * d
}

fn fitted(design: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    (design * beta).map(sigmoid)
}

/// `XᵀWX` with `W = diag(μ(1−μ))`.
fn information(design: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
    let mut weighted = design.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= mu[i] * (1.0 - mu[i]);
    }
    design.transpose() * weighted
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn invert_spd(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.cholesky()
        .map(|c| symmetrize(c.inverse()))
        .ok_or(Error::RankDeficient)
}

fn check_inputs(design: &DMatrix<f64>, response: &[f64]) -> Result<()> {
    if design.nrows() != response.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, response has {}",
            design.nrows(),
            response.len()
        )));
    }
    if design.nrows() == 0 || design.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = response.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument(format!("response must be 0/1, found {bad}")));
    }
    Ok(())
}

fn full_column_rank(design: &DMatrix<f64>) -> bool {
    if design.nrows() < design.ncols() {
        return false;
    }
    let sv = design.clone().svd(false, false).singular_values;
    let max = sv.max();
    let tol = design.nrows().max(design.ncols()) as f64 * f64::EPSILON * max;
    max > 0.0 && sv.iter().all(|&s| s > tol)
}

/// Logistic regression by iteratively reweighted least squares.
///
/// Stops when the relative deviance change `|Δdev| / (|dev| + 0.1)` falls
/// below [`DEVIANCE_TOLERANCE`], then takes one more Newton step.
pub fn fit_logistic_irls(design: &DMatrix<f64>, response: &[f64]) -> Result<FitResult> {
    check_inputs(design, response)?;
    if !full_column_rank(design) {
        return Err(Error::RankDeficient);
    }
    let y = DVector::from_column_slice(response);
    let p = design.ncols();

    let mut beta = DVector::zeros(p);
    let mut mu = y.map(|yi| (yi + 0.5) / 2.0);
    let mut eta = mu.map(|m: f64| (m / (1.0 - m)).ln());
    let mut dev = deviance(response, &mu);
    let mut converged = false;
    let mut polish = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let w = mu.map(|m| m * (1.0 - m));
        let z = DVector::from_iterator(
            y.len(),
            (0..y.len()).map(|i| eta[i] + (y[i] - mu[i]) / w[i]),
        );
        let mut weighted = design.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let xtw = weighted.transpose();
        let chol = (&xtw * design).cholesky().ok_or(Error::RankDeficient)?;
        beta = chol.solve(&(xtw * z));
        eta = design * &beta;
        mu = eta.map(sigmoid);
        let new_dev = deviance(response, &mu);
        let change = (new_dev - dev).abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        if polish {
            converged = true;
            break;
        }
        if change < DEVIANCE_TOLERANCE {
            polish = true;
        }
    }
    if !converged {
        if polish {
            converged = true;
        } else {
            return Err(Error::NotConverged(iterations));
        }
    }

    let model_covariance = invert_spd(information(design, &mu))?;
    let mut notes = Vec::new();
    if let Some(big) = beta.iter().find(|b| b.abs() > SEPARATION_THRESHOLD) {
        notes.push(format!(
            "quasi-separation: coefficient {big:.3} exceeds {SEPARATION_THRESHOLD} in magnitude; \
             a precision of 0 or 1 makes the logit infinite, prefer the score test here"
        ));
    }
    Ok(FitResult {
        coefficients: beta,
        model_covariance,
        sandwich_covariance: None,
        iterations,
        converged,
        deviance: dev,
        notes,
    })
}

/// `B·M·B` with bread `B = [XᵀŴX]⁻¹` and meat summing the outer product of
/// the per-cluster score `Σ_i x_i (y_i − μ̂_i)`.
pub fn cluster_sandwich_covariance(
    fit: &FitResult,
    design: &DMatrix<f64>,
    response: &[f64],
    clusters: &[usize],
) -> Result<DMatrix<f64>> {
    check_inputs(design, response)?;
    if clusters.len() != design.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, cluster ids {}",
            design.nrows(),
            clusters.len()
        )));
    }
    if design.ncols() != fit.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns, fit has {} coefficients",
            design.ncols(),
            fit.coefficients.len()
        )));
    }
    if !fit.converged {
        return Err(Error::InvalidArgument("sandwich requires a converged fit".into()));
    }
    let p = design.ncols();
    let mu = fitted(design, &fit.coefficients);
    let bread = invert_spd(information(design, &mu))?;

    let n_clusters = clusters.iter().max().map_or(0, |&m| m + 1);
    let mut scores = DMatrix::<f64>::zeros(n_clusters, p);
    for (i, &g) in clusters.iter().enumerate() {
        let r = response[i] - mu[i];
        for j in 0..p {
            scores[(g, j)] += design[(i, j)] * r;
        }
    }
    let meat = scores.transpose() * &scores;
    Ok(symmetrize(&bread * meat * &bread))
}

/// Fit plus sandwich covariance in one call.
pub fn fit_clustered(design: &DMatrix<f64>, response: &[f64], clusters: &[usize]) -> Result<FitResult> {
    let mut fit = fit_logistic_irls(design, response)?;
    fit.sandwich_covariance = Some(cluster_sandwich_covariance(&fit, design, response, clusters)?);
    Ok(fit)
}

/// Linear hypothesis `Lβ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Contrast {
    Coefficient(usize),
    Vector(DVector<f64>),
    /// One hypothesis per row.
    Matrix(DMatrix<f64>),
}

impl Contrast {
    fn matrix(&self, p: usize) -> Result<DMatrix<f64>> {
        let l = match self {
            Contrast::Coefficient(j) => {
                if *j >= p {
                    return Err(Error::DimensionMismatch(format!(
                        "coefficient {j} out of range for {p} coefficients"
                    )));
                }
                let mut l = DMatrix::zeros(1, p);
                l[(0, *j)] = 1.0;
                l
            }
            Contrast::Vector(v) => DMatrix::from_row_slice(1, v.len(), v.as_slice()),
            Contrast::Matrix(m) => m.clone(),
        };
        if l.ncols() != p || l.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "contrast is {}x{}, fit has {p} coefficients",
                l.nrows(),
                l.ncols()
            )));
        }
        Ok(l)
    }
}

/// Wald test of `Lβ = 0` against the sandwich covariance.
///
/// The quadratic form uses the pseudo-inverse of `LV̂Lᵀ`, so `df` is the rank
/// of the contrast covariance.
pub fn gee_wald_test(fit: &FitResult, contrast: &Contrast, n_used: u64) -> Result<TestResult> {
    let cov = fit
        .sandwich_covariance
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("Wald test requires a sandwich covariance".into()))?;
    let l = contrast.matrix(fit.coefficients.len())?;
    let est = &l * &fit.coefficients;
    let v = symmetrize(&l * cov * l.transpose());

    let scale: f64 = (0..l.nrows())
        .map(|r| (0..l.ncols()).map(|j| l[(r, j)].powi(2) * cov[(j, j)]).sum::<f64>())
        .sum();
    let eig = SymmetricEigen::new(v);
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let mut stat = 0.0;
    let mut rank = 0usize;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let proj = eig.eigenvectors.column(k).dot(&est);
            stat += proj * proj / lambda;
            rank += 1;
        }
    }
    let rows = l.nrows();
    let mut result = if rank == 0 {
        let est_scale = 1.0 + fit.coefficients.amax();
        if est.amax() > 1e-8 * est_scale {
            return Err(Error::Degenerate(format!(
                "zero variance for a nonzero contrast estimate {:e}",
                est.amax()
            )));
        }
        TestResult::chi_square(0.0, rows as f64, Method::GeeWald, n_used)
            .with_note("contrast covariance vanishes; estimates coincide")
    } else {
        let mut r = TestResult::chi_square(stat, rank as f64, Method::GeeWald, n_used);
        if rank < rows {
            r.push_note(format!("contrast covariance has rank {rank} of {rows}"));
        }
        r
    };
    for note in &fit.notes {
        result.push_note(note.clone());
    }
    Ok(result)
}

/// Design for a class subset: intercept plus one indicator per
/// non-reference classifier, in classifier order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDesign {
    pub design: DMatrix<f64>,
    pub response: Vec<f64>,
    pub clusters: Vec<usize>,
    /// Classifier index behind each non-intercept column.
    pub contrasts: Vec<usize>,
    pub reference: usize,
}

pub fn subset_design(subset: &BinarySubset, reference: usize) -> Result<SubsetDesign> {
    let c = subset.classifiers.len();
    if reference >= c {
        return Err(Error::InvalidArgument(format!(
            "reference index {reference} out of range for {c} classifiers"
        )));
    }
    if subset.is_empty() {
        return Err(Error::EmptyInput);
    }
    let contrasts: Vec<usize> = (0..c).filter(|&k| k != reference).collect();
    let mut design = DMatrix::zeros(subset.len(), c);
    let mut response = Vec::with_capacity(subset.len());
    let mut clusters = Vec::with_capacity(subset.len());
    for (i, row) in subset.rows.iter().enumerate() {
        design[(i, 0)] = 1.0;
        if let Some(col) = contrasts.iter().position(|&k| k == row.classifier) {
            design[(i, col + 1)] = 1.0;
        }
        response.push(if row.outcome { 1.0 } else { 0.0 });
        clusters.push(row.cluster);
    }
    Ok(SubsetDesign {
        design,
        response,
        clusters,
        contrasts,
        reference,
    })
}

/// Exact precision equality from the integer tallies.
fn same_precision(subset: &BinarySubset, a: usize, b: usize) -> bool {
    let (ta, tb) = (subset.tally(a), subset.tally(b));
    u128::from(ta.correct) * u128::from(tb.predicted) == u128::from(tb.correct) * u128::from(ta.predicted)
}

fn require_positive(subset: &BinarySubset, k: usize) -> Result<()> {
    if subset.tally(k).predicted == 0 {
        return Err(Error::UndefinedPrecision {
            classifier: subset.classifiers[k].clone(),
            class: subset.class_label.clone(),
        });
    }
    Ok(())
}

fn require_pair(subset: &BinarySubset) -> Result<()> {
    if subset.classifiers.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected two classifiers, found {}",
            subset.classifiers.len()
        )));
    }
    require_positive(subset, 0)?;
    require_positive(subset, 1)
}

/// Empirical Wald test of `β = logit P̂_C1 − logit P̂_C2 = 0` from the fitted
/// marginal model, the second classifier being the reference.
pub fn gee_wald_pair(subset: &BinarySubset) -> Result<TestResult> {
    require_pair(subset)?;
    let n_used = subset.n_clusters as u64;
    if same_precision(subset, 0, 1) {
        return Ok(TestResult::chi_square(0.0, 1.0, Method::GeeWald, n_used));
    }
    let d = subset_design(subset, 1)?;
    let fit = fit_clustered(&d.design, &d.response, &d.clusters)?;
    gee_wald_test(&fit, &Contrast::Coefficient(1), n_used)
}

/// Generalized score test for two classifiers on a class subset.
pub fn gee_score_test(subset: &BinarySubset) -> Result<TestResult> {
    require_pair(subset)?;
    let cells = Cells::from_positive(subset.paired_positive_cells(0, 1));
    gs_from_cells(
        &cells,
        (&subset.classifiers[0], &subset.classifiers[1]),
        &subset.class_label,
        subset.n_clusters as u64,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatio {
    pub classifier: String,
    pub log_odds_ratio: f64,
    pub standard_error: f64,
    pub odds_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiComparison {
    pub class_label: String,
    pub reference: String,
    pub alpha: f64,
    pub odds_ratios: Vec<OddsRatio>,
    /// Joint Wald test over every contrast with the reference.
    pub global: TestResult,
}

/// Odds ratios of each classifier's precision against `reference`, with a
/// joint Wald test that all of them equal one.
pub fn multi_classifier_compare(subset: &BinarySubset, reference: &str, alpha: f64) -> Result<MultiComparison> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0,1), got {alpha}")));
    }
    let c = subset.classifiers.len();
    if c < 2 {
        return Err(Error::InvalidArgument(format!(
            "comparison needs at least two classifiers, found {c}"
        )));
    }
    let r = subset.classifier_index(reference)?;
    for k in 0..c {
        require_positive(subset, k)?;
    }
    let n_used = subset.n_clusters as u64;
    let d = subset_design(subset, r)?;
    let fit = fit_clustered(&d.design, &d.response, &d.clusters)?;
    let cov = fit.sandwich_covariance.as_ref().expect("fit_clustered sets the sandwich");
    let z = normal_quantile(1.0 - alpha / 2.0);

    let odds_ratios = d
        .contrasts
        .iter()
        .enumerate()
        .map(|(col, &k)| {
            let b = fit.coefficients[col + 1];
            let se = cov[(col + 1, col + 1)].max(0.0).sqrt();
            OddsRatio {
                classifier: subset.classifiers[k].clone(),
                log_odds_ratio: b,
                standard_error: se,
                odds_ratio: b.exp(),
                ci_low: (b - z * se).exp(),
                ci_high: (b + z * se).exp(),
            }
        })
        .collect();

    let global = if (0..c).all(|k| same_precision(subset, k, r)) {
        TestResult::chi_square(0.0, (c - 1) as f64, Method::GeeWald, n_used)
    } else {
        let mut l = DMatrix::zeros(c - 1, c);
        for j in 0..c - 1 {
            l[(j, j + 1)] = 1.0;
        }
        gee_wald_test(&fit, &Contrast::Matrix(l), n_used)?
    };
    Ok(MultiComparison {
        class_label: subset.class_label.clone(),
        reference: reference.to_string(),
        alpha,
        odds_ratios,
        global,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{subset_by_predicted_class, PairedTable};
    use crate::special::logit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f1_subset() -> BinarySubset {
        let long = PairedTable::from_cells([2, 3, 4, 31, 20, 5, 6, 29]).expand().unwrap();
        subset_by_predicted_class(&long, "pos").unwrap()
    }

    /// Plain Newton-Raphson on the log-likelihood with Gauss-Jordan solves.
    fn newton_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len();
        let mut b = vec![0.0; p];
        for _ in 0..200 {
            let mut g = vec![0.0; p];
            let mut h = vec![vec![0.0; p]; p];
            for (row, &yi) in x.iter().zip(y) {
                let eta: f64 = row.iter().zip(&b).map(|(a, c)| a * c).sum();
                let m = 1.0 / (1.0 + (-eta).exp());
                for j in 0..p {
                    g[j] += row[j] * (yi - m);
                    for k in 0..p {
                        h[j][k] += row[j] * row[k] * m * (1.0 - m);
                    }
                }
            }
            // solve h · step = g
            let mut aug: Vec<Vec<f64>> = h
                .into_iter()
                .zip(&g)
                .map(|(mut r, &gi)| {
                    r.push(gi);
                    r
                })
                .collect();
            for col in 0..p {
                let piv = (col..p)
                    .max_by(|&a, &c| aug[a][col].abs().total_cmp(&aug[c][col].abs()))
                    .unwrap();
                aug.swap(col, piv);
                for r in 0..p {
                    if r != col {
                        let f = aug[r][col] / aug[col][col];
                        let pivot = aug[col].clone();
                        for (a, b) in aug[r].iter_mut().zip(&pivot).skip(col) {
                            *a -= f * b;
                        }
                    }
                }
            }
            let step: Vec<f64> = (0..p).map(|j| aug[j][p] / aug[j][j]).collect();
            for j in 0..p {
                b[j] += step[j];
            }
            if step.iter().all(|s| s.abs() < 1e-14) {
                break;
            }
        }
        b
    }

    #[test]
    fn intercept_only_is_logit_of_mean() {
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let x = DMatrix::from_element(7, 1, 1.0);
        let fit = fit_logistic_irls(&x, &y).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - logit(5.0 / 7.0)).abs() < 1e-12);
        // model variance of the intercept is 1/(n m (1-m))
        let m = 5.0 / 7.0;
        assert!((fit.model_covariance[(0, 0)] - 1.0 / (7.0 * m * (1.0 - m))).abs() < 1e-10);
    }

    #[test]
    fn saturated_pair_recovers_logit_difference() {
        let s = f1_subset();
        let d = subset_design(&s, 1).unwrap();
        let fit = fit_logistic_irls(&d.design, &d.response).unwrap();
        let want = logit(25.0 / 30.0) - logit(26.0 / 32.0);
        assert!((fit.coefficients[1] - want).abs() < 1e-10);
        assert!((fit.coefficients[0] - logit(26.0 / 32.0)).abs() < 1e-10);
    }

    #[test]
    fn matches_newton_oracle_on_random_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![1.0, rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                let m = 1.0 / (1.0 + (-(0.3 + 0.8 * r[1] - 0.5 * r[2])).exp());
                f64::from(u8::from(rng.random::<f64>() < m))
            })
            .collect();
        let x = DMatrix::from_fn(50, 3, |i, j| rows[i][j]);
        let fit = fit_logistic_irls(&x, &y).unwrap();
        let oracle = newton_oracle(&rows, &y);
        for (j, want) in oracle.iter().enumerate() {
            assert!((fit.coefficients[j] - want).abs() < 1e-8, "coef {j}");
        }
    }

    #[test]
    fn rank_deficient_design() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let r = fit_logistic_irls(&x, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(r, Err(Error::RankDeficient)));
    }

    #[test]
    fn non_binary_response() {
        let x = DMatrix::from_element(2, 1, 1.0);
        assert!(matches!(fit_logistic_irls(&x, &[0.0, 0.5]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn separation_warns_but_returns() {
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let fit = fit_logistic_irls(&x, &[1.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(fit.notes.iter().any(|n| n.contains("quasi-separation")));
    }

    fn brute_sandwich(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, clusters: &[usize]) -> DMatrix<f64> {
        let p = x.ncols();
        let mut info = DMatrix::zeros(p, p);
        let mut meat = DMatrix::zeros(p, p);
        let groups = clusters.iter().max().unwrap() + 1;
        for g in 0..groups {
            let mut s = DVector::zeros(p);
            for i in (0..x.nrows()).filter(|&i| clusters[i] == g) {
                let xi = x.row(i).transpose();
                let m = 1.0 / (1.0 + (-xi.dot(beta)).exp());
                s += &xi * (y[i] - m);
                info += &xi * xi.transpose() * (m * (1.0 - m));
            }
            meat += &s * s.transpose();
        }
        let b = info.try_inverse().unwrap();
        &b * meat * &b
    }

    fn random_clustered(seed: u64) -> (DMatrix<f64>, Vec<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i % 2) as f64 });
        let y = (0..n).map(|_| f64::from(u8::from(rng.random::<f64>() < 0.6))).collect();
        let clusters = (0..n).map(|i| i / 2).collect();
        (x, y, clusters)
    }

    #[test]
    fn sandwich_matches_brute_force() {
        let (x, y, cl) = random_clustered(5);
        let fit = fit_clustered(&x, &y, &cl).unwrap();
        let brute = brute_sandwich(&x, &y, &fit.coefficients, &cl);
        let got = fit.sandwich_covariance.unwrap();
        assert!((got - brute).amax() < 1e-12);
    }

    #[test]
    fn singleton_clusters_give_unclustered_sandwich() {
        let (x, y, _) = random_clustered(6);
        let singles: Vec<usize> = (0..y.len()).collect();
        let fit = fit_clustered(&x, &y, &singles).unwrap();
        let mu = fitted(&x, &fit.coefficients);
        let b = &fit.model_covariance;
        let mut meat = DMatrix::zeros(2, 2);
        for i in 0..y.len() {
            let xi = x.row(i).transpose();
            meat += &xi * xi.transpose() * (y[i] - mu[i]).powi(2);
        }
        let hc0 = b * meat * b;
        assert!((fit.sandwich_covariance.unwrap() - hc0).amax() < 1e-12);
    }

    #[test]
    fn duplicating_cluster_rows_leaves_sandwich_unchanged() {
        let (x, y, cl) = random_clustered(7);
        let n = y.len();
        let x2 = DMatrix::from_fn(2 * n, 2, |i, j| x[(i % n, j)]);
        let y2: Vec<f64> = (0..2 * n).map(|i| y[i % n]).collect();
        let cl2: Vec<usize> = (0..2 * n).map(|i| cl[i % n]).collect();
        let a = fit_clustered(&x, &y, &cl).unwrap().sandwich_covariance.unwrap();
        let b = fit_clustered(&x2, &y2, &cl2).unwrap().sandwich_covariance.unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn cluster_length_mismatch() {
        let (x, y, cl) = random_clustered(8);
        let fit = fit_logistic_irls(&x, &y).unwrap();
        let r = cluster_sandwich_covariance(&fit, &x, &y, &cl[1..]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn identical_classifiers_give_null_wald() {
        let long = PairedTable::from_cells([5, 0, 0, 20, 15, 0, 0, 10]).expand().unwrap();
        let s = subset_by_predicted_class(&long, "pos").unwrap();
        let r = gee_wald_pair(&s).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        // and the generic path agrees through the vanishing covariance
        let d = subset_design(&s, 1).unwrap();
        let fit = fit_clustered(&d.design, &d.response, &d.clusters).unwrap();
        let g = gee_wald_test(&fit, &Contrast::Coefficient(1), 0).unwrap();
        assert!(g.statistic < 1e-20);
        assert!(g.p_value > 1.0 - 1e-9);
    }

    #[test]
    fn f1_wald_matches_closed_form() {
        let r = gee_wald_pair(&f1_subset()).unwrap();
        let want = 0.081_827_480_181_990_27;
        assert!((r.statistic - want).abs() / want < 1e-6);
        assert_eq!(r.df, 1.0);
    }

    #[test]
    fn f1_score_matches_closed_form() {
        let r = gee_score_test(&f1_subset()).unwrap();
        assert!((r.statistic - 0.082_293_602_336_076_45).abs() < 1e-12);
        assert_eq!(r.method, Method::GeeScore);
    }

    #[test]
    fn reference_swap_negates_beta() {
        let s = f1_subset();
        let a = multi_classifier_compare(&s, "C2", 0.05).unwrap();
        let b = multi_classifier_compare(&s, "C1", 0.05).unwrap();
        let (la, lb) = (a.odds_ratios[0].log_odds_ratio, b.odds_ratios[0].log_odds_ratio);
        assert!((la + lb).abs() < 1e-10);
        assert!((a.global.statistic - b.global.statistic).abs() < 1e-9 * a.global.statistic);
    }

    #[test]
    fn two_classifier_global_equals_pair_wald() {
        let s = f1_subset();
        let m = multi_classifier_compare(&s, "C2", 0.05).unwrap();
        let w = gee_wald_pair(&s).unwrap();
        assert!((m.global.statistic - w.statistic).abs() < 1e-12);
        assert_eq!(m.global.df, 1.0);
    }

    fn four_classifier_table() -> BinarySubset {
        use crate::data::{LongTable, PredictionRecord};
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut recs = Vec::new();
        for id in 0..200 {
            let truth = if rng.random::<f64>() < 0.5 { "a" } else { "b" };
            for (k, acc) in [0.9, 0.8, 0.7, 0.85].iter().enumerate() {
                let right = rng.random::<f64>() < *acc;
                let pred = if right == (truth == "a") { "a" } else { "b" };
                recs.push(PredictionRecord {
                    id: id.to_string(),
                    truth: truth.into(),
                    classifier: format!("K{k}"),
                    predicted: pred.into(),
                    fold: 1,
                    rep: 1,
                });
            }
        }
        subset_by_predicted_class(&LongTable::from_records(recs).unwrap(), "a").unwrap()
    }

    #[test]
    fn four_classifier_odds_ratios_are_logit_differences() {
        let s = four_classifier_table();
        let m = multi_classifier_compare(&s, "K0", 0.05).unwrap();
        let prec = |k: usize| {
            let t = s.tally(k);
            t.correct as f64 / t.predicted as f64
        };
        assert_eq!(m.odds_ratios.len(), 3);
        for (i, or) in m.odds_ratios.iter().enumerate() {
            let want = logit(prec(i + 1)) - logit(prec(0));
            assert!((or.log_odds_ratio - want).abs() < 1e-10);
            assert!(or.ci_low < or.odds_ratio && or.odds_ratio < or.ci_high);
        }
        assert_eq!(m.global.df, 3.0);
    }

    #[test]
    fn all_identical_classifiers() {
        use crate::data::{LongTable, PredictionRecord};
        let mut recs = Vec::new();
        for id in 0..40 {
            let truth = if id % 3 == 0 { "x" } else { "y" };
            let pred = if id % 4 == 0 { "y" } else { "x" };
            for k in 0..3 {
                recs.push(PredictionRecord {
                    id: id.to_string(),
                    truth: truth.into(),
                    classifier: format!("K{k}"),
                    predicted: pred.into(),
                    fold: 1,
                    rep: 1,
                });
            }
        }
        let s = subset_by_predicted_class(&LongTable::from_records(recs).unwrap(), "x").unwrap();
        let m = multi_classifier_compare(&s, "K1", 0.05).unwrap();
        assert_eq!(m.global.p_value, 1.0);
        for or in &m.odds_ratios {
            assert!((or.odds_ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_reference() {
        let r = multi_classifier_compare(&f1_subset(), "nope", 0.05);
        assert!(matches!(r, Err(Error::UnknownClassifier(_))));
    }

    #[test]
    fn joint_contrast_df() {
        let s = four_classifier_table();
        let d = subset_design(&s, 0).unwrap();
        let fit = fit_clustered(&d.design, &d.response, &d.clusters).unwrap();
        let l = DMatrix::from_fn(3, 4, |r, c| f64::from(u8::from(c == r + 1)));
        let t = gee_wald_test(&fit, &Contrast::Matrix(l), 200).unwrap();
        assert_eq!(t.df, 3.0);
    }
}

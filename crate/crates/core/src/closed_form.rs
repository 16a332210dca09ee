//! Count-level statistics on a [`PairedTable`].
//!
//! Notation follows the paired table: `T1`/`T5` are the predicted-positive
//! totals of the two classifiers, `P1`/`P2` their precisions, and the
//! concordance covariance `Ĉ_P` draws on the cells where both classifiers
//! predicted the class (`n5` both correct, `n1` both wrong).

use crate::data::PairedTable;
use crate::error::{Error, Result};
use crate::special::logit;
use crate::test_result::{Method, TestResult};

/// Optional adjustment of the eight cells before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Correction {
    #[default]
    None,
    /// Adds 0.5 to every cell so boundary precisions become finite on the
    /// logit scale.
    Haldane,
}

/// Link used by the multinomial Wald statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Logit,
}

/// Real-valued view of a paired table, after any correction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cells {
    n: [f64; 8],
}

impl Cells {
    pub(crate) fn new(pt: &PairedTable, correction: Correction) -> Self {
        let add = match correction {
            Correction::None => 0.0,
            Correction::Haldane => 0.5,
        };
        Cells {
            n: pt.cells().map(|c| c as f64 + add),
        }
    }

    /// From the predicted-positive cells `(n1, n2, n3, n5, n6, n7)` only.
    pub(crate) fn from_positive(cells: [u64; 6]) -> Self {
        let [n1, n2, n3, n5, n6, n7] = cells.map(|c| c as f64);
        Cells {
            n: [n1, n2, n3, 0.0, n5, n6, n7, 0.0],
        }
    }

    fn n(&self, i: usize) -> f64 {
        self.n[i - 1]
    }

    pub(crate) fn t1(&self) -> f64 {
        self.n(1) + self.n(2) + self.n(5) + self.n(6)
    }

    pub(crate) fn t5(&self) -> f64 {
        self.n(1) + self.n(3) + self.n(5) + self.n(7)
    }

    pub(crate) fn a(&self) -> f64 {
        self.n(5) + self.n(6)
    }

    pub(crate) fn e(&self) -> f64 {
        self.n(5) + self.n(7)
    }

    fn precisions(&self, pt_names: (&str, &str), class: &str) -> Result<(f64, f64)> {
        let undefined = |who: &str| Error::UndefinedPrecision {
            classifier: who.to_string(),
            class: class.to_string(),
        };
        if self.t1() <= 0.0 {
            return Err(undefined(pt_names.0));
        }
        if self.t5() <= 0.0 {
            return Err(undefined(pt_names.1));
        }
        Ok((self.a() / self.t1(), self.e() / self.t5()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcordanceCovariance {
    pub value: f64,
    /// Both classifiers predicted the class and were right (`n5`).
    pub x: f64,
    /// Both classifiers predicted the class and were wrong (`n1`).
    pub y: f64,
}

fn concordance(cells: &Cells, p1: f64, p2: f64) -> ConcordanceCovariance {
    let x = cells.n(5);
    let y = cells.n(1);
    let value = (x * (1.0 - p1) * (1.0 - p2) + y * p1 * p2) / (cells.t1() + cells.t5());
    ConcordanceCovariance { value, x, y }
}

fn names(pt: &PairedTable) -> (&str, &str) {
    (pt.classifier1.as_str(), pt.classifier2.as_str())
}

pub fn concordance_covariance(pt: &PairedTable) -> Result<ConcordanceCovariance> {
    concordance_covariance_with(pt, Correction::None)
}

pub fn concordance_covariance_with(
    pt: &PairedTable,
    correction: Correction,
) -> Result<ConcordanceCovariance> {
    let cells = Cells::new(pt, correction);
    let (p1, p2) = cells.precisions(names(pt), &pt.class_label)?;
    Ok(concordance(&cells, p1, p2))
}

fn tag_correction(mut r: TestResult, correction: Correction) -> TestResult {
    if correction == Correction::Haldane {
        r.push_note("Haldane correction: 0.5 added to every paired-table cell");
    }
    r
}

fn null_result(method: Method, n_used: u64) -> TestResult {
    TestResult::chi_square(0.0, 1.0, method, n_used)
}

/// Denominator of the logit-scale Wald statistic after multiplying through
/// by `P1(1−P1)P2(1−P2)`: each precision's variance term is weighted by the
/// *other* classifier's total.
fn logit_wald_parts(cells: &Cells, p1: f64, p2: f64) -> (f64, f64, f64) {
    let u = p1 * (1.0 - p1);
    let v = p2 * (1.0 - p2);
    let (t1, t5) = (cells.t1(), cells.t5());
    let cross = 2.0 * concordance(cells, p1, p2).value * (1.0 / t1 + 1.0 / t5);
    let consistent = v / t1 + u / t5 - cross;
    let as_printed = u / t1 + v / t5 - cross;
    (u * v, consistent, as_printed)
}

fn logit_wald(pt: &PairedTable, correction: Correction, method: Method) -> Result<TestResult> {
    let cells = Cells::new(pt, correction);
    let (p1, p2) = cells.precisions(names(pt), &pt.class_label)?;
    for (who, p) in [(&pt.classifier1, p1), (&pt.classifier2, p2)] {
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::BoundaryPrecision {
                which: format!("classifier {who:?} on class {:?}", pt.class_label),
                value: p,
            });
        }
    }
    let n_used = pt.total();
    if p1 == p2 {
        return Ok(tag_correction(null_result(method, n_used), correction));
    }
    let beta = logit(p1) - logit(p2);
    let (uv, denom, printed_denom) = logit_wald_parts(&cells, p1, p2);
    if denom <= 0.0 {
        return Err(Error::Degenerate(format!(
            "nonpositive Wald variance {denom:e} on class {:?}",
            pt.class_label
        )));
    }
    let statistic = beta * beta * uv / denom;
    let mut r = TestResult::chi_square(statistic, 1.0, method, n_used);
    let printed = beta * beta * uv / printed_denom;
    if printed_denom <= 0.0 || ((printed - statistic) / statistic).abs() > 1e-6 {
        r.push_note(format!(
            "weighting P1(1-P1)/T1 + P2(1-P2)/T5 in the reformulated Wald variance gives {printed:.6}; \
             reported value uses the weighting that matches the GEE sandwich"
        ));
    }
    Ok(tag_correction(r, correction))
}

/// Empirical Wald statistic from counts, `β̂ = logit P1 − logit P2`.
///
/// Equal to the Wald statistic of the marginal logistic fit with the
/// cluster sandwich variance.
pub fn gw_statistic(pt: &PairedTable, correction: Correction) -> Result<TestResult> {
    logit_wald(pt, correction, Method::GeeWald)
}

/// Pooled precision `(A + E) / (T1 + T5)`.
pub fn pooled_precision(pt: &PairedTable) -> Result<f64> {
    let cells = Cells::new(pt, Correction::None);
    let (t1, t5) = (cells.t1(), cells.t5());
    if t1 + t5 <= 0.0 {
        return Err(Error::UndefinedPrecision {
            classifier: format!("{} and {}", pt.classifier1, pt.classifier2),
            class: pt.class_label.clone(),
        });
    }
    Ok((cells.a() + cells.e()) / (t1 + t5))
}

pub(crate) fn gs_from_cells(
    cells: &Cells,
    names: (&str, &str),
    class: &str,
    n_used: u64,
) -> Result<TestResult> {
    let (p1, p2) = cells.precisions(names, class)?;
    if p1 == p2 {
        return Ok(null_result(Method::GeeScore, n_used));
    }
    let (t1, t5) = (cells.t1(), cells.t5());
    let pooled = (cells.a() + cells.e()) / (t1 + t5);
    let w = (2.0 * pooled - p1 - p2) * (2.0 * pooled - 1.0);
    let c = concordance(cells, p1, p2).value;
    let denom = (pooled * (1.0 - pooled) + w - 2.0 * c) * (1.0 / t1 + 1.0 / t5);
    if denom <= 0.0 {
        return Err(Error::Degenerate(format!(
            "nonpositive score-test denominator {denom:e} on class {class:?}"
        )));
    }
    let diff = p1 - p2;
    Ok(TestResult::chi_square(diff * diff / denom, 1.0, Method::GeeScore, n_used))
}

/// Generalized score statistic in closed form.
pub fn gs_statistic(pt: &PairedTable, correction: Correction) -> Result<TestResult> {
    let cells = Cells::new(pt, correction);
    let r = gs_from_cells(&cells, names(pt), &pt.class_label, pt.total())?;
    Ok(tag_correction(r, correction))
}

/// Multinomial Wald statistic under the identity or logit link.
///
/// The logit link coincides with [`gw_statistic`].
pub fn multinomial_wald(pt: &PairedTable, link: Link, correction: Correction) -> Result<TestResult> {
    match link {
        Link::Logit => logit_wald(pt, correction, Method::MultinomialWald),
        Link::Identity => {
            let cells = Cells::new(pt, correction);
            let (p1, p2) = cells.precisions(names(pt), &pt.class_label)?;
            let n_used = pt.total();
            if p1 == p2 {
                return Ok(tag_correction(null_result(Method::MultinomialWald, n_used), correction));
            }
            let (t1, t5) = (cells.t1(), cells.t5());
            let c = concordance(&cells, p1, p2).value;
            let denom = p1 * (1.0 - p1) / t1 + p2 * (1.0 - p2) / t5 - 2.0 * c * (1.0 / t1 + 1.0 / t5);
            if denom <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "nonpositive variance {denom:e} for the precision difference on class {:?}",
                    pt.class_label
                )));
            }
            let diff = p1 - p2;
            let r = TestResult::chi_square(diff * diff / denom, 1.0, Method::MultinomialWald, n_used);
            Ok(tag_correction(r, correction))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1() -> PairedTable {
        PairedTable::from_cells([2, 3, 4, 31, 20, 5, 6, 29])
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn concordance_zero_cells() {
        let pt = PairedTable::from_cells([0, 3, 4, 10, 0, 5, 6, 10]);
        assert_eq!(concordance_covariance(&pt).unwrap().value, 0.0);
    }

    #[test]
    fn concordance_perfect_identical() {
        let pt = PairedTable::from_cells([0, 0, 0, 40, 25, 0, 0, 5]);
        let c = concordance_covariance(&pt).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!((c.x, c.y), (25.0, 0.0));
    }

    #[test]
    fn concordance_f1() {
        // x=20, y=2, P1=25/30, P2=26/32, T1+T5=62
        let c = concordance_covariance(&f1()).unwrap();
        let expect = (20.0 * (5.0 / 30.0) * (6.0 / 32.0) + 2.0 * (25.0 / 30.0) * (26.0 / 32.0)) / 62.0;
        assert!(rel(c.value, expect) < 1e-15);
        assert!(rel(c.value, 0.031_922_043_010_752_69) < 1e-12);
    }

    #[test]
    fn undefined_precision_errors() {
        let pt = PairedTable::from_cells([0, 0, 4, 10, 0, 0, 6, 10]);
        assert!(matches!(concordance_covariance(&pt), Err(Error::UndefinedPrecision { .. })));
        assert!(matches!(gs_statistic(&pt, Correction::None), Err(Error::UndefinedPrecision { .. })));
    }

    #[test]
    fn equal_precisions_give_zero() {
        let pt = PairedTable::from_cells([3, 2, 2, 10, 12, 8, 8, 10]);
        for r in [
            gw_statistic(&pt, Correction::None).unwrap(),
            gs_statistic(&pt, Correction::None).unwrap(),
            multinomial_wald(&pt, Link::Identity, Correction::None).unwrap(),
        ] {
            assert_eq!(r.statistic, 0.0);
            assert_eq!(r.p_value, 1.0);
        }
    }

    #[test]
    fn identical_classifiers_give_zero() {
        let pt = PairedTable::from_cells([7, 0, 0, 30, 21, 0, 0, 9]);
        assert_eq!(gs_statistic(&pt, Correction::None).unwrap().p_value, 1.0);
        assert_eq!(gw_statistic(&pt, Correction::None).unwrap().statistic, 0.0);
    }

    #[test]
    fn pooled_precision_f1() {
        assert!((pooled_precision(&f1()).unwrap() - 51.0 / 62.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_precision_errors_for_logit() {
        let pt = PairedTable::from_cells([0, 0, 4, 10, 12, 8, 6, 10]);
        assert!(matches!(
            gw_statistic(&pt, Correction::None),
            Err(Error::BoundaryPrecision { .. })
        ));
        let fixed = gw_statistic(&pt, Correction::Haldane).unwrap();
        assert!(fixed.statistic.is_finite());
        assert!(fixed.notes.iter().any(|n| n.contains("Haldane")));
    }

    #[test]
    fn logit_multinomial_equals_gw() {
        let pt = f1();
        let a = gw_statistic(&pt, Correction::None).unwrap();
        let b = multinomial_wald(&pt, Link::Logit, Correction::None).unwrap();
        assert_eq!(a.statistic, b.statistic);
    }

    #[test]
    fn gw_scales_with_counts() {
        let base = gw_statistic(&f1(), Correction::None).unwrap().statistic;
        let big = gw_statistic(&f1().scaled(10), Correction::None).unwrap().statistic;
        assert!(rel(big, 10.0 * base) < 1e-12);
    }

    #[test]
    fn gw_notes_printed_weighting_when_totals_differ() {
        let r = gw_statistic(&f1(), Correction::None).unwrap();
        assert_eq!(r.notes.len(), 1);
    }
}

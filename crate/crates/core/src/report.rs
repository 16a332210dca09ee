//! Comparison report model, its TSV rendering, and the forest plot.
//!
//! Numbers are rounded to 12 significant digits when the report is built, so
//! the JSON and TSV renderings carry identical values.

use serde::{Deserialize, Serialize};

use crate::data::{PairedTable, PrecisionEstimate};
use crate::error::{Error, Result};
use crate::gee::MultiComparison;
use crate::relative::RelativePrecisionResult;
use crate::test_result::TestResult;

pub const SCHEMA_VERSION: u32 = 1;
pub const SIGNIFICANT_DIGITS: usize = 12;
/// p-values below this are shown as `<0.0001` in TSV and human output.
pub const P_DISPLAY_FLOOR: f64 = 1e-4;

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal that reads back as `round_sig(x)`.
pub fn format_number(x: f64) -> String {
    let r = round_sig(x);
    if r.is_nan() {
        "NaN".into()
    } else if r.is_infinite() {
        if r > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{r}")
    }
}

pub fn format_p(p: f64) -> String {
    if p < P_DISPLAY_FLOOR {
        "<0.0001".into()
    } else {
        format_number(p)
    }
}

/// One test between two classifiers (or all classifiers) on a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub comparison: String,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class_label: String,
    pub precisions: Vec<PrecisionEstimate>,
    /// Present when exactly two classifiers are compared.
    pub paired: Option<PairedTable>,
    pub tests: Vec<TestEntry>,
    pub relative_precision: Option<RelativePrecisionResult>,
    /// Present when more than two classifiers are compared.
    pub odds_ratios: Option<MultiComparison>,
}

/// Global-null combination of one per-class test across classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRow {
    /// Method tag of the per-class test being combined.
    pub source: String,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub input_sha256: String,
    pub seed: Option<u64>,
    pub alpha: f64,
    pub classifiers: Vec<String>,
    pub reference: Option<String>,
    pub observations: usize,
    pub dropped_keys: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub classes: Vec<ClassRow>,
    pub combined: Vec<CombinedRow>,
    pub metadata: Metadata,
}

fn round_test(r: &mut TestResult) {
    r.statistic = round_sig(r.statistic);
    r.df = round_sig(r.df);
    r.p_value = round_sig(r.p_value);
}

impl ComparisonReport {
    /// Rounds every real number to [`SIGNIFICANT_DIGITS`].
    pub fn round_numbers(&mut self) {
        self.metadata.alpha = round_sig(self.metadata.alpha);
        for c in &mut self.classes {
            for p in &mut c.precisions {
                p.value = round_sig(p.value);
            }
            for t in &mut c.tests {
                round_test(&mut t.result);
            }
            if let Some(rp) = &mut c.relative_precision {
                for x in [
                    &mut rp.rp,
                    &mut rp.sigma2,
                    &mut rp.ci_low,
                    &mut rp.ci_high,
                    &mut rp.alpha,
                    &mut rp.n,
                    &mut rp.xi,
                ] {
                    *x = round_sig(*x);
                }
            }
            if let Some(m) = &mut c.odds_ratios {
                m.alpha = round_sig(m.alpha);
                round_test(&mut m.global);
                for o in &mut m.odds_ratios {
                    for x in [
                        &mut o.log_odds_ratio,
                        &mut o.standard_error,
                        &mut o.odds_ratio,
                        &mut o.ci_low,
                        &mut o.ci_high,
                    ] {
                        *x = round_sig(*x);
                    }
                }
            }
        }
        for c in &mut self.combined {
            round_test(&mut c.result);
        }
    }

    /// Adds a warning to the metadata unless already present.
    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        if !self.metadata.warnings.contains(&m) {
            self.metadata.warnings.push(m);
        }
    }

    /// Tab-separated table: one line per precision, test, interval or
    /// odds ratio.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("class\tcomparison\tmeasure\tstatistic\tdf\tp_value\testimate\tci_low\tci_high\n");
        let num = |x: f64| format_number(x);
        let mut line = |fields: [String; 9]| {
            out.push_str(&fields.join("\t"));
            out.push('\n');
        };
        let e = String::new;
        for c in &self.classes {
            for p in &c.precisions {
                line([
                    c.class_label.clone(),
                    p.classifier.clone(),
                    "precision".into(),
                    e(),
                    e(),
                    e(),
                    num(p.value),
                    e(),
                    e(),
                ]);
            }
            for t in &c.tests {
                let r = &t.result;
                line([
                    c.class_label.clone(),
                    t.comparison.clone(),
                    r.method.tag().into(),
                    num(r.statistic),
                    num(r.df),
                    format_p(r.p_value),
                    e(),
                    e(),
                    e(),
                ]);
            }
            if let Some(rp) = &c.relative_precision {
                line([
                    c.class_label.clone(),
                    rp_comparison(c),
                    "relative-precision".into(),
                    e(),
                    e(),
                    e(),
                    num(rp.rp),
                    num(rp.ci_low),
                    num(rp.ci_high),
                ]);
            }
            if let Some(m) = &c.odds_ratios {
                for o in &m.odds_ratios {
                    line([
                        c.class_label.clone(),
                        format!("{} vs {}", o.classifier, m.reference),
                        "odds-ratio".into(),
                        e(),
                        e(),
                        e(),
                        num(o.odds_ratio),
                        num(o.ci_low),
                        num(o.ci_high),
                    ]);
                }
            }
        }
        for c in &self.combined {
            let r = &c.result;
            line([
                "(all)".into(),
                c.source.clone(),
                r.method.tag().into(),
                num(r.statistic),
                num(r.df),
                format_p(r.p_value),
                e(),
                e(),
                e(),
            ]);
        }
        out
    }

    /// Forest-plot rows for every class with a relative-precision interval,
    /// labelled `class (dataset)`.
    pub fn forest_rows(&self, dataset: &str) -> Vec<ForestRow> {
        self.classes
            .iter()
            .filter_map(|c| {
                c.relative_precision.as_ref().map(|rp| ForestRow {
                    label: format!("{} ({dataset})", c.class_label),
                    estimate: rp.rp,
                    low: rp.ci_low,
                    high: rp.ci_high,
                })
            })
            .collect()
    }
}

fn rp_comparison(c: &ClassRow) -> String {
    match &c.paired {
        Some(pt) => format!("{}/{}", pt.classifier1, pt.classifier2),
        None => "RP".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestRow {
    pub label: String,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

const WIDTH: f64 = 800.0;
const ROW_HEIGHT: f64 = 40.0;
const TOP: f64 = 40.0;
const PLOT_LEFT: f64 = 330.0;
const PLOT_RIGHT: f64 = 770.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Forest plot of point estimates with interval whiskers on a log axis,
/// with a dashed reference line at 1. Output depends only on the input.
pub fn render_forest_plot(rows: &[ForestRow], title: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    for r in rows {
        for v in [r.low, r.estimate, r.high] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "row {:?}: value {v} cannot be drawn on a log axis",
                    r.label
                )));
            }
        }
        if r.low > r.high {
            return Err(Error::InvalidArgument(format!("row {:?}: interval bounds out of order", r.label)));
        }
    }
    let lo = rows.iter().map(|r| r.low.ln()).fold(0.0f64, f64::min);
    let hi = rows.iter().map(|r| r.high.ln()).fold(0.0f64, f64::max);
    let pad = 0.1 * (hi - lo).max(0.1);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |v: f64| PLOT_LEFT + (v.ln() - lo) / (hi - lo) * (PLOT_RIGHT - PLOT_LEFT);

    let height = ROW_HEIGHT * rows.len() as f64 + 80.0;
    let axis_y = TOP + ROW_HEIGHT * rows.len() as f64 + 10.0;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    s.push_str(&format!("<rect width=\"{WIDTH}\" height=\"{height}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-size=\"14\">{}</text>\n",
        10.0,
        escape(title)
    ));
    let ref_x = x(1.0);
    s.push_str(&format!(
        "<line x1=\"{ref_x:.2}\" y1=\"{TOP:.2}\" x2=\"{ref_x:.2}\" y2=\"{axis_y:.2}\" \
         stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n"
    ));
    for (i, r) in rows.iter().enumerate() {
        let y = TOP + ROW_HEIGHT * i as f64 + ROW_HEIGHT / 2.0;
        s.push_str(&format!(
            "<text x=\"10\" y=\"{:.2}\">{}</text>\n",
            y + 4.0,
            escape(&r.label)
        ));
        s.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            x(r.low),
            x(r.high)
        ));
        s.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"black\"/>\n",
            x(r.estimate) - 5.0,
            y - 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{} [{}, {}]</text>\n",
            WIDTH - 10.0,
            y - 8.0,
            tick_label(r.estimate),
            tick_label(r.low),
            tick_label(r.high)
        ));
    }
    s.push_str(&format!(
        "<line x1=\"{PLOT_LEFT:.2}\" y1=\"{axis_y:.2}\" x2=\"{PLOT_RIGHT:.2}\" y2=\"{axis_y:.2}\" stroke=\"black\"/>\n"
    ));
    for t in ticks(lo.exp(), hi.exp()) {
        let tx = x(t);
        s.push_str(&format!(
            "<line x1=\"{tx:.2}\" y1=\"{axis_y:.2}\" x2=\"{tx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            axis_y + 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{tx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            axis_y + 18.0,
            tick_label(t)
        ));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for e in -3..=3 {
        for m in [1.0, 2.0, 5.0] {
            let t = m * 10f64.powi(e);
            if t >= lo && t <= hi {
                out.push(t);
            }
        }
    }
    if out.len() < 3 {
        for t in [lo, hi] {
            let t = (t * 100.0).round() / 100.0;
            if t > lo && t < hi && !out.contains(&t) {
                out.push(t);
            }
        }
        out.sort_by(f64::total_cmp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(label: &str, e: f64, l: f64, h: f64) -> ForestRow {
        ForestRow {
            label: label.into(),
            estimate: e,
            low: l,
            high: h,
        }
    }

    #[test]
    fn rounding_and_p_display() {
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(format_p(5e-5), "<0.0001");
        assert_eq!(format_p(0.0001), "0.0001");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }

    #[test]
    fn forest_plot_structure() {
        let svg = render_forest_plot(&[row("a", 1.0, 0.9, 1.1)], "t").unwrap();
        assert!(svg.contains("height=\"120\""));
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<rect x=").count(), 1);
        let two = render_forest_plot(&[row("a", 1.0, 0.9, 1.1), row("b<c", 0.8, 0.5, 1.3)], "t").unwrap();
        assert!(two.contains("b&lt;c"));
        assert_eq!(two, render_forest_plot(&[row("a", 1.0, 0.9, 1.1), row("b<c", 0.8, 0.5, 1.3)], "t").unwrap());
    }

    #[test]
    fn forest_plot_rejects_nonpositive_bounds() {
        assert!(render_forest_plot(&[row("a", 1.0, 0.0, 1.1)], "t").is_err());
        assert!(render_forest_plot(&[], "t").is_err());
    }

    #[test]
    fn reference_line_inside_whiskers() {
        let svg = render_forest_plot(&[row("a", 1.0, 0.9, 1.1)], "t").unwrap();
        let grab = |key: &str, from: usize| -> f64 {
            let i = svg[from..].find(key).unwrap() + from + key.len();
            svg[i..].split('"').next().unwrap().parse().unwrap()
        };
        let dash = svg.find("stroke-dasharray").unwrap();
        let line_start = svg[..dash].rfind("<line").unwrap();
        let ref_x = grab("x1=\"", line_start);
        let whisker = svg[dash..].find("<line").unwrap() + dash;
        assert!(grab("x1=\"", whisker) < ref_x && ref_x < grab("x2=\"", whisker));
    }
}

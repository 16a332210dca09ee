//! The `compare` pipeline: per-class tests, relative precision or odds
//! ratios, global combination, and the report files.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use precis_core::closed_form::{gs_statistic, gw_statistic, multinomial_wald, Correction, Link};
use precis_core::combine::{dai_combined_p, simes_global_p, CombineInput, Dependence};
use precis_core::data::{
    confusion_counts, ingest_csv, paired_counts, precision, subset_by_predicted_class, LongTable,
};
use precis_core::gee::multi_classifier_compare;
use precis_core::relative::{rp_interval, rp_test};
use precis_core::report::{
    format_number, format_p, render_forest_plot, ClassRow, CombinedRow, ComparisonReport, Metadata,
    TestEntry, SCHEMA_VERSION,
};
use precis_core::resample::bootstrap;
use precis_core::TestResult;

use crate::{check_alpha, CliError, CliResult, CombineMethod, CompareArgs, TestKind};

pub const DEFAULT_TESTS: [TestKind; 3] = [TestKind::Gs, TestKind::Gw, TestKind::Rp];

/// Validated settings for one comparison.
#[derive(Debug, Clone)]
pub struct Plan {
    pub tests: Vec<TestKind>,
    pub reference: Option<String>,
    pub alpha: f64,
    pub combine: CombineMethod,
    pub bootstrap: usize,
    pub seed: u64,
    pub haldane: bool,
    pub xi: f64,
}

impl Plan {
    pub fn from_args(args: &CompareArgs) -> CliResult<Plan> {
        check_alpha(args.alpha)?;
        if !(args.xi > 0.0 && args.xi.is_finite()) {
            return Err(CliError::Usage(format!("--xi must be positive, got {}", args.xi)));
        }
        if args.combine == CombineMethod::Dai && args.bootstrap == 1 {
            return Err(CliError::Usage("--bootstrap must be 0 or at least 2".into()));
        }
        let tests = args.tests.clone().unwrap_or_else(|| DEFAULT_TESTS.to_vec());
        if tests.is_empty() {
            return Err(CliError::Usage("--tests is empty".into()));
        }
        Ok(Plan {
            tests,
            reference: args.reference.clone(),
            alpha: args.alpha,
            combine: args.combine,
            bootstrap: args.bootstrap,
            seed: args.seed.unwrap_or(0),
            haldane: args.haldane,
            xi: args.xi,
        })
    }

    fn correction(&self) -> Correction {
        if self.haldane {
            Correction::Haldane
        } else {
            Correction::None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// `second` is the reference (denominator of RP).
    Pair { first: String, second: String },
    Multi { reference: String },
}

fn layout(table: &LongTable, args_tests_given: bool, plan: &Plan) -> CliResult<(Layout, Vec<String>)> {
    let classifiers = table.classifiers();
    let mut warnings = Vec::new();
    if classifiers.len() < 2 {
        return Err(CliError::Usage(format!(
            "comparison needs at least two classifiers, found {}",
            classifiers.len()
        )));
    }
    if let Some(r) = &plan.reference {
        table.classifier_index(r)?;
    }
    if classifiers.len() == 2 {
        let (first, second) = match &plan.reference {
            Some(r) if *r == classifiers[0] => (classifiers[1].clone(), classifiers[0].clone()),
            _ => (classifiers[0].clone(), classifiers[1].clone()),
        };
        return Ok((Layout::Pair { first, second }, warnings));
    }
    if args_tests_given {
        return Err(CliError::Usage(
            "--tests applies to two classifiers; with more, odds ratios against --reference are reported".into(),
        ));
    }
    if plan.haldane {
        return Err(CliError::Usage(
            "--haldane applies to the two-classifier closed-form tests only".into(),
        ));
    }
    let reference = match &plan.reference {
        Some(r) => r.clone(),
        None => {
            warnings.push(format!("no --reference given; using {}", classifiers[0]));
            classifiers[0].clone()
        }
    };
    Ok((Layout::Multi { reference }, warnings))
}

fn analyze_class(
    table: &LongTable,
    layout: &Layout,
    plan: &Plan,
    class: &str,
) -> precis_core::Result<ClassRow> {
    match layout {
        Layout::Pair { first, second } => {
            let precisions = [first, second]
                .iter()
                .map(|c| precision(&confusion_counts(table, c, class)?))
                .collect::<precis_core::Result<Vec<_>>>()?;
            let pt = paired_counts(table, first, second, class)?;
            let comparison = format!("{first} vs {second}");
            let corr = plan.correction();
            let mut tests = Vec::new();
            let mut relative = None;
            for kind in &plan.tests {
                let result = match kind {
                    TestKind::Gs => gs_statistic(&pt, corr)?,
                    TestKind::Gw => gw_statistic(&pt, corr)?,
                    TestKind::Mwald => multinomial_wald(&pt, Link::Identity, corr)?,
                    TestKind::Rp => {
                        relative = Some(rp_interval(&pt, plan.alpha, pt.total() as f64, plan.xi)?);
                        rp_test(&pt, plan.xi, plan.alpha)?
                    }
                };
                tests.push(TestEntry {
                    comparison: comparison.clone(),
                    result,
                });
            }
            Ok(ClassRow {
                class_label: class.to_string(),
                precisions,
                paired: Some(pt),
                tests,
                relative_precision: relative,
                odds_ratios: None,
            })
        }
        Layout::Multi { reference } => {
            let precisions = table
                .classifiers()
                .iter()
                .map(|c| precision(&confusion_counts(table, c, class)?))
                .collect::<precis_core::Result<Vec<_>>>()?;
            let subset = subset_by_predicted_class(table, class)?;
            let m = multi_classifier_compare(&subset, reference, plan.alpha)?;
            Ok(ClassRow {
                class_label: class.to_string(),
                precisions,
                paired: None,
                tests: vec![TestEntry {
                    comparison: format!("all vs {reference}"),
                    result: m.global.clone(),
                }],
                relative_precision: None,
                odds_ratios: Some(m),
            })
        }
    }
}

fn analyze_all(table: &LongTable, layout: &Layout, plan: &Plan) -> precis_core::Result<Vec<ClassRow>> {
    table
        .labels()
        .iter()
        .map(|class| analyze_class(table, layout, plan, class))
        .collect()
}

/// `p[source][class]` from analysed rows.
fn pvalue_grid(rows: &[ClassRow]) -> Vec<Vec<f64>> {
    let sources = rows.first().map_or(0, |r| r.tests.len());
    (0..sources)
        .map(|s| rows.iter().map(|r| r.tests[s].result.p_value).collect())
        .collect()
}

fn floor_p(p: &[f64], warnings: &mut Vec<String>, what: &str) -> Vec<f64> {
    if p.contains(&0.0) {
        warnings.push(format!(
            "{what}: p-values of exactly 0 were raised to {:e}",
            f64::MIN_POSITIVE
        ));
    }
    p.iter().map(|&x| x.max(f64::MIN_POSITIVE)).collect()
}

fn combine_all(
    table: &LongTable,
    layout: &Layout,
    plan: &Plan,
    rows: &[ClassRow],
    warnings: &mut Vec<String>,
) -> precis_core::Result<Vec<CombinedRow>> {
    let grid = pvalue_grid(rows);
    let tags: Vec<String> = rows[0].tests.iter().map(|t| t.result.method.tag().to_string()).collect();
    match plan.combine {
        CombineMethod::None => Ok(Vec::new()),
        CombineMethod::Simes => grid
            .iter()
            .zip(&tags)
            .map(|(p, tag)| {
                let p = floor_p(p, warnings, tag);
                Ok(CombinedRow {
                    source: tag.clone(),
                    result: simes_global_p(&p)?,
                })
            })
            .collect(),
        CombineMethod::Dai => {
            let replicates: Vec<Vec<Vec<f64>>> = if plan.bootstrap == 0 {
                warnings.push("no bootstrap replicates; p-values combined as independent".into());
                Vec::new()
            } else {
                let draws = bootstrap(table, plan.bootstrap, plan.seed, |t| {
                    analyze_all(t, layout, plan).ok().map(|r| pvalue_grid(&r))
                });
                let kept: Vec<_> = draws.into_iter().flatten().collect();
                let skipped = plan.bootstrap - kept.len();
                if skipped > 0 {
                    warnings.push(format!(
                        "{skipped} of {} bootstrap replicates were degenerate and skipped",
                        plan.bootstrap
                    ));
                }
                if kept.len() < 2 {
                    return Err(precis_core::Error::Degenerate(
                        "fewer than 2 usable bootstrap replicates for the p-value covariance".into(),
                    ));
                }
                kept
            };
            grid.iter()
                .zip(&tags)
                .enumerate()
                .map(|(s, (p, tag))| {
                    let dependence = if replicates.is_empty() {
                        Dependence::Independent
                    } else {
                        Dependence::Replicates(replicates.iter().map(|r| r[s].clone()).collect())
                    };
                    let input = CombineInput {
                        p_values: floor_p(p, warnings, tag),
                        weights: None,
                        dependence,
                    };
                    Ok(CombinedRow {
                        source: tag.clone(),
                        result: dai_combined_p(&input)?,
                    })
                })
                .collect()
        }
    }
}

fn collect_notes(report: &mut ComparisonReport) {
    let mut notes = Vec::new();
    for c in &report.classes {
        for t in &c.tests {
            for n in &t.result.notes {
                notes.push(format!("class {}: {}: {n}", c.class_label, t.result.method));
            }
        }
    }
    for c in &report.combined {
        for n in &c.result.notes {
            notes.push(format!("combined ({}): {n}", c.result.method));
        }
    }
    for n in notes {
        report.warn(n);
    }
}

/// Runs every analysis on a loaded table. Numbers are rounded for output.
pub fn build_report(
    table: &LongTable,
    input_sha256: &str,
    plan: &Plan,
    tests_given: bool,
) -> CliResult<ComparisonReport> {
    let (layout, mut warnings) = layout(table, tests_given, plan)?;
    let classes = analyze_all(table, &layout, plan)?;
    let combined = combine_all(table, &layout, plan, &classes, &mut warnings)?;
    if table.dropped() > 0 {
        warnings.insert(
            0,
            format!("{} observation keys with a blank prediction were dropped", table.dropped()),
        );
    }
    let reference = match &layout {
        Layout::Pair { second, .. } => second.clone(),
        Layout::Multi { reference } => reference.clone(),
    };
    let mut report = ComparisonReport {
        schema_version: SCHEMA_VERSION,
        classes,
        combined,
        metadata: Metadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_sha256: input_sha256.to_string(),
            seed: Some(plan.seed),
            alpha: plan.alpha,
            classifiers: table.classifiers().to_vec(),
            reference: Some(reference),
            observations: table.n_keys(),
            dropped_keys: table.dropped(),
            warnings: Vec::new(),
        },
    };
    for w in warnings {
        report.warn(w);
    }
    collect_notes(&mut report);
    report.round_numbers();
    Ok(report)
}

/// Rendered outputs of one comparison.
#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub report: ComparisonReport,
    pub json: String,
    pub tsv: String,
    pub svg: Option<String>,
    pub written: Vec<PathBuf>,
}

impl CompareOutput {
    pub fn summary(&self) -> String {
        let mut lines = Vec::new();
        for c in &self.report.classes {
            let tests: Vec<String> = c
                .tests
                .iter()
                .map(|t| format!("{} p={}", t.result.method, format_p(t.result.p_value)))
                .collect();
            let mut line = format!("{}: {}", c.class_label, tests.join(", "));
            if let Some(rp) = &c.relative_precision {
                line.push_str(&format!(
                    ", RP={} [{}, {}]",
                    format_number(rp.rp),
                    format_number(rp.ci_low),
                    format_number(rp.ci_high)
                ));
            }
            lines.push(line);
        }
        for c in &self.report.combined {
            lines.push(format!(
                "global ({} of {}): p={}",
                c.result.method,
                c.source,
                format_p(c.result.p_value)
            ));
        }
        for w in &self.report.metadata.warnings {
            lines.push(format!("warning: {w}"));
        }
        for p in &self.written {
            lines.push(format!("wrote {}", p.display()));
        }
        lines.join("\n")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

/// Renders a report to JSON, TSV and (when relative precision was computed)
/// the forest plot.
pub fn render(report: &ComparisonReport, dataset: &str, alpha: f64) -> CliResult<(String, String, Option<String>)> {
    let json = serde_json::to_string_pretty(report)? + "\n";
    let tsv = report.to_tsv();
    let rows = report.forest_rows(dataset);
    let svg = if rows.is_empty() {
        None
    } else {
        let title = match &report.classes[0].paired {
            Some(pt) => format!(
                "Relative precision {}/{} with {}% CI",
                pt.classifier1,
                pt.classifier2,
                format_number(100.0 * (1.0 - alpha))
            ),
            None => "Relative precision".to_string(),
        };
        Some(render_forest_plot(&rows, &title)?)
    };
    Ok((json, tsv, svg))
}

pub fn cmd_compare(args: &CompareArgs) -> CliResult<CompareOutput> {
    let plan = Plan::from_args(args)?;
    let bytes = fs::read(&args.input).map_err(CliError::io(&args.input))?;
    let table = ingest_csv(&bytes[..], args.format.into())?;
    let report = build_report(&table, &sha256_hex(&bytes), &plan, args.tests.is_some())?;
    let (json, tsv, svg) = render(&report, &dataset_name(&args.input), plan.alpha)?;

    fs::create_dir_all(&args.out_dir).map_err(CliError::io(&args.out_dir))?;
    let mut written = Vec::new();
    let mut files = vec![("report.json", &json), ("report.tsv", &tsv)];
    if let Some(svg) = &svg {
        files.push(("forest.svg", svg));
    }
    for (name, body) in files {
        let path = args.out_dir.join(name);
        fs::write(&path, body).map_err(CliError::io(&path))?;
        written.push(path);
    }
    Ok(CompareOutput {
        report,
        json,
        tsv,
        svg,
        written,
    })
}

/// p-value of one two-classifier test on one class.
pub(crate) fn pair_test_p(
    table: &LongTable,
    reference: Option<&str>,
    class: &str,
    kind: TestKind,
    alpha: f64,
) -> CliResult<TestResult> {
    let plan = Plan {
        tests: vec![kind],
        reference: reference.map(str::to_string),
        alpha,
        combine: CombineMethod::None,
        bootstrap: 0,
        seed: 0,
        haldane: false,
        xi: 1.0,
    };
    let (layout, _) = layout(table, false, &plan)?;
    if !matches!(layout, Layout::Pair { .. }) {
        return Err(CliError::Usage(format!(
            "expected two classifiers, found {}",
            table.classifiers().len()
        )));
    }
    let row = analyze_class(table, &layout, &plan, class)?;
    Ok(row.tests[0].result.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use precis_core::data::{CsvFormat, ingest_csv};

    fn args() -> CompareArgs {
        CompareArgs {
            input: "in.csv".into(),
            format: crate::Format::Wide,
            tests: None,
            reference: None,
            alpha: 0.05,
            combine: CombineMethod::Dai,
            bootstrap: 1000,
            seed: None,
            out_dir: ".".into(),
            haldane: false,
            xi: 1.0,
        }
    }

    fn table(header: &str) -> LongTable {
        let n = header.split(',').count() - 2;
        let row = |id: usize, p: &str| format!("{id},x,{}\n", vec![p; n].join(","));
        let text = format!("{header}\n{}{}", row(1, "x"), row(2, "y"));
        ingest_csv(text.as_bytes(), CsvFormat::Wide).unwrap()
    }

    #[test]
    fn plan_defaults() {
        let plan = Plan::from_args(&args()).unwrap();
        assert_eq!(plan.tests, DEFAULT_TESTS);
        assert_eq!(plan.seed, 0);
    }

    #[test]
    fn plan_rejects_bad_settings() {
        for bad in [
            CompareArgs { alpha: 0.0, ..args() },
            CompareArgs { xi: -1.0, ..args() },
            CompareArgs { bootstrap: 1, ..args() },
            CompareArgs { tests: Some(vec![]), ..args() },
        ] {
            assert!(matches!(Plan::from_args(&bad), Err(CliError::Usage(_))));
        }
    }

    #[test]
    fn reference_goes_second() {
        let t = table("id,truth,A,B");
        let plan = Plan { reference: Some("A".into()), ..Plan::from_args(&args()).unwrap() };
        let (l, _) = layout(&t, false, &plan).unwrap();
        assert_eq!(l, Layout::Pair { first: "B".into(), second: "A".into() });
        let plan = Plan { reference: None, ..plan };
        let (l, _) = layout(&t, false, &plan).unwrap();
        assert_eq!(l, Layout::Pair { first: "A".into(), second: "B".into() });
    }

    #[test]
    fn multi_layout() {
        let t = table("id,truth,A,B,C");
        let plan = Plan::from_args(&args()).unwrap();
        let (l, warnings) = layout(&t, false, &plan).unwrap();
        assert_eq!(l, Layout::Multi { reference: "A".into() });
        assert_eq!(warnings.len(), 1);
        assert!(layout(&t, true, &plan).is_err());
        assert!(layout(&t, false, &Plan { haldane: true, ..plan.clone() }).is_err());
        let unknown = Plan { reference: Some("Z".into()), ..plan };
        assert!(layout(&t, false, &unknown).is_err());
    }
}

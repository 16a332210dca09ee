//! `combine`, `update`, `simulate` and `replicability`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use precis_core::combine::{dai_combined_p, parse_p_value, simes_global_p, CombineInput, Dependence};
use precis_core::data::{confusion_counts, ingest_csv, ingest_path, ConfusionTable};
use precis_core::prevalence::{bayes_update_from_counts, bayes_update_precision, bootstrap_updated_precision_ci};
use precis_core::replicability::{parse_outcomes, replicability};
use precis_core::report::{format_number, round_sig, ComparisonReport, SCHEMA_VERSION};
use precis_core::sim::{curve_tsv, power_curve, SimConfig};
use precis_core::TestResult;

use crate::compare::pair_test_p;
use crate::{check_alpha, CliError, CliResult, CombineArgs, CombineMethod, ReplicabilityArgs, SimulateArgs, UpdateArgs};

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

#[derive(Debug, Serialize)]
pub struct CombineOutput {
    pub schema_version: u32,
    pub p_values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub result: TestResult,
}

fn collect_p_values(args: &CombineArgs) -> CliResult<(Vec<f64>, Vec<String>)> {
    let raw: Vec<String> = if let Some(list) = &args.p_values {
        list.clone()
    } else if let Some(path) = &args.input {
        read_text(path)?
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    } else if let Some(path) = &args.report {
        let report: ComparisonReport = serde_json::from_str(&read_text(path)?)?;
        let first = report
            .classes
            .first()
            .and_then(|c| c.tests.first())
            .map(|t| t.result.method.tag().to_string());
        let source = args
            .source
            .clone()
            .or(first)
            .ok_or_else(|| CliError::Usage("report has no per-class tests".into()))?;
        let p: Vec<String> = report
            .classes
            .iter()
            .filter_map(|c| c.tests.iter().find(|t| t.result.method.tag() == source))
            .map(|t| t.result.p_value.to_string())
            .collect();
        if p.is_empty() {
            return Err(CliError::Usage(format!("report has no {source:?} results")));
        }
        p
    } else {
        return Err(CliError::Usage("give --p-values, --input or --report".into()));
    };
    let mut values = Vec::with_capacity(raw.len());
    let mut notes = Vec::new();
    for r in &raw {
        let (p, note) = parse_p_value(r)?;
        values.push(p);
        notes.extend(note);
    }
    Ok((values, notes))
}

fn read_replicates(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(precis_core::Error::from)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(precis_core::Error::from)?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    CliError::Core(precis_core::Error::Malformed(format!(
                        "{}: row {}: cannot parse {s:?}",
                        path.display(),
                        i + 1
                    )))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn combine_values(args: &CombineArgs) -> CliResult<CombineOutput> {
    let (p_values, notes) = collect_p_values(args)?;
    let mut result = match args.method {
        CombineMethod::Simes => {
            if args.weights.is_some() || args.replicates.is_some() {
                return Err(CliError::Usage("--weights and --replicates apply to Dai's method".into()));
            }
            simes_global_p(&p_values)?
        }
        CombineMethod::Dai => {
            let dependence = match &args.replicates {
                Some(path) => Dependence::Replicates(read_replicates(path)?),
                None => Dependence::Independent,
            };
            dai_combined_p(&CombineInput {
                p_values: p_values.clone(),
                weights: args.weights.clone(),
                dependence,
            })?
        }
        CombineMethod::None => return Err(CliError::Usage("--method none has nothing to compute".into())),
    };
    for n in notes {
        result.push_note(n);
    }
    Ok(CombineOutput {
        schema_version: SCHEMA_VERSION,
        p_values,
        weights: args.weights.clone(),
        result,
    })
}

pub fn cmd_combine(args: &CombineArgs) -> CliResult<()> {
    let mut out = combine_values(args)?;
    out.result.statistic = round_sig(out.result.statistic);
    out.result.df = round_sig(out.result.df);
    out.result.p_value = round_sig(out.result.p_value);
    println!("{}\t{}", out.result.method, format_number(out.result.p_value));
    for n in &out.result.notes {
        println!("note: {n}");
    }
    fs::write(&args.out, serde_json::to_string_pretty(&out)? + "\n").map_err(CliError::io(&args.out))?;
    Ok(())
}

fn update_lines(args: &UpdateArgs) -> CliResult<Vec<(String, String)>> {
    let mut lines = Vec::new();
    let value = if let (Some(s), Some(p)) = (args.sensitivity, args.specificity) {
        bayes_update_precision(s, p, args.prevalence)?
    } else if let Some(c) = &args.counts {
        if c.len() != 4 {
            return Err(CliError::Usage(format!("--counts takes four values a,b,c,d, got {}", c.len())));
        }
        bayes_update_from_counts(&ConfusionTable::new(c[0], c[1], c[2], c[3]), args.prevalence)?
    } else if let Some(path) = &args.input {
        let (clf, class) = (args.classifier.as_deref().unwrap_or(""), args.class.as_deref().unwrap_or(""));
        let table = ingest_path(path, args.format.into())?;
        let ct = confusion_counts(&table, clf, class)?;
        let value = bayes_update_from_counts(&ct, args.prevalence)?;
        if let Some(b) = args.bootstrap {
            check_alpha(args.alpha)?;
            let ci = bootstrap_updated_precision_ci(&table, clf, class, args.prevalence, b, args.alpha, args.seed)?;
            lines.push(("ci_low".into(), format_number(ci.low)));
            lines.push(("ci_high".into(), format_number(ci.high)));
            if ci.degenerate > 0 {
                lines.push(("degenerate_resamples".into(), ci.degenerate.to_string()));
            }
        }
        value
    } else {
        return Err(CliError::Usage(
            "give --sensitivity and --specificity, --counts, or --input".into(),
        ));
    };
    lines.insert(0, ("updated_precision".into(), format_number(value)));
    if args.assumed {
        lines.push(("note".into(), "prevalence is an assumed rate".into()));
    }
    Ok(lines)
}

pub fn cmd_update(args: &UpdateArgs) -> CliResult<()> {
    for (k, v) in update_lines(args)? {
        println!("{k}\t{v}");
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let cfg = SimConfig {
        n: args.n,
        p1: args.p1,
        p2: args.p1,
        rho: args.rho,
        replications: args.replications,
        alpha: args.alpha,
        seed: args.seed,
        positive_rate: args.positive_rate,
    };
    let tsv = curve_tsv(&power_curve(&args.differences, &cfg)?);
    match &args.out {
        Some(path) => fs::write(path, tsv).map_err(CliError::io(path))?,
        None => print!("{tsv}"),
    }
    Ok(())
}

/// Outcomes (true = null accepted) of one test over per-partition files,
/// in file-name order.
pub fn partition_outcomes(args: &ReplicabilityArgs, dir: &Path) -> CliResult<Vec<bool>> {
    check_alpha(args.alpha)?;
    let (Some(class), Some(kind)) = (&args.class, args.test) else {
        return Err(CliError::Usage("--dir needs --class and --test".into()));
    };
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.len() < 2 {
        return Err(CliError::Usage(format!(
            "{}: need at least two prediction files, found {}",
            dir.display(),
            files.len()
        )));
    }
    files
        .iter()
        .map(|path| {
            let bytes = fs::read(path).map_err(CliError::io(path))?;
            let table = ingest_csv(&bytes[..], args.format.into())?;
            let r = pair_test_p(&table, args.reference.as_deref(), class, kind, args.alpha)?;
            Ok(!r.rejects(args.alpha))
        })
        .collect()
}

pub fn cmd_replicability(args: &ReplicabilityArgs) -> CliResult<()> {
    let outcomes = match (&args.outcomes, &args.dir) {
        (Some(path), _) => parse_outcomes(&read_text(path)?)?,
        (None, Some(dir)) => partition_outcomes(args, dir)?,
        (None, None) => return Err(CliError::Usage("give --outcomes or --dir".into())),
    };
    let accepted = outcomes.iter().filter(|&&e| e).count();
    let r = replicability(&outcomes)?;
    println!("replicability\t{}", format_number(r));
    println!("accepted\t{accepted}");
    println!("rejected\t{}", outcomes.len() - accepted);
    Ok(())
}

//! `precis` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 degenerate data,
//! 3 numeric failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod compare;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] precis_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_degenerate_data() => EXIT_DEGENERATE,
            CliError::Core(e) if e.is_numeric_failure() => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "precis", version, about = "Compare classifiers by per-class precision")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-class tests, relative precision and global combination.
    Compare(CompareArgs),
    /// Combine per-class p-values into one global p-value.
    Combine(CombineArgs),
    /// Update precision for a known class prevalence.
    Update(UpdateArgs),
    /// Power curves of the GS and Z tests on simulated correlated data.
    Simulate(SimulateArgs),
    /// Agreement of accept/reject outcomes across repeated experiments.
    Replicability(ReplicabilityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestKind {
    /// Generalized score test.
    Gs,
    /// Empirical Wald test on the logit difference.
    Gw,
    /// Relative precision interval test.
    Rp,
    /// Multinomial Wald test, identity link.
    Mwald,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CombineMethod {
    Dai,
    Simes,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Wide,
    Long,
}

impl From<Format> for precis_core::data::CsvFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Wide => precis_core::data::CsvFormat::Wide,
            Format::Long => precis_core::data::CsvFormat::Long,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Prediction CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "wide")]
    pub format: Format,
    /// Tests for two-classifier input [default: gs,gw,rp].
    #[arg(long, value_enum, value_delimiter = ',')]
    pub tests: Option<Vec<TestKind>>,
    /// Reference classifier: the denominator of RP, or the odds-ratio
    /// baseline with more than two classifiers.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "dai")]
    pub combine: CombineMethod,
    /// Bootstrap replicates for the p-value covariance of Dai's method.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, env = "PRECIS_SEED")]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Add 0.5 to every paired cell before the closed-form tests.
    #[arg(long)]
    pub haldane: bool,
    /// RP threshold tested against.
    #[arg(long, default_value_t = 1.0)]
    pub xi: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CombineArgs {
    /// Comma-separated p-values; `<0.0001` style bounds are accepted.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["input", "report"])]
    pub p_values: Option<Vec<String>>,
    /// File of p-values separated by whitespace or commas.
    #[arg(long, conflicts_with = "report")]
    pub input: Option<PathBuf>,
    /// A report.json written by `compare`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Test tag to take from the report (e.g. gee-score) [default: first].
    #[arg(long, requires = "report")]
    pub source: Option<String>,
    #[arg(long, value_enum, default_value = "dai")]
    pub method: CombineMethod,
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Headerless CSV of bootstrap p-values, one replicate per row.
    #[arg(long)]
    pub replicates: Option<PathBuf>,
    #[arg(long, default_value = "combine.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct UpdateArgs {
    #[arg(long)]
    pub prevalence: f64,
    /// The prevalence is an assumed (normalized) rate, not a measured one.
    #[arg(long)]
    pub assumed: bool,
    #[arg(long, requires = "specificity", conflicts_with_all = ["counts", "input"])]
    pub sensitivity: Option<f64>,
    #[arg(long, requires = "sensitivity")]
    pub specificity: Option<f64>,
    /// Confusion counts `a,b,c,d` (TP, FN, FP, TN).
    #[arg(long, value_delimiter = ',', conflicts_with = "input")]
    pub counts: Option<Vec<u64>>,
    /// Prediction CSV to take counts from (and to bootstrap).
    #[arg(long, requires_all = ["classifier", "class"])]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "wide")]
    pub format: Format,
    #[arg(long)]
    pub classifier: Option<String>,
    #[arg(long)]
    pub class: Option<String>,
    /// Bootstrap replicates for a percentile interval (needs --input).
    #[arg(long, requires = "input")]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, env = "PRECIS_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Precision gaps in percentage points.
    #[arg(long, value_delimiter = ',', default_value = "0,2,5,10")]
    pub differences: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Precision of the first classifier; the second is p1 minus the gap.
    #[arg(long, default_value_t = 0.7)]
    pub p1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 2000)]
    pub replications: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = precis_core::sim::DEFAULT_POSITIVE_RATE)]
    pub positive_rate: f64,
    #[arg(long, env = "PRECIS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the TSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplicabilityArgs {
    /// File of 0/1 outcomes (1 = null accepted).
    #[arg(long, conflicts_with = "dir", required_unless_present = "dir")]
    pub outcomes: Option<PathBuf>,
    /// Directory of per-partition prediction CSVs.
    #[arg(long, requires_all = ["class", "test"])]
    pub dir: Option<PathBuf>,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long, value_enum)]
    pub test: Option<TestKind>,
    #[arg(long, value_enum, default_value = "wide")]
    pub format: Format,
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Compare(args) => {
            let out = compare::cmd_compare(&args)?;
            println!("{}", out.summary());
            Ok(())
        }
        Command::Combine(args) => commands::cmd_combine(&args),
        Command::Update(args) => commands::cmd_update(&args),
        Command::Simulate(args) => commands::cmd_simulate(&args),
        Command::Replicability(args) => commands::cmd_replicability(&args),
    }
}

pub(crate) fn check_alpha(alpha: f64) -> CliResult<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

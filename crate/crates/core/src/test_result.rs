use serde::{Deserialize, Serialize};
use std::fmt;

use crate::special::chi2_sf;

/// Which procedure produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GeeWald,
    GeeScore,
    MultinomialWald,
    Rp,
    ZTest,
    Simes,
    Dai,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::GeeWald => "gee-wald",
            Method::GeeScore => "gee-score",
            Method::MultinomialWald => "multinomial-wald",
            Method::Rp => "rp",
            Method::ZTest => "z-test",
            Method::Simes => "simes",
            Method::Dai => "dai",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Outcome of a hypothesis test.
///
/// `df` is real-valued because the Satterthwaite-scaled combination yields
/// fractional degrees of freedom; every other method reports an integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub method: Method,
    /// Number of observations (or p-values, for combination methods) used.
    pub n_used: u64,
    pub notes: Vec<String>,
}

impl TestResult {
    /// A chi-square-family result: p is the upper tail at `statistic`.
    pub fn chi_square(statistic: f64, df: f64, method: Method, n_used: u64) -> Self {
        let statistic = statistic.max(0.0);
        TestResult {
            statistic,
            df,
            p_value: chi2_sf(statistic, df).clamp(0.0, 1.0),
            method,
            n_used,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.push_note(note);
        self
    }

    /// Appends a note unless the same text is already present.
    pub fn push_note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

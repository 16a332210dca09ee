//! Precision re-weighted to a known class prevalence by Bayes' law.

use serde::{Deserialize, Serialize};

use crate::data::{confusion_counts, ConfusionTable, LongTable};
use crate::error::{Error, Result};
use crate::resample::{bootstrap, percentile_interval};

pub const MIN_REPLICATES: usize = 100;
/// Largest tolerated fraction of bootstrap resamples with an undefined update.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.1;

fn unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// `S_s·P_v / (S_s·P_v + (1−S_p)(1−P_v))`.
pub fn bayes_update_precision(sensitivity: f64, specificity: f64, prevalence: f64) -> Result<f64> {
    unit("sensitivity", sensitivity)?;
    unit("specificity", specificity)?;
    if !(prevalence > 0.0 && prevalence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "prevalence must lie in (0, 1), got {prevalence}"
        )));
    }
    let hit = sensitivity * prevalence;
    let false_alarm = (1.0 - specificity) * (1.0 - prevalence);
    if hit + false_alarm == 0.0 {
        return Err(Error::Degenerate(
            "updated precision undefined: zero sensitivity and perfect specificity".into(),
        ));
    }
    // uninformative classifier: the posterior is the prior
    if sensitivity + specificity == 1.0 {
        return Ok(prevalence);
    }
    Ok(hit / (hit + false_alarm))
}

/// Sensitivity `a/T4` and specificity `d/T3` of a confusion table.
pub fn sensitivity_specificity(ct: &ConfusionTable) -> Result<(f64, f64)> {
    let (t4, t3) = (ct.t4(), ct.t3());
    if t4 == 0 || t3 == 0 {
        return Err(Error::Degenerate(format!(
            "class {:?} is {} in the truth labels; sensitivity and specificity need both",
            ct.class_label,
            if t4 == 0 { "absent" } else { "the only class" }
        )));
    }
    Ok((ct.a as f64 / t4 as f64, ct.d as f64 / t3 as f64))
}

pub fn bayes_update_from_counts(ct: &ConfusionTable, prevalence: f64) -> Result<f64> {
    let (s, p) = sensitivity_specificity(ct)?;
    bayes_update_precision(s, p, prevalence)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdatedPrecisionInterval {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub alpha: f64,
    pub replicates: usize,
    /// Resamples where the update was undefined; excluded from the interval.
    pub degenerate: usize,
}

/// Percentile bootstrap interval for the updated precision, resampling
/// observation ids.
pub fn bootstrap_updated_precision_ci(
    t: &LongTable,
    classifier: &str,
    class: &str,
    prevalence: f64,
    replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<UpdatedPrecisionInterval> {
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_REPLICATES} bootstrap replicates required, got {replicates}"
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0,1), got {alpha}")));
    }
    t.classifier_index(classifier)?;
    let estimate = bayes_update_from_counts(&confusion_counts(t, classifier, class)?, prevalence)?;

    let draws = bootstrap(t, replicates, seed, |r| {
        confusion_counts(r, classifier, class)
            .and_then(|ct| bayes_update_from_counts(&ct, prevalence))
            .ok()
    });
    let values: Vec<f64> = draws.iter().flatten().copied().collect();
    let degenerate = replicates - values.len();
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * replicates as f64 {
        return Err(Error::Degenerate(format!(
            "{degenerate} of {replicates} bootstrap resamples had an undefined updated precision"
        )));
    }
    let (low, high) = percentile_interval(&values, alpha);
    Ok(UpdatedPrecisionInterval {
        estimate,
        low,
        high,
        alpha,
        replicates,
        degenerate,
    })
}

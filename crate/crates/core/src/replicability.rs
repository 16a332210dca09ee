//! Replicability of a test's accept/reject decision across repeated
//! experiments: the fraction of agreeing pairs.

use crate::error::{Error, Result};

/// `R(e) = (p(p−1) + q(q−1)) / (n(n−1))` with `p` accepts (`true`) and `q`
/// rejects among `n` outcomes.
pub fn replicability(outcomes: &[bool]) -> Result<f64> {
    let p = outcomes.iter().filter(|&&e| e).count() as u64;
    replicability_counts(p, outcomes.len() as u64 - p)
}

pub fn replicability_counts(p: u64, q: u64) -> Result<f64> {
    let n = p + q;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "replicability needs at least 2 outcomes, got {n}"
        )));
    }
    let agree = p * p.saturating_sub(1) + q * q.saturating_sub(1);
    Ok(agree as f64 / (n * (n - 1)) as f64)
}

/// Direct count of agreeing pairs over all `n(n−1)/2` pairs.
pub fn replicability_pairwise(outcomes: &[bool]) -> Result<f64> {
    let n = outcomes.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "replicability needs at least 2 outcomes, got {n}"
        )));
    }
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            agree += u64::from(outcomes[i] == outcomes[j]);
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}

/// Parses whitespace- or comma-separated `0`/`1` outcomes (1 = accepted).
pub fn parse_outcomes(text: &str) -> Result<Vec<bool>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(Error::Malformed(format!("outcome must be 0 or 1, got {other:?}"))),
        })
        .collect()
}

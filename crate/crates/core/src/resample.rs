//! Seeded cluster bootstrap over observation ids.
//!
//! Replicate `b` draws from a ChaCha stream keyed by `(seed, b)`, so the
//! output does not depend on how rayon schedules the work.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::LongTable;

/// Random stream for one replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Key positions grouped by observation id, in first-appearance order.
pub fn id_groups(t: &LongTable) -> Vec<Vec<usize>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, key) in t.keys().iter().enumerate() {
        let g = *index.entry(key.id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(k);
    }
    groups
}

/// Key positions of one bootstrap draw: ids sampled with replacement, each
/// bringing all of its keys (every fold and repetition).
pub fn draw_keys(groups: &[Vec<usize>], rng: &mut impl Rng) -> Vec<usize> {
    let mut picks = Vec::new();
    for _ in 0..groups.len() {
        picks.extend_from_slice(&groups[rng.random_range(0..groups.len())]);
    }
    picks
}

/// Applies `stat` to `replicates` cluster-bootstrap resamples of `t`.
/// Results come back in replicate order.
pub fn bootstrap<T, F>(t: &LongTable, replicates: usize, seed: u64, stat: F) -> Vec<T>
where
    T: Send,
    F: Fn(&LongTable) -> T + Sync,
{
    let groups = id_groups(t);
    (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b as u64);
            stat(&t.resampled(&draw_keys(&groups, &mut rng)))
        })
        .collect()
}

/// Percentile interval `[q(alpha/2), q(1 - alpha/2)]` by linear
/// interpolation between order statistics.
pub fn percentile_interval(values: &[f64], alpha: f64) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (quantile_sorted(&v, alpha / 2.0), quantile_sorted(&v, 1.0 - alpha / 2.0))
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PredictionRecord;

    fn table() -> LongTable {
        let mut recs = Vec::new();
        for id in 0..30 {
            for fold in 1..=2 {
                for clf in ["a", "b"] {
                    recs.push(PredictionRecord {
                        id: id.to_string(),
                        truth: if id % 2 == 0 { "x" } else { "y" }.into(),
                        classifier: clf.into(),
                        predicted: if id % 3 == 0 { "x" } else { "y" }.into(),
                        fold,
                        rep: 1,
                    });
                }
            }
        }
        LongTable::from_records(recs).unwrap()
    }

    #[test]
    fn ids_travel_with_all_their_keys() {
        let t = table();
        let groups = id_groups(&t);
        assert_eq!(groups.len(), 30);
        assert!(groups.iter().all(|g| g.len() == 2));
        let picks = draw_keys(&groups, &mut replicate_rng(1, 0));
        assert_eq!(picks.len(), 60);
        let r = t.resampled(&picks);
        assert_eq!(r.n_keys(), 60);
    }

    #[test]
    fn deterministic_regardless_of_threads() {
        let t = table();
        let stat = |r: &LongTable| r.keys().iter().map(|k| k.id.len()).sum::<usize>();
        let a = bootstrap(&t, 64, 42, stat);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| bootstrap(&t, 64, 42, stat));
        assert_eq!(a, b);
        assert_ne!(a, bootstrap(&t, 64, 43, stat));
    }

    #[test]
    fn percentile_endpoints() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile_interval(&v, 0.1), (5.0, 95.0));
        assert_eq!(percentile_interval(&[2.0; 5], 0.05), (2.0, 2.0));
    }
}

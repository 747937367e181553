//! Offline metrics shared by every task.

use std::time::Duration;

use crate::error::{Error, Result};

pub const CUTOFF: usize = 10;

/// `1/rank` of `answer` within the first ten entries, else 0.
pub fn reciprocal_rank<S: AsRef<str>>(ranked: &[S], answer: &str) -> f64 {
    ranked
        .iter()
        .take(CUTOFF)
        .position(|c| c.as_ref() == answer)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Mean of per-impression reciprocal ranks; 0 for no impressions.
pub fn mrr_at_10(reciprocal_ranks: &[f64]) -> f64 {
    if reciprocal_ranks.is_empty() {
        return 0.0;
    }
    reciprocal_ranks.iter().sum::<f64>() / reciprocal_ranks.len() as f64
}

fn dcg(grades: impl Iterator<Item = u8>, k: usize) -> f64 {
    grades
        .take(k)
        .enumerate()
        .map(|(i, g)| (2f64.powi(i32::from(g)) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG at `k` with exponential gain `2^g − 1` and `log2(rank + 1)`
/// discount. `ranked` holds the grades in ranked order; the ideal ordering
/// is taken over `ranked` itself. Lists without any positive grade score 0.
pub fn ndcg_at(ranked: &[u8], k: usize) -> f64 {
    let mut ideal = ranked.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let best = dcg(ideal.into_iter(), k);
    if best == 0.0 {
        return 0.0;
    }
    dcg(ranked.iter().copied(), k) / best
}

pub fn ndcg_at_10(ranked: &[u8]) -> f64 {
    ndcg_at(ranked, CUTOFF)
}

/// Nearest-rank percentile: the `ceil(p·N)`-th smallest sample, with the
/// rank clamped to `1..=N`.
pub fn percentile<T: Copy + Ord>(samples: &[T], p: f64) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::invalid("percentile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("percentile fraction {p} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

pub fn percentile_duration(samples: &[Duration], p: f64) -> Result<Duration> {
    percentile(samples, p)
}

pub fn accuracy<T: PartialEq>(pairs: &[(T, T)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    Ok(pairs.iter().filter(|(a, b)| a == b).count() as f64 / pairs.len() as f64)
}

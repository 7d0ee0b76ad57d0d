use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// 1-based rank of `gold` in `ranking`, if present.
pub fn gold_rank<S: AsRef<str>>(ranking: &[S], gold: &str) -> Option<usize> {
    ranking
        .iter()
        .position(|id| id.as_ref() == gold)
        .map(|p| p + 1)
}

/// Fraction of queries whose gold rank is at most k, for each k.
pub fn recall_at_k_from_ranks(ranks: &[Option<usize>], ks: &[usize]) -> BTreeMap<usize, f64> {
    ks.iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
            let v = if ranks.is_empty() {
                0.0
            } else {
                hits as f64 / ranks.len() as f64
            };
            (k, v)
        })
        .collect()
}

pub fn mrr_from_ranks(ranks: &[Option<usize>]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks
        .iter()
        .map(|r| r.map_or(0.0, |r| 1.0 / r as f64))
        .sum::<f64>()
        / ranks.len() as f64
}

fn ranks<S: AsRef<str>, G: AsRef<str>>(
    rankings: &[Vec<S>],
    gold_ids: &[G],
) -> Result<Vec<Option<usize>>> {
    if rankings.len() != gold_ids.len() {
        return Err(Error::LengthMismatch {
            hyps: rankings.len(),
            refs: gold_ids.len(),
        });
    }
    Ok(rankings
        .iter()
        .zip(gold_ids)
        .map(|(r, g)| gold_rank(r, g.as_ref()))
        .collect())
}

pub fn recall_at_k<S: AsRef<str>, G: AsRef<str>>(
    rankings: &[Vec<S>],
    gold_ids: &[G],
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    Ok(recall_at_k_from_ranks(&ranks(rankings, gold_ids)?, ks))
}

pub fn mrr<S: AsRef<str>, G: AsRef<str>>(rankings: &[Vec<S>], gold_ids: &[G]) -> Result<f64> {
    Ok(mrr_from_ranks(&ranks(rankings, gold_ids)?))
}

/// Expected MRR when the gold item sits at a uniformly random rank among `n`.
pub fn random_mrr(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (1..=n).map(|r| 1.0 / r as f64).sum::<f64>() / n as f64
}

//! Corpus BLEU-4 and sentence-level smoothed BLEU-4.
//!
//! Both score on code-tokenizer tokens with a single reference per hypothesis.
//! Modified precision clips each hypothesis n-gram count at its count in the
//! reference.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::text::tokenize_code;

pub const MAX_ORDER: usize = 4;

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped matches and total hypothesis n-grams of order `n`.
pub(crate) fn clipped_matches(hyp: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matched = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, hyp.len().saturating_sub(n - 1))
}

pub(crate) fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

pub(crate) fn check_lengths(hyps: usize, refs: usize) -> Result<()> {
    if hyps != refs {
        return Err(Error::LengthMismatch { hyps, refs });
    }
    if hyps == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(())
}

pub(crate) fn tokenize_all<S: AsRef<str>>(texts: &[S]) -> Vec<Vec<String>> {
    texts.iter().map(|t| tokenize_code(t.as_ref())).collect()
}

/// Corpus-level BLEU-4 on a 0..=100 scale.
pub fn corpus_bleu<S: AsRef<str>, T: AsRef<str>>(hyps: &[S], refs: &[T]) -> Result<f64> {
    check_lengths(hyps.len(), refs.len())?;
    Ok(corpus_bleu_tokens(&tokenize_all(hyps), &tokenize_all(refs)))
}

/// Corpus BLEU over pre-tokenized pairs. Orders for which no hypothesis has
/// any n-gram are left out of the geometric mean.
pub fn corpus_bleu_tokens(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let mut matched = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let (m, t) = clipped_matches(h, r, n);
            matched[n - 1] += m;
            total[n - 1] += t;
        }
    }
    combine(
        &matched.map(|m| m as f64),
        &total.map(|t| t as f64),
        hyp_len,
        ref_len,
    )
}

/// Geometric mean of the available precisions times the brevity penalty, ×100.
pub(crate) fn combine(
    matched: &[f64; MAX_ORDER],
    total: &[f64; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
) -> f64 {
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 0..MAX_ORDER {
        if total[n] == 0.0 {
            continue;
        }
        if matched[n] == 0.0 {
            return 0.0;
        }
        log_sum += (matched[n] / total[n]).ln();
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    100.0 * brevity_penalty(hyp_len, ref_len) * (log_sum / orders as f64).exp()
}

/// Sentence BLEU-4 with add-one smoothing on orders 2..=4, on a 0..=100 scale.
pub fn smoothed_bleu4(hyp: &str, reference: &str) -> f64 {
    smoothed_bleu4_tokens(&tokenize_code(hyp), &tokenize_code(reference))
}

pub fn smoothed_bleu4_tokens(hyp: &[String], reference: &[String]) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let (m, t) = clipped_matches(hyp, reference, n);
        let p = if n == 1 {
            if m == 0 {
                return 0.0;
            }
            m as f64 / t as f64
        } else {
            (m as f64 + 1.0) / (t as f64 + 1.0)
        };
        log_sum += p.ln();
    }
    100.0 * brevity_penalty(hyp.len(), reference.len()) * (log_sum / MAX_ORDER as f64).exp()
}

/// Mean sentence-level smoothed BLEU-4 over a corpus.
pub fn corpus_smoothed_bleu4<S: AsRef<str>, T: AsRef<str>>(hyps: &[S], refs: &[T]) -> Result<f64> {
    check_lengths(hyps.len(), refs.len())?;
    let sum: f64 = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| smoothed_bleu4(h.as_ref(), r.as_ref()))
        .sum();
    Ok(sum / hyps.len() as f64)
}

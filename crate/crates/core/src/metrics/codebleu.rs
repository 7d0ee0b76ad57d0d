use serde::{Deserialize, Serialize};

use super::ast::ast_match;
use super::bleu::{
    check_lengths, clipped_matches, combine, corpus_bleu_tokens, ngram_counts, tokenize_all,
    MAX_ORDER,
};
use super::dataflow::dataflow_match_ast;
use super::minilang::{parse_minilang, KEYWORDS};
use crate::error::Result;

pub const KEYWORD_WEIGHT: f64 = 5.0;
pub const COMPONENT_WEIGHT: f64 = 0.25;

/// CodeBLEU and its four components, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuScore {
    pub codebleu: f64,
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast: f64,
    pub dataflow: f64,
}

impl CodeBleuScore {
    pub fn from_components(ngram: f64, weighted_ngram: f64, ast: f64, dataflow: f64) -> Self {
        CodeBleuScore {
            codebleu: COMPONENT_WEIGHT * (ngram + weighted_ngram + ast + dataflow),
            ngram,
            weighted_ngram,
            ast,
            dataflow,
        }
    }
}

fn token_weight(tok: &str) -> f64 {
    if KEYWORDS.contains(&tok) {
        KEYWORD_WEIGHT
    } else {
        1.0
    }
}

/// Corpus BLEU in [0, 1] where unigram matches and counts are scaled by
/// keyword weight. Higher orders are counted as in plain BLEU.
pub fn weighted_ngram_tokens(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let mut matched = [0.0; MAX_ORDER];
    let mut total = [0.0; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += r.len();
        let hc = ngram_counts(h, 1);
        let rc = ngram_counts(r, 1);
        for (g, &c) in &hc {
            let w = token_weight(&g[0]);
            matched[0] += w * c.min(rc.get(g).copied().unwrap_or(0)) as f64;
            total[0] += w * c as f64;
        }
        for n in 2..=MAX_ORDER {
            let (m, t) = clipped_matches(h, r, n);
            matched[n - 1] += m as f64;
            total[n - 1] += t as f64;
        }
    }
    combine(&matched, &total, hyp_len, ref_len) / 100.0
}

/// Corpus CodeBLEU. The n-gram parts are corpus-level; the syntax and
/// data-flow parts are averaged over pairs.
pub fn codebleu<S: AsRef<str>, T: AsRef<str>>(hyps: &[S], refs: &[T]) -> Result<CodeBleuScore> {
    check_lengths(hyps.len(), refs.len())?;
    let ht = tokenize_all(hyps);
    let rt = tokenize_all(refs);
    let ngram = corpus_bleu_tokens(&ht, &rt) / 100.0;
    let weighted = weighted_ngram_tokens(&ht, &rt);
    let (mut ast, mut flow) = (0.0, 0.0);
    for (h, r) in hyps.iter().zip(refs) {
        let ha = parse_minilang(h.as_ref());
        let ra = parse_minilang(r.as_ref());
        ast += ast_match(&ha, &ra);
        flow += dataflow_match_ast(&ha, &ra);
    }
    let n = hyps.len() as f64;
    Ok(CodeBleuScore::from_components(
        ngram,
        weighted,
        ast / n,
        flow / n,
    ))
}

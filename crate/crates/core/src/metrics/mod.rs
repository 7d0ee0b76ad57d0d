//! Evaluation metrics: BLEU, smoothed BLEU-4, exact match, CodeBLEU over
//! MiniLang, recall@k and MRR. Every metric is a pure, total function of its
//! inputs.

mod ast;
mod bleu;
mod codebleu;
mod dataflow;
pub mod minilang;
mod retrieval;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use ast::{ast_match, subtrees};
pub use bleu::{
    corpus_bleu, corpus_bleu_tokens, corpus_smoothed_bleu4, smoothed_bleu4, smoothed_bleu4_tokens,
};
pub use codebleu::{
    codebleu, weighted_ngram_tokens, CodeBleuScore, COMPONENT_WEIGHT, KEYWORD_WEIGHT,
};
pub use dataflow::{
    dataflow_graph, dataflow_match, dataflow_match_ast, DataFlowGraph, DefSite, DefUseEdge, Scope,
};
pub use minilang::{parse_minilang, MiniAst, Node, NodeKind};
pub use retrieval::{
    gold_rank, mrr, mrr_from_ranks, random_mrr, recall_at_k, recall_at_k_from_ranks,
};

use crate::corpus::normalize;
use crate::error::{Error, Result};
use crate::text::TextKind;

/// Fraction of pairs whose whitespace-normalized strings are identical.
pub fn exact_match<S: AsRef<str>, T: AsRef<str>>(hyps: &[S], refs: &[T]) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Ok(0.0);
    }
    let hits = hyps
        .iter()
        .zip(refs)
        .filter(|(h, r)| normalize(h.as_ref()) == normalize(r.as_ref()))
        .count();
    Ok(hits as f64 / hyps.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub num_examples: usize,
    /// Corpus BLEU-4, 0..=100.
    pub bleu: f64,
    /// Mean sentence smoothed BLEU-4, 0..=100.
    pub smoothed_bleu4: f64,
    /// Exact match rate, 0..=1.
    pub exact_match: f64,
    /// Present for code targets only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebleu: Option<CodeBleuScore>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub recall_at_k: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
}

impl MetricReport {
    /// Scores generations against references after mapping both to the
    /// canonical token form of `kind`. CodeBLEU is filled in for code.
    pub fn evaluate<S: AsRef<str>, T: AsRef<str>>(
        hyps: &[S],
        refs: &[T],
        kind: TextKind,
    ) -> Result<Self> {
        bleu::check_lengths(hyps.len(), refs.len())?;
        let h: Vec<String> = hyps.iter().map(|t| kind.canonical(t.as_ref())).collect();
        let r: Vec<String> = refs.iter().map(|t| kind.canonical(t.as_ref())).collect();
        Ok(MetricReport {
            num_examples: h.len(),
            bleu: corpus_bleu(&h, &r)?,
            smoothed_bleu4: corpus_smoothed_bleu4(&h, &r)?,
            exact_match: exact_match(&h, &r)?,
            codebleu: match kind {
                TextKind::Code => Some(codebleu(&h, &r)?),
                TextKind::NaturalLanguage => None,
            },
            recall_at_k: BTreeMap::new(),
            mrr: None,
        })
    }

    /// Flat (metric, value) pairs in a stable order.
    pub fn metric_values(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("bleu".to_string(), self.bleu),
            ("smoothed_bleu4".to_string(), self.smoothed_bleu4),
            ("exact_match".to_string(), self.exact_match),
        ];
        if let Some(c) = &self.codebleu {
            out.extend([
                ("codebleu".to_string(), c.codebleu),
                ("codebleu_ngram".to_string(), c.ngram),
                ("codebleu_weighted_ngram".to_string(), c.weighted_ngram),
                ("codebleu_ast".to_string(), c.ast),
                ("codebleu_dataflow".to_string(), c.dataflow),
            ]);
        }
        for (k, v) in &self.recall_at_k {
            out.push((format!("recall@{k}"), *v));
        }
        if let Some(m) = self.mrr {
            out.push(("mrr".to_string(), m));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `metric,value` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (m, v) in self.metric_values() {
            s.push_str(&format!("{m},{v}\n"));
        }
        s
    }
}

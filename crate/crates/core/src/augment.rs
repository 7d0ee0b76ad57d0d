//! Rendering the generator input from a query and its retrieved candidates.
//!
//! ```text
//! case 1:  x [csep] Y1 [csep] Y2 ... [csep] Yk
//! case 2:  x [csep] Y1 [nsep] X1 [csep] Y2 [nsep] X2 ... [csep] Yk [nsep] Xk
//! ```
//!
//! `Yj` is a retrieved candidate and `Xj` its paired counterpart (empty for
//! singletons). The rendered sequence is cut from the right at `max_len`, so
//! the query and the best-ranked candidates survive.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::error::{Error, Result};
use crate::text::{TextKind, TokenSequence, Vocabulary, CSEP, NSEP};

pub const DEFAULT_MAX_LEN: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedCandidate {
    pub primary_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_text: Option<String>,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    None,
    Case1,
    Case2,
}

impl FromStr for AugmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AugmentMode::None),
            "case1" => Ok(AugmentMode::Case1),
            "case2" => Ok(AugmentMode::Case2),
            other => Err(Error::Config(format!("unknown augment mode {other:?}"))),
        }
    }
}

/// Tokenizers for the three kinds of text that appear in a rendered input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderKinds {
    pub query: TextKind,
    pub candidate: TextKind,
    pub pair: TextKind,
}

impl RenderKinds {
    pub fn for_task(task: Task) -> Self {
        RenderKinds {
            query: task.source_kind(),
            candidate: task.target_kind(),
            pair: task.source_kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedInput {
    pub base_text: String,
    pub candidates: Vec<RetrievedCandidate>,
    pub rendered: TokenSequence,
    pub truncated: bool,
    /// Candidates whose tokens were cut, wholly or partly, by truncation.
    pub cut_candidates: usize,
}

pub fn render(
    mode: AugmentMode,
    x: &str,
    candidates: &[RetrievedCandidate],
    vocab: &Vocabulary,
    kinds: RenderKinds,
    max_len: usize,
) -> AugmentedInput {
    let mut ids = vocab.encode_text(kinds.query, x).0;
    // (start offset, end offset) of each candidate's segment
    let mut spans = Vec::new();
    let candidates = match mode {
        AugmentMode::None => &[][..],
        _ => candidates,
    };
    for cand in candidates {
        let start = ids.len();
        ids.push(CSEP);
        ids.extend(vocab.encode_text(kinds.candidate, &cand.primary_text).0);
        if mode == AugmentMode::Case2 {
            ids.push(NSEP);
            if let Some(pair) = &cand.paired_text {
                ids.extend(vocab.encode_text(kinds.pair, pair).0);
            }
        }
        spans.push((start, ids.len()));
    }
    let truncated = ids.len() > max_len;
    ids.truncate(max_len);
    let cut_candidates = spans.iter().filter(|&&(_, end)| end > max_len).count();
    AugmentedInput {
        base_text: x.to_string(),
        candidates: candidates.to_vec(),
        rendered: TokenSequence(ids),
        truncated,
        cut_candidates,
    }
}

pub fn render_case1(
    x: &str,
    candidates: &[RetrievedCandidate],
    vocab: &Vocabulary,
    kinds: RenderKinds,
    max_len: usize,
) -> AugmentedInput {
    render(AugmentMode::Case1, x, candidates, vocab, kinds, max_len)
}

pub fn render_case2(
    x: &str,
    candidates: &[RetrievedCandidate],
    vocab: &Vocabulary,
    kinds: RenderKinds,
    max_len: usize,
) -> AugmentedInput {
    render(AugmentMode::Case2, x, candidates, vocab, kinds, max_len)
}

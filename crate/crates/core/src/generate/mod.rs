//! Generators: the copy-the-top-candidate baseline and a small attention
//! encoder-decoder trained with teacher forcing and decoded greedily.

mod layers;
mod model;
mod train;

pub use layers::{positional_encoding, Attention, FeedForward};
pub use model::{argmax, teacher_forcing, EncoderState, Seq2SeqConfig, Seq2SeqParams};
pub use train::{
    mean_token_loss, train_generator, train_generator_with, GeneratorLog, GeneratorTrainConfig,
};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::RetrievedCandidate;
use crate::error::{Error, Result};
use crate::text::{Vocabulary, BOS, EOS, SPECIAL_TOKENS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorMode {
    Copy,
    Seq2seq,
}

impl FromStr for GeneratorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copy" => Ok(GeneratorMode::Copy),
            "seq2seq" => Ok(GeneratorMode::Seq2seq),
            other => Err(Error::Config(format!("unknown generator mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub max_target_length: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            max_target_length: 128,
            seed: 0,
        }
    }
}

/// The rank-1 candidate's text, or an empty string without candidates.
pub fn copy_top1(candidates: &[RetrievedCandidate]) -> String {
    candidates
        .iter()
        .min_by_key(|c| c.rank)
        .map(|c| c.primary_text.clone())
        .unwrap_or_default()
}

/// Greedy decoding until EOS or the length cap. Returns token ids without BOS/EOS.
pub fn generate_greedy_ids(params: &Seq2SeqParams, input: &[u32], cfg: &DecodeConfig) -> Vec<u32> {
    let enc = params.encode(input);
    let mut prefix = vec![BOS];
    let cap = cfg.max_target_length.max(1);
    while prefix.len() <= cap {
        let logits = params.decode_logits(&enc, &prefix);
        let next = argmax(logits.row(logits.nrows() - 1));
        if next == EOS {
            break;
        }
        prefix.push(next);
    }
    prefix.remove(0);
    prefix
}

/// Greedy decoding detokenized by joining non-special tokens with single spaces.
pub fn generate_greedy(
    params: &Seq2SeqParams,
    input: &[u32],
    vocab: &Vocabulary,
    cfg: &DecodeConfig,
) -> String {
    generate_greedy_ids(params, input, cfg)
        .into_iter()
        .filter_map(|id| vocab.token(id))
        .filter(|t| !SPECIAL_TOKENS.contains(t))
        .collect::<Vec<_>>()
        .join(" ")
}

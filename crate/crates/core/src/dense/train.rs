use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{retriever_loss_and_grads, EncoderConfig, Retriever};
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};
use crate::sparse::{mine_hard_negative, InvertedIndex};
use crate::text::{TextKind, TokenSequence, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct RetrieverTrainConfig {
    pub d_emb: usize,
    pub d_hidden: usize,
    pub d_out: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Append one BM25-mined negative per row to the document side.
    pub hard_negatives: bool,
}

impl Default for RetrieverTrainConfig {
    fn default() -> Self {
        RetrieverTrainConfig {
            d_emb: 64,
            d_hidden: 64,
            d_out: 32,
            batch_size: 16,
            lr: 1e-3,
            epochs: 20,
            seed: 0,
            hard_negatives: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// In-batch loss over fixed sequential batches before the first update.
    pub initial_loss: f64,
    /// Same measurement after training.
    pub final_loss: f64,
    /// Mean training-batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mean in-batch loss over consecutive batches of `batch_size`, without negatives.
pub fn evaluation_loss(
    retriever: &Retriever,
    pairs: &[(TokenSequence, TokenSequence)],
    batch_size: usize,
) -> Result<f64> {
    let mut total = 0.0;
    let mut batches = 0;
    for chunk in pairs.chunks(batch_size.max(2)) {
        if chunk.len() < 2 {
            continue;
        }
        let qs: Vec<&TokenSequence> = chunk.iter().map(|p| &p.0).collect();
        let ds: Vec<&TokenSequence> = chunk.iter().map(|p| &p.1).collect();
        total += retriever_loss_and_grads(retriever, &qs, &ds)?.0;
        batches += 1;
    }
    Ok(if batches == 0 {
        0.0
    } else {
        total / batches as f64
    })
}

/// Trains query and document encoders on (query, positive) text pairs.
pub fn train_retriever(
    pairs: &[(String, String)],
    query_kind: TextKind,
    doc_kind: TextKind,
    vocab: &Vocabulary,
    cfg: &RetrieverTrainConfig,
) -> Result<(Retriever, TrainLog)> {
    if pairs.len() < 2 {
        return Err(Error::BatchTooSmall(pairs.len()));
    }
    let mut batch_size = cfg.batch_size.max(2);
    if pairs.len() < batch_size {
        log::warn!(
            "batch size {} exceeds the {} training pairs; clamping",
            batch_size,
            pairs.len()
        );
        batch_size = pairs.len();
    }
    let encoded: Vec<(TokenSequence, TokenSequence)> = pairs
        .iter()
        .map(|(q, p)| {
            (
                vocab.encode_text(query_kind, q),
                vocab.encode_text(doc_kind, p),
            )
        })
        .collect();

    let negatives: Vec<Option<usize>> = if cfg.hard_negatives {
        let positives: Vec<&str> = pairs.iter().map(|p| p.1.as_str()).collect();
        let index = InvertedIndex::from_texts(positives.iter().copied(), doc_kind);
        pairs
            .iter()
            .map(|(q, p)| mine_hard_negative(&index, &positives, q, p))
            .collect()
    } else {
        vec![None; pairs.len()]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let enc_cfg = EncoderConfig {
        vocab_size: vocab.len(),
        d_emb: cfg.d_emb,
        d_hidden: cfg.d_hidden,
        d_out: cfg.d_out,
    };
    let mut retriever = Retriever::init(enc_cfg, &mut rng);
    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
        &retriever,
    );
    let mut log = TrainLog {
        initial_loss: evaluation_loss(&retriever, &encoded, batch_size)?,
        ..Default::default()
    };

    let mut order: Vec<usize> = (0..encoded.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for batch in order.chunks(batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let queries: Vec<&TokenSequence> = batch.iter().map(|&i| &encoded[i].0).collect();
            let mut docs: Vec<&TokenSequence> = batch.iter().map(|&i| &encoded[i].1).collect();
            docs.extend(
                batch
                    .iter()
                    .filter_map(|&i| negatives[i])
                    .map(|n| &encoded[n].1),
            );
            let (loss, grads) = retriever_loss_and_grads(&retriever, &queries, &docs)?;
            opt.step(&mut retriever, &grads);
            epoch_loss += loss;
            steps += 1;
        }
        log.epoch_losses.push(epoch_loss / steps.max(1) as f64);
    }
    log.final_loss = evaluation_loss(&retriever, &encoded, batch_size)?;
    Ok((retriever, log))
}

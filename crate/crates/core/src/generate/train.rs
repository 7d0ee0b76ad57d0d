use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Seq2SeqConfig, Seq2SeqParams};
use crate::optim::{clip_global_norm, Adam, AdamConfig};
use crate::text::TokenSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTrainConfig {
    pub d_model: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub grad_clip: Option<f64>,
    /// Targets longer than this are cut before training.
    pub max_target_len: usize,
    /// Decay the learning rate linearly to zero over the run.
    pub linear_decay: bool,
}

impl Default for GeneratorTrainConfig {
    fn default() -> Self {
        GeneratorTrainConfig {
            d_model: 64,
            epochs: 30,
            batch_size: 8,
            lr: 1e-3,
            seed: 0,
            grad_clip: Some(1.0),
            max_target_len: 128,
            linear_decay: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeneratorLog {
    /// Mean token loss over the training set before any update.
    pub initial_loss: f64,
    /// Mean training-batch loss per completed epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train_generator(
    examples: &[(TokenSequence, TokenSequence)],
    vocab_size: usize,
    cfg: &GeneratorTrainConfig,
) -> (Seq2SeqParams, GeneratorLog) {
    train_generator_with(examples, vocab_size, cfg, |_, _, _| {
        ControlFlow::Continue(())
    })
}

/// As [`train_generator`], calling `after_epoch(epoch, params, loss)` after
/// each epoch; returning `Break` stops training early.
pub fn train_generator_with<F>(
    examples: &[(TokenSequence, TokenSequence)],
    vocab_size: usize,
    cfg: &GeneratorTrainConfig,
    mut after_epoch: F,
) -> (Seq2SeqParams, GeneratorLog)
where
    F: FnMut(usize, &Seq2SeqParams, f64) -> ControlFlow<()>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Seq2SeqParams::init(Seq2SeqConfig::new(vocab_size, cfg.d_model), &mut rng);
    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
        &params,
    );
    let pairs: Vec<(&[u32], &[u32])> = examples
        .iter()
        .map(|(x, y)| (x.ids(), &y.ids()[..y.len().min(cfg.max_target_len)]))
        .collect();
    let mut log = GeneratorLog {
        initial_loss: mean_token_loss(&params, &pairs),
        ..Default::default()
    };
    if pairs.is_empty() {
        return (params, log);
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let batch_size = cfg.batch_size.max(1);
    let total_steps = cfg.epochs * pairs.len().div_ceil(batch_size);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(batch_size) {
            if cfg.linear_decay {
                opt.set_lr(cfg.lr * (1.0 - step as f64 / total_steps as f64));
            }
            step += 1;
            let batch: Vec<(&[u32], &[u32])> = chunk.iter().map(|&i| pairs[i]).collect();
            let (loss, mut grads) = params.batch_loss_and_grads(&batch);
            if let Some(max_norm) = cfg.grad_clip {
                clip_global_norm(&mut grads, max_norm);
            }
            opt.step(&mut params, &grads);
            total += loss;
            steps += 1;
        }
        let epoch_loss = total / steps as f64;
        log.epoch_losses.push(epoch_loss);
        if after_epoch(epoch, &params, epoch_loss).is_break() {
            break;
        }
    }
    (params, log)
}

/// Token-weighted mean teacher-forced loss.
pub fn mean_token_loss(params: &Seq2SeqParams, pairs: &[(&[u32], &[u32])]) -> f64 {
    let mut total = 0.0;
    let mut tokens = 0;
    for (x, y) in pairs {
        total += params.sequence_loss(x, y) * (y.len() + 1) as f64;
        tokens += y.len() + 1;
    }
    if tokens == 0 {
        0.0
    } else {
        total / tokens as f64
    }
}

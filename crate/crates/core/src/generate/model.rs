use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use super::layers::{
    gaussian, positional_encoding, softmax_rows, Attention, AttentionCache, FeedForward,
    FeedForwardCache,
};
use crate::error::{Error, Result};
use crate::params::{flat1, flat1_mut, flat2, flat2_mut, read_header, write_params, ParamGroups};
use crate::text::{BOS, EOS, PAD, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seq2SeqConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub d_ff: usize,
}

impl Seq2SeqConfig {
    pub fn new(vocab_size: usize, d_model: usize) -> Self {
        Seq2SeqConfig {
            vocab_size,
            d_model,
            d_ff: 4 * d_model,
        }
    }
}

/// One-layer encoder-decoder. The token embedding is shared between the
/// encoder and decoder inputs; the output projection is separate.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqParams {
    pub embedding: Array2<f64>,
    pub enc_attn: Attention,
    pub enc_ff: FeedForward,
    pub dec_self_attn: Attention,
    pub dec_cross_attn: Attention,
    pub dec_ff: FeedForward,
    pub output: Array2<f64>,
}

macro_rules! attention_groups {
    ($v:ident, $a:expr, $pre:literal) => {
        $v.push((concat!($pre, ".wq"), flat2(&$a.wq)));
        $v.push((concat!($pre, ".wk"), flat2(&$a.wk)));
        $v.push((concat!($pre, ".wv"), flat2(&$a.wv)));
        $v.push((concat!($pre, ".wo"), flat2(&$a.wo)));
    };
}

macro_rules! attention_groups_mut {
    ($v:ident, $a:expr, $pre:literal) => {
        $v.push((concat!($pre, ".wq"), flat2_mut(&mut $a.wq)));
        $v.push((concat!($pre, ".wk"), flat2_mut(&mut $a.wk)));
        $v.push((concat!($pre, ".wv"), flat2_mut(&mut $a.wv)));
        $v.push((concat!($pre, ".wo"), flat2_mut(&mut $a.wo)));
    };
}

impl ParamGroups for Seq2SeqParams {
    fn groups(&self) -> Vec<(&'static str, &[f64])> {
        let mut v = vec![("embedding", flat2(&self.embedding))];
        attention_groups!(v, self.enc_attn, "enc_attn");
        v.push(("enc_ff.w1", flat2(&self.enc_ff.w1)));
        v.push(("enc_ff.b1", flat1(&self.enc_ff.b1)));
        v.push(("enc_ff.w2", flat2(&self.enc_ff.w2)));
        v.push(("enc_ff.b2", flat1(&self.enc_ff.b2)));
        attention_groups!(v, self.dec_self_attn, "dec_self_attn");
        attention_groups!(v, self.dec_cross_attn, "dec_cross_attn");
        v.push(("dec_ff.w1", flat2(&self.dec_ff.w1)));
        v.push(("dec_ff.b1", flat1(&self.dec_ff.b1)));
        v.push(("dec_ff.w2", flat2(&self.dec_ff.w2)));
        v.push(("dec_ff.b2", flat1(&self.dec_ff.b2)));
        v.push(("output", flat2(&self.output)));
        v
    }

    fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut v = vec![("embedding", flat2_mut(&mut self.embedding))];
        attention_groups_mut!(v, self.enc_attn, "enc_attn");
        v.push(("enc_ff.w1", flat2_mut(&mut self.enc_ff.w1)));
        v.push(("enc_ff.b1", flat1_mut(&mut self.enc_ff.b1)));
        v.push(("enc_ff.w2", flat2_mut(&mut self.enc_ff.w2)));
        v.push(("enc_ff.b2", flat1_mut(&mut self.enc_ff.b2)));
        attention_groups_mut!(v, self.dec_self_attn, "dec_self_attn");
        attention_groups_mut!(v, self.dec_cross_attn, "dec_cross_attn");
        v.push(("dec_ff.w1", flat2_mut(&mut self.dec_ff.w1)));
        v.push(("dec_ff.b1", flat1_mut(&mut self.dec_ff.b1)));
        v.push(("dec_ff.w2", flat2_mut(&mut self.dec_ff.w2)));
        v.push(("dec_ff.b2", flat1_mut(&mut self.dec_ff.b2)));
        v.push(("output", flat2_mut(&mut self.output)));
        v
    }
}

/// Encoder activations reused across decoding steps.
pub struct EncoderState {
    ids: Vec<u32>,
    attn: AttentionCache,
    ff: FeedForwardCache,
    pub(crate) output: Array2<f64>,
}

struct DecoderCache {
    ids: Vec<u32>,
    self_attn: AttentionCache,
    cross_attn: AttentionCache,
    ff: FeedForwardCache,
    hidden: Array2<f64>,
}

const S2S_MAGIC: &[u8; 4] = b"RGS2";

impl Seq2SeqParams {
    pub fn zeros(cfg: Seq2SeqConfig) -> Self {
        let d = cfg.d_model;
        Seq2SeqParams {
            embedding: Array2::zeros((cfg.vocab_size, d)),
            enc_attn: Attention::zeros(d),
            enc_ff: FeedForward::zeros(d, cfg.d_ff),
            dec_self_attn: Attention::zeros(d),
            dec_cross_attn: Attention::zeros(d),
            dec_ff: FeedForward::zeros(d, cfg.d_ff),
            output: Array2::zeros((d, cfg.vocab_size)),
        }
    }

    pub fn init<R: Rng>(cfg: Seq2SeqConfig, rng: &mut R) -> Self {
        let d = cfg.d_model;
        Seq2SeqParams {
            embedding: gaussian(rng, cfg.vocab_size, d, 1.0),
            enc_attn: Attention::init(d, rng),
            enc_ff: FeedForward::init(d, cfg.d_ff, rng),
            dec_self_attn: Attention::init(d, rng),
            dec_cross_attn: Attention::init(d, rng),
            dec_ff: FeedForward::init(d, cfg.d_ff, rng),
            output: gaussian(rng, d, cfg.vocab_size, 1.0 / (d as f64).sqrt()),
        }
    }

    pub fn config(&self) -> Seq2SeqConfig {
        Seq2SeqConfig {
            vocab_size: self.embedding.nrows(),
            d_model: self.embedding.ncols(),
            d_ff: self.enc_ff.w1.ncols(),
        }
    }

    fn clamp_ids(&self, ids: &[u32]) -> Vec<u32> {
        let v = self.embedding.nrows() as u32;
        ids.iter().map(|&i| if i < v { i } else { UNK }).collect()
    }

    fn embed(&self, ids: &[u32]) -> Array2<f64> {
        let mut x = positional_encoding(ids.len(), self.embedding.ncols());
        for (mut row, &id) in x.rows_mut().into_iter().zip(ids) {
            row += &self.embedding.row(id as usize);
        }
        x
    }

    /// Runs the encoder. An empty input is encoded as a single PAD token.
    pub fn encode(&self, input: &[u32]) -> EncoderState {
        let ids = if input.is_empty() {
            vec![PAD]
        } else {
            self.clamp_ids(input)
        };
        let x = self.embed(&ids);
        let (a, attn) = self.enc_attn.forward(&x, &x, false);
        let h = x + a;
        let (f, ff) = self.enc_ff.forward(&h);
        let output = h + f;
        EncoderState {
            ids,
            attn,
            ff,
            output,
        }
    }

    fn decode_hidden(&self, enc: &EncoderState, prefix: &[u32]) -> DecoderCache {
        let ids = self.clamp_ids(prefix);
        let y = self.embed(&ids);
        let (s, self_attn) = self.dec_self_attn.forward(&y, &y, true);
        let z1 = y + s;
        let (c, cross_attn) = self.dec_cross_attn.forward(&z1, &enc.output, false);
        let z2 = z1 + c;
        let (f, ff) = self.dec_ff.forward(&z2);
        let hidden = z2 + f;
        DecoderCache {
            ids,
            self_attn,
            cross_attn,
            ff,
            hidden,
        }
    }

    /// Logits for every prefix position (rows) over the vocabulary (columns).
    pub fn decode_logits(&self, enc: &EncoderState, prefix: &[u32]) -> Array2<f64> {
        self.decode_hidden(enc, prefix).hidden.dot(&self.output)
    }

    pub fn forward(&self, input: &[u32], prefix: &[u32]) -> Array2<f64> {
        self.decode_logits(&self.encode(input), prefix)
    }

    /// Summed token cross-entropy of `labels` given `prefix` (equal lengths).
    /// When `grads` is given, accumulates `scale * d(sum)/d(params)` into it.
    pub fn cross_entropy(
        &self,
        input: &[u32],
        prefix: &[u32],
        labels: &[u32],
        scale: f64,
        grads: Option<&mut Seq2SeqParams>,
    ) -> f64 {
        assert_eq!(prefix.len(), labels.len(), "prefix and labels must align");
        let enc = self.encode(input);
        let dec = self.decode_hidden(&enc, prefix);
        let mut probs = dec.hidden.dot(&self.output);
        softmax_rows(&mut probs);
        let labels = self.clamp_ids(labels);
        let loss: f64 = labels
            .iter()
            .enumerate()
            .map(|(t, &l)| -probs[[t, l as usize]].ln())
            .sum();
        if let Some(grads) = grads {
            let mut d_logits = probs;
            for (t, &l) in labels.iter().enumerate() {
                d_logits[[t, l as usize]] -= 1.0;
            }
            d_logits *= scale;
            self.backward(&enc, &dec, &d_logits, grads);
        }
        loss
    }

    fn backward(
        &self,
        enc: &EncoderState,
        dec: &DecoderCache,
        d_logits: &Array2<f64>,
        g: &mut Seq2SeqParams,
    ) {
        g.output += &dec.hidden.t().dot(d_logits);
        let d_z3 = d_logits.dot(&self.output.t());
        let d_z2 = self.dec_ff.backward(&dec.ff, &d_z3, &mut g.dec_ff) + &d_z3;
        let (d_z1_cross, d_enc_out) =
            self.dec_cross_attn
                .backward(&dec.cross_attn, &d_z2, &mut g.dec_cross_attn);
        let d_z1 = d_z1_cross + &d_z2;
        let (d_yq, d_ykv) =
            self.dec_self_attn
                .backward(&dec.self_attn, &d_z1, &mut g.dec_self_attn);
        let d_y = d_yq + d_ykv + &d_z1;
        scatter_rows(&mut g.embedding, &dec.ids, &d_y);

        let d_h = self.enc_ff.backward(&enc.ff, &d_enc_out, &mut g.enc_ff) + &d_enc_out;
        let (d_xq, d_xkv) = self.enc_attn.backward(&enc.attn, &d_h, &mut g.enc_attn);
        let d_x = d_xq + d_xkv + &d_h;
        scatter_rows(&mut g.embedding, &enc.ids, &d_x);
    }

    /// Teacher-forced mean token cross-entropy over a batch of
    /// (input, target) pairs, with gradients. Targets are BOS-prefixed on the
    /// decoder side and EOS-terminated on the label side.
    pub fn batch_loss_and_grads(&self, batch: &[(&[u32], &[u32])]) -> (f64, Seq2SeqParams) {
        let mut grads = Seq2SeqParams::zeros(self.config());
        let total_tokens: usize = batch.iter().map(|(_, t)| t.len() + 1).sum();
        let scale = 1.0 / total_tokens.max(1) as f64;
        let mut loss = 0.0;
        for (input, target) in batch {
            let (prefix, labels) = teacher_forcing(target);
            loss += self.cross_entropy(input, &prefix, &labels, scale, Some(&mut grads));
        }
        (loss * scale, grads)
    }

    /// Mean per-token teacher-forced loss for one pair.
    pub fn sequence_loss(&self, input: &[u32], target: &[u32]) -> f64 {
        let (prefix, labels) = teacher_forcing(target);
        self.cross_entropy(input, &prefix, &labels, 1.0, None) / labels.len() as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let c = self.config();
        let dims = [c.vocab_size, c.d_model, c.d_ff].map(|d| d as u32);
        write_params(path, S2S_MAGIC, &dims, &[self])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (dims, mut reader) = read_header(path, S2S_MAGIC)?;
        let [vocab_size, d_model, d_ff] = <[u32; 3]>::try_from(dims.as_slice())
            .map_err(|_| Error::BadParamFile {
                path: path.to_path_buf(),
                reason: format!("expected 3 dims, found {}", dims.len()),
            })?
            .map(|d| d as usize);
        let mut params = Seq2SeqParams::zeros(Seq2SeqConfig {
            vocab_size,
            d_model,
            d_ff,
        });
        reader.fill(&mut params)?;
        reader.finish()?;
        Ok(params)
    }
}

/// `([BOS] + target, target + [EOS])`
pub fn teacher_forcing(target: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut prefix = Vec::with_capacity(target.len() + 1);
    prefix.push(BOS);
    prefix.extend_from_slice(target);
    let mut labels = target.to_vec();
    labels.push(EOS);
    (prefix, labels)
}

fn scatter_rows(table: &mut Array2<f64>, ids: &[u32], grads: &Array2<f64>) {
    for (&id, row) in ids.iter().zip(grads.rows()) {
        table.row_mut(id as usize).scaled_add(1.0, &row);
    }
}

/// Index of the largest logit; the lowest id wins ties.
pub fn argmax(row: ArrayView1<f64>) -> u32 {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best as u32
}

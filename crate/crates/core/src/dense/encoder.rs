use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EmbeddingVector;
use crate::error::{Error, Result};
use crate::params::{flat1, flat1_mut, flat2, flat2_mut, read_header, write_params, ParamGroups};
use crate::text::{TokenSequence, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_emb: usize,
    pub d_hidden: usize,
    pub d_out: usize,
}

impl EncoderConfig {
    pub fn new(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            d_emb: 64,
            d_hidden: 64,
            d_out: 32,
        }
    }
}

/// `v = tanh(meanpool(E[tokens]) W1 + b1) W2 + b2`
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub embedding: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl ParamGroups for EncoderParams {
    fn groups(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("embedding", flat2(&self.embedding)),
            ("w1", flat2(&self.w1)),
            ("b1", flat1(&self.b1)),
            ("w2", flat2(&self.w2)),
            ("b2", flat1(&self.b2)),
        ]
    }

    fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("embedding", flat2_mut(&mut self.embedding)),
            ("w1", flat2_mut(&mut self.w1)),
            ("b1", flat1_mut(&mut self.b1)),
            ("w2", flat2_mut(&mut self.w2)),
            ("b2", flat1_mut(&mut self.b2)),
        ]
    }
}

pub struct EncoderCache {
    tokens: Vec<Vec<u32>>,
    pooled: Array2<f64>,
    hidden: Array2<f64>,
}

fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

impl EncoderParams {
    pub fn zeros(cfg: EncoderConfig) -> Self {
        EncoderParams {
            embedding: Array2::zeros((cfg.vocab_size, cfg.d_emb)),
            w1: Array2::zeros((cfg.d_emb, cfg.d_hidden)),
            b1: Array1::zeros(cfg.d_hidden),
            w2: Array2::zeros((cfg.d_hidden, cfg.d_out)),
            b2: Array1::zeros(cfg.d_out),
        }
    }

    pub fn init<R: Rng>(cfg: EncoderConfig, rng: &mut R) -> Self {
        EncoderParams {
            embedding: gaussian(rng, cfg.vocab_size, cfg.d_emb, 1.0),
            w1: gaussian(
                rng,
                cfg.d_emb,
                cfg.d_hidden,
                1.0 / (cfg.d_emb as f64).sqrt(),
            ),
            b1: Array1::zeros(cfg.d_hidden),
            w2: gaussian(
                rng,
                cfg.d_hidden,
                cfg.d_out,
                1.0 / (cfg.d_hidden as f64).sqrt(),
            ),
            b2: Array1::zeros(cfg.d_out),
        }
    }

    pub fn config(&self) -> EncoderConfig {
        EncoderConfig {
            vocab_size: self.embedding.nrows(),
            d_emb: self.embedding.ncols(),
            d_hidden: self.w1.ncols(),
            d_out: self.w2.ncols(),
        }
    }

    fn pool_tokens(&self, seq: &TokenSequence) -> Vec<u32> {
        let vocab = self.embedding.nrows() as u32;
        let ids: Vec<u32> = seq
            .ids()
            .iter()
            .map(|&i| if i < vocab { i } else { crate::text::UNK })
            .collect();
        if ids.is_empty() {
            vec![PAD]
        } else {
            ids
        }
    }

    pub fn forward_batch(&self, seqs: &[&TokenSequence]) -> (Array2<f64>, EncoderCache) {
        let d_emb = self.embedding.ncols();
        let tokens: Vec<Vec<u32>> = seqs.iter().map(|s| self.pool_tokens(s)).collect();
        let mut pooled = Array2::zeros((seqs.len(), d_emb));
        for (row, ids) in pooled.rows_mut().into_iter().zip(&tokens) {
            let mut row = row;
            for &id in ids {
                row += &self.embedding.row(id as usize);
            }
            row /= ids.len() as f64;
        }
        let mut hidden = pooled.dot(&self.w1) + &self.b1;
        hidden.mapv_inplace(f64::tanh);
        let out = hidden.dot(&self.w2) + &self.b2;
        (
            out,
            EncoderCache {
                tokens,
                pooled,
                hidden,
            },
        )
    }

    /// Accumulates parameter gradients for `d_out` (rows aligned with the forward batch).
    pub fn backward_batch(
        &self,
        cache: &EncoderCache,
        d_out: &Array2<f64>,
        grads: &mut EncoderParams,
    ) {
        grads.w2 += &cache.hidden.t().dot(d_out);
        grads.b2 += &d_out.sum_axis(Axis(0));
        let mut d_pre = d_out.dot(&self.w2.t());
        d_pre.zip_mut_with(&cache.hidden, |g, &h| *g *= 1.0 - h * h);
        grads.w1 += &cache.pooled.t().dot(&d_pre);
        grads.b1 += &d_pre.sum_axis(Axis(0));
        let d_pooled = d_pre.dot(&self.w1.t());
        for (ids, d_row) in cache.tokens.iter().zip(d_pooled.rows()) {
            let scale = 1.0 / ids.len() as f64;
            for &id in ids {
                grads
                    .embedding
                    .row_mut(id as usize)
                    .scaled_add(scale, &d_row);
            }
        }
    }

    pub fn encode(&self, tokens: &TokenSequence) -> EmbeddingVector {
        let (out, _) = self.forward_batch(&[tokens]);
        EmbeddingVector(out.row(0).to_vec())
    }

    pub fn encode_all(&self, seqs: &[TokenSequence]) -> Array2<f64> {
        let refs: Vec<&TokenSequence> = seqs.iter().collect();
        let d_out = self.w2.ncols();
        if refs.is_empty() {
            return Array2::zeros((0, d_out));
        }
        let mut out = Array2::zeros((refs.len(), d_out));
        for (chunk_idx, chunk) in refs.chunks(256).enumerate() {
            let (vecs, _) = self.forward_batch(chunk);
            let start = chunk_idx * 256;
            out.slice_mut(ndarray::s![start..start + chunk.len(), ..])
                .assign(&vecs);
        }
        out
    }
}

/// The query encoder and the document encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Retriever {
    pub query: EncoderParams,
    pub doc: EncoderParams,
}

const RETRIEVER_MAGIC: &[u8; 4] = b"RGRT";

impl Retriever {
    pub fn init<R: Rng>(cfg: EncoderConfig, rng: &mut R) -> Self {
        let query = EncoderParams::init(cfg, rng);
        let doc = EncoderParams::init(cfg, rng);
        Retriever { query, doc }
    }

    pub fn config(&self) -> EncoderConfig {
        self.query.config()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let c = self.config();
        let dims = [c.vocab_size, c.d_emb, c.d_hidden, c.d_out].map(|d| d as u32);
        write_params(path, RETRIEVER_MAGIC, &dims, &[&self.query, &self.doc])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (dims, mut reader) = read_header(path, RETRIEVER_MAGIC)?;
        let [vocab_size, d_emb, d_hidden, d_out] = <[u32; 4]>::try_from(dims.as_slice())
            .map_err(|_| Error::BadParamFile {
                path: path.to_path_buf(),
                reason: format!("expected 4 dims, found {}", dims.len()),
            })?
            .map(|d| d as usize);
        let cfg = EncoderConfig {
            vocab_size,
            d_emb,
            d_hidden,
            d_out,
        };
        let mut query = EncoderParams::zeros(cfg);
        let mut doc = EncoderParams::zeros(cfg);
        reader.fill(&mut query)?;
        reader.fill(&mut doc)?;
        reader.finish()?;
        Ok(Retriever { query, doc })
    }
}

impl ParamGroups for Retriever {
    fn groups(&self) -> Vec<(&'static str, &[f64])> {
        let mut g = prefixed(self.query.groups(), &QUERY_NAMES);
        g.extend(prefixed(self.doc.groups(), &DOC_NAMES));
        g
    }

    fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut g = prefixed(self.query.groups_mut(), &QUERY_NAMES);
        g.extend(prefixed(self.doc.groups_mut(), &DOC_NAMES));
        g
    }
}

const QUERY_NAMES: [&str; 5] = [
    "query.embedding",
    "query.w1",
    "query.b1",
    "query.w2",
    "query.b2",
];
const DOC_NAMES: [&str; 5] = ["doc.embedding", "doc.w1", "doc.b1", "doc.w2", "doc.b2"];

fn prefixed<T>(
    groups: Vec<(&'static str, T)>,
    names: &[&'static str; 5],
) -> Vec<(&'static str, T)> {
    groups
        .into_iter()
        .zip(names)
        .map(|((_, g), n)| (*n, g))
        .collect()
}

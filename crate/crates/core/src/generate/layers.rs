//! Attention and feed-forward blocks with hand-written backward passes.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub(crate) fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

/// Sinusoidal position encodings for positions `0..len`.
pub fn positional_encoding(len: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, d), |(pos, i)| {
        let pair = (i / 2) as f64;
        let angle = pos as f64 / 10_000f64.powf(2.0 * pair / d as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_K: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Single-head scaled dot-product attention with output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
}

pub(crate) struct AttentionCache {
    xq: Array2<f64>,
    xkv: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Array2<f64>,
    ctx: Array2<f64>,
}

impl Attention {
    pub fn zeros(d: usize) -> Self {
        Attention {
            wq: Array2::zeros((d, d)),
            wk: Array2::zeros((d, d)),
            wv: Array2::zeros((d, d)),
            wo: Array2::zeros((d, d)),
        }
    }

    pub fn init<R: Rng>(d: usize, rng: &mut R) -> Self {
        let std = 1.0 / (d as f64).sqrt();
        Attention {
            wq: gaussian(rng, d, d, std),
            wk: gaussian(rng, d, d, std),
            wv: gaussian(rng, d, d, std),
            wo: gaussian(rng, d, d, std),
        }
    }

    /// `causal` masks key positions after each query position.
    pub(crate) fn forward(
        &self,
        xq: &Array2<f64>,
        xkv: &Array2<f64>,
        causal: bool,
    ) -> (Array2<f64>, AttentionCache) {
        let scale = 1.0 / (self.wq.ncols() as f64).sqrt();
        let q = xq.dot(&self.wq);
        let k = xkv.dot(&self.wk);
        let v = xkv.dot(&self.wv);
        let mut probs = q.dot(&k.t()) * scale;
        if causal {
            for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
                row.iter_mut()
                    .skip(i + 1)
                    .for_each(|s| *s = f64::NEG_INFINITY);
            }
        }
        softmax_rows(&mut probs);
        let ctx = probs.dot(&v);
        let out = ctx.dot(&self.wo);
        (
            out,
            AttentionCache {
                xq: xq.clone(),
                xkv: xkv.clone(),
                q,
                k,
                v,
                probs,
                ctx,
            },
        )
    }

    /// Returns gradients for the query-side and key/value-side inputs.
    pub(crate) fn backward(
        &self,
        cache: &AttentionCache,
        d_out: &Array2<f64>,
        grads: &mut Attention,
    ) -> (Array2<f64>, Array2<f64>) {
        let scale = 1.0 / (self.wq.ncols() as f64).sqrt();
        grads.wo += &cache.ctx.t().dot(d_out);
        let d_ctx = d_out.dot(&self.wo.t());
        let d_probs = d_ctx.dot(&cache.v.t());
        let d_v = cache.probs.t().dot(&d_ctx);
        let mut d_scores = &cache.probs * &d_probs;
        let row_dot = d_scores.sum_axis(Axis(1));
        for ((mut ds, p), dot) in d_scores
            .rows_mut()
            .into_iter()
            .zip(cache.probs.rows())
            .zip(row_dot)
        {
            ds.zip_mut_with(&p, |g, &pi| *g -= pi * dot);
        }
        d_scores *= scale;
        let d_q = d_scores.dot(&cache.k);
        let d_k = d_scores.t().dot(&cache.q);
        grads.wq += &cache.xq.t().dot(&d_q);
        grads.wk += &cache.xkv.t().dot(&d_k);
        grads.wv += &cache.xkv.t().dot(&d_v);
        let d_xq = d_q.dot(&self.wq.t());
        let d_xkv = d_k.dot(&self.wk.t()) + d_v.dot(&self.wv.t());
        (d_xq, d_xkv)
    }
}

/// Position-wise `gelu(x W1 + b1) W2 + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

pub(crate) struct FeedForwardCache {
    x: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
}

impl FeedForward {
    pub fn zeros(d: usize, hidden: usize) -> Self {
        FeedForward {
            w1: Array2::zeros((d, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, d)),
            b2: Array1::zeros(d),
        }
    }

    pub fn init<R: Rng>(d: usize, hidden: usize, rng: &mut R) -> Self {
        FeedForward {
            w1: gaussian(rng, d, hidden, 1.0 / (d as f64).sqrt()),
            b1: Array1::zeros(hidden),
            w2: gaussian(rng, hidden, d, 1.0 / (hidden as f64).sqrt()),
            b2: Array1::zeros(d),
        }
    }

    pub(crate) fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, FeedForwardCache) {
        let pre = x.dot(&self.w1) + &self.b1;
        let act = pre.mapv(gelu);
        let out = act.dot(&self.w2) + &self.b2;
        (
            out,
            FeedForwardCache {
                x: x.clone(),
                pre,
                act,
            },
        )
    }

    pub(crate) fn backward(
        &self,
        cache: &FeedForwardCache,
        d_out: &Array2<f64>,
        grads: &mut FeedForward,
    ) -> Array2<f64> {
        grads.w2 += &cache.act.t().dot(d_out);
        grads.b2 += &d_out.sum_axis(Axis(0));
        let mut d_pre = d_out.dot(&self.w2.t());
        d_pre.zip_mut_with(&cache.pre, |g, &p| *g *= gelu_grad(p));
        grads.w1 += &cache.x.t().dot(&d_pre);
        grads.b1 += &d_pre.sum_axis(Axis(0));
        d_pre.dot(&self.w1.t())
    }
}

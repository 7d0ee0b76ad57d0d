use ndarray::Array2;

use super::{EmbeddingVector, EncoderParams, Retriever};
use crate::error::{Error, Result};
use crate::text::TokenSequence;

#[derive(Debug, Clone)]
pub struct InBatchLoss {
    pub loss: f64,
    pub query_grads: Vec<EmbeddingVector>,
    pub doc_grads: Vec<EmbeddingVector>,
}

/// Mean over rows of `-log softmax(Q D^T)[i, i]`.
///
/// `docs` holds the B positives first (row i's positive is column i),
/// optionally followed by extra negatives that every row scores against.
/// Returns the loss and its gradients with respect to `queries` and `docs`.
pub fn in_batch_loss_matrix(
    queries: &Array2<f64>,
    docs: &Array2<f64>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let b = queries.nrows();
    if b < 2 {
        return Err(Error::BatchTooSmall(b));
    }
    if docs.nrows() < b {
        return Err(Error::DimensionMismatch {
            left: b,
            right: docs.nrows(),
        });
    }
    if queries.ncols() != docs.ncols() {
        return Err(Error::DimensionMismatch {
            left: queries.ncols(),
            right: docs.ncols(),
        });
    }
    let scores = queries.dot(&docs.t());
    let mut d_scores = Array2::zeros(scores.raw_dim());
    let mut loss = 0.0;
    for (i, (row, mut d_row)) in scores
        .rows()
        .into_iter()
        .zip(d_scores.rows_mut())
        .enumerate()
    {
        let (arg, max) =
            row.iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, s)| {
                    if s > best.1 {
                        (j, s)
                    } else {
                        best
                    }
                });
        // log-sum-exp as max + ln(1 + rest) keeps precision when one score dominates
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != arg)
            .map(|(_, s)| (s - max).exp())
            .sum();
        let denom = 1.0 + rest;
        loss += (max - row[i]) + rest.ln_1p();
        for (j, s) in row.iter().enumerate() {
            d_row[j] = (s - max).exp() / denom / b as f64;
        }
        d_row[i] -= 1.0 / b as f64;
    }
    let d_queries = d_scores.dot(docs);
    let d_docs = d_scores.t().dot(queries);
    Ok((loss / b as f64, d_queries, d_docs))
}

fn stack(vecs: &[EmbeddingVector]) -> Result<Array2<f64>> {
    let dim = vecs.first().map_or(0, EmbeddingVector::dim);
    if let Some(bad) = vecs.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: bad.dim(),
        });
    }
    let flat: Vec<f64> = vecs.iter().flat_map(|v| v.0.iter().copied()).collect();
    Ok(Array2::from_shape_vec((vecs.len(), dim), flat).expect("shape checked"))
}

fn unstack(m: &Array2<f64>) -> Vec<EmbeddingVector> {
    m.rows()
        .into_iter()
        .map(|r| EmbeddingVector(r.to_vec()))
        .collect()
}

pub fn in_batch_loss(queries: &[EmbeddingVector], docs: &[EmbeddingVector]) -> Result<InBatchLoss> {
    let (loss, dq, dd) = in_batch_loss_matrix(&stack(queries)?, &stack(docs)?)?;
    Ok(InBatchLoss {
        loss,
        query_grads: unstack(&dq),
        doc_grads: unstack(&dd),
    })
}

/// Loss and full parameter gradients for one batch. `docs[..queries.len()]`
/// are the positives; anything after them is an extra negative.
pub fn retriever_loss_and_grads(
    retriever: &Retriever,
    queries: &[&TokenSequence],
    docs: &[&TokenSequence],
) -> Result<(f64, Retriever)> {
    let (q_vecs, q_cache) = retriever.query.forward_batch(queries);
    let (d_vecs, d_cache) = retriever.doc.forward_batch(docs);
    let (loss, dq, dd) = in_batch_loss_matrix(&q_vecs, &d_vecs)?;
    let mut grads = Retriever {
        query: EncoderParams::zeros(retriever.query.config()),
        doc: EncoderParams::zeros(retriever.doc.config()),
    };
    retriever
        .query
        .backward_batch(&q_cache, &dq, &mut grads.query);
    retriever.doc.backward_batch(&d_cache, &dd, &mut grads.doc);
    Ok((loss, grads))
}

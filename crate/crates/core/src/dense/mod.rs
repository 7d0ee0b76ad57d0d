//! Bi-encoder dense retriever.
//!
//! Queries and documents are embedded by two independently initialised
//! encoders; relevance is the raw inner product of the two vectors. Training
//! treats the other positives of a mini-batch as negatives and optionally adds
//! one BM25-mined hard negative per row.

mod encoder;
mod index;
mod loss;
mod train;

pub use encoder::{EncoderCache, EncoderConfig, EncoderParams, Retriever};
pub use index::DenseIndex;
pub use loss::{in_batch_loss, in_batch_loss_matrix, retriever_loss_and_grads, InBatchLoss};
pub use train::{train_retriever, RetrieverTrainConfig, TrainLog};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(v: Vec<f64>) -> Self {
        EmbeddingVector(v)
    }
}

/// Inner product of a query and a document embedding.
pub fn sim(q: &EmbeddingVector, p: &EmbeddingVector) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            left: q.dim(),
            right: p.dim(),
        });
    }
    Ok(q.0.iter().zip(&p.0).map(|(a, b)| a * b).sum())
}

//! Retrieval-augmented code generation and summarization at desk scale.
//!
//! The crate is organised as the stages of the pipeline:
//!
//! - [`corpus`]: retrieval databases of code and summary documents
//! - [`text`]: tokenizers and the shared vocabulary
//! - [`sparse`]: BM25 over an inverted index
//! - [`dense`]: the trainable bi-encoder retriever and exact inner-product search
//! - [`augment`]: rendering the query plus retrieved candidates into one input
//! - [`generate`]: copy baseline and a small attention encoder-decoder
//! - [`metrics`]: BLEU, smoothed BLEU-4, exact match, CodeBLEU, recall@k, MRR
//! - [`pipeline`]: configuration, stage orchestration and experiment sweeps

pub mod augment;
pub mod corpus;
pub mod dense;
pub mod error;
pub mod generate;
pub mod metrics;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod sparse;
pub mod text;

pub use augment::{AugmentMode, AugmentedInput, RetrievedCandidate};
pub use corpus::{DbKind, DocKind, Document, RetrievalDatabase};
pub use dense::{DenseIndex, EmbeddingVector, EncoderConfig, EncoderParams, Retriever};
pub use error::{Error, Result};
pub use generate::{DecodeConfig, Seq2SeqConfig, Seq2SeqParams};
pub use metrics::{CodeBleuScore, MetricReport};
pub use pipeline::{ExperimentResult, PipelineConfig};
pub use sparse::InvertedIndex;
pub use text::{TextKind, TokenSequence, Vocabulary};

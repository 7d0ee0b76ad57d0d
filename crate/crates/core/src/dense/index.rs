use std::path::Path;

use ndarray::{Array1, Array2};

use super::{EmbeddingVector, Retriever};
use crate::error::{Error, Result};
use crate::params::{flat2, flat2_mut, read_header, write_params, ParamGroups};
use crate::sparse::sort_hits;
use crate::text::TokenSequence;

/// Document embeddings for exact maximum inner product search.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    vectors: Array2<f64>,
    ordinals: Vec<usize>,
}

const INDEX_MAGIC: &[u8; 4] = b"RGIX";

impl ParamGroups for DenseIndex {
    fn groups(&self) -> Vec<(&'static str, &[f64])> {
        vec![("vectors", flat2(&self.vectors))]
    }

    fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![("vectors", flat2_mut(&mut self.vectors))]
    }
}

impl DenseIndex {
    pub fn new(vectors: Array2<f64>, ordinals: Vec<usize>) -> Result<Self> {
        if vectors.nrows() != ordinals.len() {
            return Err(Error::DimensionMismatch {
                left: vectors.nrows(),
                right: ordinals.len(),
            });
        }
        Ok(DenseIndex {
            vectors: vectors.as_standard_layout().into_owned(),
            ordinals,
        })
    }

    /// Encodes every document with the document encoder; ordinals are 0..N.
    pub fn build(retriever: &Retriever, docs: &[TokenSequence]) -> Self {
        DenseIndex {
            vectors: retriever.doc.encode_all(docs),
            ordinals: (0..docs.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ordinals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn ordinals(&self) -> &[usize] {
        &self.ordinals
    }

    /// Exact top-k by inner product; ties go to the lower ordinal.
    pub fn top_k(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(usize, f64)>> {
        if query.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: query.dim(),
                right: self.dim(),
            });
        }
        if k == 0 || self.is_empty() {
            return Ok(Vec::new());
        }
        let scores = self.vectors.dot(&Array1::from(query.0.clone()));
        let mut hits: Vec<(usize, f64)> = self.ordinals.iter().copied().zip(scores).collect();
        let better = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, better);
            hits.truncate(k);
        }
        sort_hits(&mut hits);
        Ok(hits)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.ordinals.iter().enumerate().any(|(i, &o)| i != o) {
            return Err(Error::Config(
                "only indexes with ordinals 0..N can be saved".into(),
            ));
        }
        let dims = [self.len() as u32, self.dim() as u32];
        write_params(path, INDEX_MAGIC, &dims, &[self])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (dims, mut reader) = read_header(path, INDEX_MAGIC)?;
        let [n, d] = <[u32; 2]>::try_from(dims.as_slice()).map_err(|_| Error::BadParamFile {
            path: path.to_path_buf(),
            reason: "expected 2 dims".into(),
        })?;
        let mut index = DenseIndex {
            vectors: Array2::zeros((n as usize, d as usize)),
            ordinals: (0..n as usize).collect(),
        };
        reader.fill(&mut index)?;
        reader.finish()?;
        Ok(index)
    }
}

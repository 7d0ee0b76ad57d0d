//! Line-delimited JSON files passed between stages.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::{DbKind, DocKind, Document, RetrievalDatabase, Task};
use crate::error::{Error, Result};

use super::synthetic::{Split, SyntheticPair};

/// A generation example: `source` is the query text x, `target` the reference y.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub query_id: String,
    /// 1-based.
    pub rank: usize,
    pub doc_id: String,
    pub score: f64,
}

/// A rendered generator input: readable tokens plus the ids fed to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub id: String,
    pub input: String,
    pub input_ids: Vec<u32>,
    pub target: String,
    pub truncated: bool,
    pub cut_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub prediction: String,
    pub target: String,
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: n + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Groups hits by query, in the order queries appear in `examples`; each
/// group is sorted by rank.
pub fn group_hits(examples: &[Example], hits: &[RetrievalHit]) -> Vec<Vec<RetrievalHit>> {
    let mut by_id: std::collections::HashMap<&str, Vec<RetrievalHit>> =
        std::collections::HashMap::new();
    for h in hits {
        by_id
            .entry(h.query_id.as_str())
            .or_default()
            .push(h.clone());
    }
    examples
        .iter()
        .map(|e| {
            let mut g = by_id.remove(e.id.as_str()).unwrap_or_default();
            g.sort_by_key(|h| h.rank);
            g
        })
        .collect()
}

/// Examples for `task` from the pairs in `split`.
pub fn synthetic_examples(pairs: &[SyntheticPair], task: Task, split: Split) -> Vec<Example> {
    pairs
        .iter()
        .filter(|p| p.split == split)
        .map(|p| {
            let (source, target) = match task {
                Task::CodeGen => (&p.summary, &p.code),
                Task::CodeSum => (&p.code, &p.summary),
            };
            Example {
                id: p.id.clone(),
                source: source.clone(),
                target: target.clone(),
            }
        })
        .collect()
}

/// Bimodal database of every pair's target side, deduplicated.
pub fn synthetic_database(pairs: &[SyntheticPair], task: Task) -> Result<RetrievalDatabase> {
    let kind = task.db_kind();
    let docs = pairs
        .iter()
        .map(|p| match kind {
            DbKind::CodeDb => Document::new(p.id.clone(), DocKind::Code, p.code.clone())
                .with_pair(p.summary.clone()),
            DbKind::SummaryDb => Document::new(p.id.clone(), DocKind::Summary, p.summary.clone())
                .with_pair(p.code.clone()),
        })
        .collect();
    Ok(RetrievalDatabase::from_documents(kind, docs)?.deduplicate())
}

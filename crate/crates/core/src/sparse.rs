//! Okapi BM25 over an in-memory inverted index.
//!
//! ```text
//! score(q, d) = sum_{t in q} idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! ```
//!
//! Query tokens are summed with multiplicity. The index also mines the BM25
//! "hard" negatives used by the optional retriever training mode.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, RetrievalDatabase};
use crate::error::{Error, Result};
use crate::text::TextKind;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

const INDEX_HEADER: &str = "retrogen-bm25-index v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    k1: f64,
    b: f64,
    text_kind: TextKind,
}

impl InvertedIndex {
    /// Indexes a database with the tokenizer matching its document kind.
    pub fn build(db: &RetrievalDatabase) -> Self {
        let kind = db.kind().doc_kind().text_kind();
        Self::from_texts(db.documents().iter().map(|d| d.text.as_str()), kind)
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, text_kind: TextKind) -> Self {
        let docs: Vec<Vec<String>> = texts.into_iter().map(|t| text_kind.tokenize(t)).collect();
        Self::from_tokens(&docs, text_kind, DEFAULT_K1, DEFAULT_B)
    }

    pub fn from_tokens(docs: &[Vec<String>], text_kind: TextKind, k1: f64, b: f64) -> Self {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (ordinal, tokens) in docs.iter().enumerate() {
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for tok in tokens {
                *tf.entry(tok.as_str()).or_default() += 1;
            }
            for (tok, count) in tf {
                postings.entry(tok.to_string()).or_default().push(Posting {
                    doc: ordinal as u32,
                    tf: count,
                });
            }
        }
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64
        };
        InvertedIndex {
            postings,
            doc_lengths,
            avg_doc_length,
            k1,
            b,
            text_kind,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn text_kind(&self) -> TextKind {
        self.text_kind
    }

    pub fn postings(&self, token: &str) -> &[Posting] {
        self.postings.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.postings(token).len()
    }

    pub fn idf(&self, token: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(token) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn term_freq(&self, token: &str, ordinal: usize) -> u32 {
        let list = self.postings(token);
        list.binary_search_by_key(&(ordinal as u32), |p| p.doc)
            .map(|i| list[i].tf)
            .unwrap_or(0)
    }

    fn term_score(&self, idf: f64, tf: u32, doc_len: u32) -> f64 {
        if tf == 0 {
            return 0.0;
        }
        let tf = tf as f64;
        let norm = 1.0 - self.b + self.b * doc_len as f64 / self.avg_doc_length;
        idf * tf * (self.k1 + 1.0) / (tf + self.k1 * norm)
    }

    pub fn score<S: AsRef<str>>(&self, query_tokens: &[S], ordinal: usize) -> Result<f64> {
        let num_docs = self.num_docs();
        if ordinal >= num_docs {
            return Err(Error::OrdinalOutOfRange { ordinal, num_docs });
        }
        let dl = self.doc_lengths[ordinal];
        Ok(query_tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                self.term_score(self.idf(t), self.term_freq(t, ordinal), dl)
            })
            .sum())
    }

    /// Top-k documents with positive score, best first; ties go to the lower ordinal.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<(usize, f64)> {
        self.top_k_tokens(&self.text_kind.tokenize(query), k)
    }

    pub fn top_k_tokens<S: AsRef<str>>(&self, query_tokens: &[S], k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.num_docs() == 0 {
            return Vec::new();
        }
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for tok in query_tokens {
            let tok = tok.as_ref();
            let list = self.postings(tok);
            if list.is_empty() {
                continue;
            }
            let idf = self.idf(tok);
            for p in list {
                *acc.entry(p.doc).or_insert(0.0) +=
                    self.term_score(idf, p.tf, self.doc_lengths[p.doc as usize]);
            }
        }
        let mut hits: Vec<(usize, f64)> = acc
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(d, s)| (d as usize, s))
            .collect();
        sort_hits(&mut hits);
        hits.truncate(k);
        hits
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{INDEX_HEADER}").map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(&mut out, self).expect("index serializes");
        writeln!(out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::io(path, e))?;
        let malformed = |line, reason: String| Error::MalformedRecord {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if header.trim_end() != INDEX_HEADER {
            return Err(malformed(1, format!("expected header {INDEX_HEADER:?}")));
        }
        serde_json::from_reader(reader).map_err(|e| malformed(2, e.to_string()))
    }
}

/// Descending score, then ascending ordinal.
pub(crate) fn sort_hits(hits: &mut [(usize, f64)]) {
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Highest-scoring BM25 document whose normalized text differs from the target.
pub fn mine_hard_negative<S: AsRef<str>>(
    index: &InvertedIndex,
    texts: &[S],
    query: &str,
    target: &str,
) -> Option<usize> {
    let target = normalize(target);
    index
        .top_k(query, index.num_docs())
        .into_iter()
        .map(|(ord, _)| ord)
        .find(|&ord| normalize(texts[ord].as_ref()) != target)
}

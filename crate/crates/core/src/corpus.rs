//! Retrieval databases: loading, validation, deduplication and target exclusion.
//!
//! Databases are persisted as JSON lines, one [`Document`] per line. Two texts
//! are considered the same when their whitespace-normalized forms are equal
//! (see [`normalize`]); comparison is case-sensitive and comments are not
//! stripped.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::TextKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Code,
    Summary,
}

impl DocKind {
    pub fn text_kind(self) -> TextKind {
        match self {
            DocKind::Code => TextKind::Code,
            DocKind::Summary => TextKind::NaturalLanguage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DbKind {
    CodeDb,
    SummaryDb,
}

impl DbKind {
    pub fn doc_kind(self) -> DocKind {
        match self {
            DbKind::CodeDb => DocKind::Code,
            DbKind::SummaryDb => DocKind::Summary,
        }
    }
}

impl FromStr for DbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "code" | "code_db" => Ok(DbKind::CodeDb),
            "summary" | "summary_db" => Ok(DbKind::SummaryDb),
            other => Err(Error::Config(format!("unknown database kind {other:?}"))),
        }
    }
}

/// Generation direction. Code generation maps a summary to code and retrieves
/// from a code database; summarization is the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    CodeGen,
    CodeSum,
}

impl Task {
    pub fn source_kind(self) -> TextKind {
        match self {
            Task::CodeGen => TextKind::NaturalLanguage,
            Task::CodeSum => TextKind::Code,
        }
    }

    pub fn target_kind(self) -> TextKind {
        match self {
            Task::CodeGen => TextKind::Code,
            Task::CodeSum => TextKind::NaturalLanguage,
        }
    }

    pub fn db_kind(self) -> DbKind {
        match self {
            Task::CodeGen => DbKind::CodeDb,
            Task::CodeSum => DbKind::SummaryDb,
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "code_gen" | "code-gen" | "gen" => Ok(Task::CodeGen),
            "code_sum" | "code-sum" | "sum" => Ok(Task::CodeSum),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// One retrievable unit. `pair_text` holds the parallel counterpart (the
/// summary of a code document or vice versa) when the instance is bimodal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub kind: DocKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_text: Option<String>,
    pub lang: String,
}

impl Document {
    pub fn new(id: impl Into<String>, kind: DocKind, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            kind,
            text: text.into(),
            pair_text: None,
            lang: "minilang".to_string(),
        }
    }

    pub fn with_pair(mut self, pair: impl Into<String>) -> Self {
        self.pair_text = Some(pair.into());
        self
    }

    pub fn with_lang(mut self, lang: impl Into<String>) -> Self {
        self.lang = lang.into();
        self
    }

    pub fn is_bimodal(&self) -> bool {
        self.pair_text.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if normalize(&self.text).is_empty() {
            return Err(Error::InvalidDocument {
                id: self.id.clone(),
                reason: "text is empty after whitespace normalization".into(),
            });
        }
        if let Some(pair) = &self.pair_text {
            if normalize(pair).is_empty() {
                return Err(Error::InvalidDocument {
                    id: self.id.clone(),
                    reason: "pair_text is present but empty".into(),
                });
            }
        }
        Ok(())
    }
}

/// Collapse whitespace runs to a single space and trim both ends.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalDatabase {
    kind: DbKind,
    documents: Vec<Document>,
}

impl RetrievalDatabase {
    pub fn new(kind: DbKind) -> Self {
        RetrievalDatabase {
            kind,
            documents: Vec::new(),
        }
    }

    /// Builds a database from documents, checking kinds, validity and id uniqueness.
    pub fn from_documents(kind: DbKind, documents: Vec<Document>) -> Result<Self> {
        let mut db = RetrievalDatabase::new(kind);
        let mut ids = HashSet::new();
        for doc in documents {
            db.check(&doc)?;
            if !ids.insert(doc.id.clone()) {
                return Err(Error::DuplicateId(doc.id));
            }
            db.documents.push(doc);
        }
        Ok(db)
    }

    fn check(&self, doc: &Document) -> Result<()> {
        if doc.kind != self.kind.doc_kind() {
            return Err(Error::InvalidDocument {
                id: doc.id.clone(),
                reason: format!(
                    "kind {:?} does not match database {:?}",
                    doc.kind, self.kind
                ),
            });
        }
        doc.validate()
    }

    pub fn kind(&self) -> DbKind {
        self.kind
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, ordinal: usize) -> Option<&Document> {
        self.documents.get(ordinal)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.id == id)
    }

    /// Normalized-text fingerprints of every document.
    pub fn fingerprints(&self) -> HashSet<String> {
        self.documents.iter().map(|d| normalize(&d.text)).collect()
    }

    /// Keeps the first document for each normalized text.
    pub fn deduplicate(&self) -> RetrievalDatabase {
        let mut seen = HashSet::new();
        let documents = self
            .documents
            .iter()
            .filter(|d| seen.insert(normalize(&d.text)))
            .cloned()
            .collect();
        RetrievalDatabase {
            kind: self.kind,
            documents,
        }
    }

    /// Drops every document whose normalized text equals a normalized target.
    pub fn exclude_targets<S: AsRef<str>>(&self, targets: &[S]) -> RetrievalDatabase {
        let banned: HashSet<String> = targets.iter().map(|t| normalize(t.as_ref())).collect();
        let documents = self
            .documents
            .iter()
            .filter(|d| !banned.contains(&normalize(&d.text)))
            .cloned()
            .collect();
        RetrievalDatabase {
            kind: self.kind,
            documents,
        }
    }

    pub fn load(path: impl AsRef<Path>, kind: DbKind) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut db = RetrievalDatabase::new(kind);
        let mut ids = HashSet::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: line_no,
                reason,
            };
            let doc: Document =
                serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            db.check(&doc).map_err(|e| malformed(e.to_string()))?;
            if !ids.insert(doc.id.clone()) {
                return Err(Error::DuplicateId(doc.id));
            }
            db.documents.push(doc);
        }
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for doc in &self.documents {
            let line = serde_json::to_string(doc).expect("documents always serialize");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

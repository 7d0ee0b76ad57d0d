use crate::augment::{render, AugmentMode, AugmentedInput, RenderKinds, RetrievedCandidate};
use crate::corpus::{normalize, RetrievalDatabase, Task};
use crate::dense::{train_retriever, DenseIndex, Retriever, RetrieverTrainConfig, TrainLog};
use crate::error::Result;
use crate::generate::{
    copy_top1, generate_greedy, train_generator, DecodeConfig, GeneratorTrainConfig, Seq2SeqParams,
};
use crate::sparse::InvertedIndex;
use crate::text::{TextKind, TokenSequence, Vocabulary};

use super::artifacts::{AugmentedRecord, Example, RetrievalHit};

/// A searchable view of one database.
#[allow(clippy::large_enum_variant)]
pub enum RetrievalEngine {
    Bm25(InvertedIndex),
    Dense {
        retriever: Retriever,
        index: DenseIndex,
        vocab: Vocabulary,
        query_kind: TextKind,
    },
}

impl RetrievalEngine {
    pub fn bm25(db: &RetrievalDatabase) -> Self {
        RetrievalEngine::Bm25(InvertedIndex::build(db))
    }

    pub fn dense(
        db: &RetrievalDatabase,
        retriever: Retriever,
        vocab: Vocabulary,
        task: Task,
    ) -> Self {
        let doc_kind = db.kind().doc_kind().text_kind();
        let docs: Vec<TokenSequence> = db
            .documents()
            .iter()
            .map(|d| vocab.encode_text(doc_kind, &d.text))
            .collect();
        let index = DenseIndex::build(&retriever, &docs);
        RetrievalEngine::Dense {
            retriever,
            index,
            vocab,
            query_kind: task.source_kind(),
        }
    }

    /// Top `k` database ordinals with scores, best first.
    pub fn search(&self, query: &str, k: usize) -> Result<Vec<(usize, f64)>> {
        match self {
            RetrievalEngine::Bm25(index) => Ok(index.top_k(query, k)),
            RetrievalEngine::Dense {
                retriever,
                index,
                vocab,
                query_kind,
            } => {
                let q = retriever
                    .query
                    .encode(&vocab.encode_text(*query_kind, query));
                index.top_k(&q, k)
            }
        }
    }
}

/// Retrieves `k` documents per example. With `skip_own_target`, a document
/// equal to the example's own target is passed over, so the example still
/// receives `k` other documents when the database has them.
pub fn retrieve(
    engine: &RetrievalEngine,
    db: &RetrievalDatabase,
    examples: &[Example],
    k: usize,
    skip_own_target: bool,
) -> Result<Vec<Vec<RetrievalHit>>> {
    examples
        .iter()
        .map(|ex| {
            if k == 0 {
                return Ok(Vec::new());
            }
            let own = normalize(&ex.target);
            let fetch = if skip_own_target { k + 1 } else { k };
            let hits = engine.search(&ex.source, fetch)?;
            Ok(hits
                .into_iter()
                .filter(|&(o, _)| !skip_own_target || normalize(&db.documents()[o].text) != own)
                .take(k)
                .enumerate()
                .map(|(i, (o, score))| RetrievalHit {
                    query_id: ex.id.clone(),
                    rank: i + 1,
                    doc_id: db.documents()[o].id.clone(),
                    score,
                })
                .collect())
        })
        .collect()
}

/// Resolves hits against the database; unknown document ids are skipped.
pub fn candidates(db: &RetrievalDatabase, hits: &[RetrievalHit]) -> Vec<RetrievedCandidate> {
    hits.iter()
        .filter_map(|h| {
            let doc = db.get(db.position(&h.doc_id)?)?;
            Some(RetrievedCandidate {
                primary_text: doc.text.clone(),
                paired_text: doc.pair_text.clone(),
                score: h.score,
                rank: h.rank,
            })
        })
        .collect()
}

pub fn augment_all(
    mode: AugmentMode,
    task: Task,
    examples: &[Example],
    hits: &[Vec<RetrievalHit>],
    db: &RetrievalDatabase,
    vocab: &Vocabulary,
    max_len: usize,
) -> Vec<AugmentedInput> {
    let kinds = RenderKinds::for_task(task);
    examples
        .iter()
        .zip(hits)
        .map(|(ex, h)| render(mode, &ex.source, &candidates(db, h), vocab, kinds, max_len))
        .collect()
}

pub fn augmented_records(
    examples: &[Example],
    inputs: &[AugmentedInput],
    vocab: &Vocabulary,
) -> Vec<AugmentedRecord> {
    examples
        .iter()
        .zip(inputs)
        .map(|(ex, a)| AugmentedRecord {
            id: ex.id.clone(),
            input: vocab.decode(&a.rendered).join(" "),
            input_ids: a.rendered.ids().to_vec(),
            target: ex.target.clone(),
            truncated: a.truncated,
            cut_candidates: a.cut_candidates,
        })
        .collect()
}

/// Vocabulary over the database (both sides) and the examples.
pub fn build_vocab(
    db: &RetrievalDatabase,
    examples: &[Example],
    task: Task,
    max_size: usize,
) -> Result<Vocabulary> {
    let doc_kind = db.kind().doc_kind().text_kind();
    let pair_kind = match doc_kind {
        TextKind::Code => TextKind::NaturalLanguage,
        TextKind::NaturalLanguage => TextKind::Code,
    };
    let mut corpora: Vec<Vec<String>> = Vec::new();
    for d in db.documents() {
        corpora.push(doc_kind.tokenize(&d.text));
        if let Some(p) = &d.pair_text {
            corpora.push(pair_kind.tokenize(p));
        }
    }
    for ex in examples {
        corpora.push(task.source_kind().tokenize(&ex.source));
        corpora.push(task.target_kind().tokenize(&ex.target));
    }
    Vocabulary::build(corpora, max_size)
}

pub fn train_dense_retriever(
    examples: &[Example],
    task: Task,
    vocab: &Vocabulary,
    cfg: &RetrieverTrainConfig,
) -> Result<(Retriever, TrainLog)> {
    let pairs: Vec<(String, String)> = examples
        .iter()
        .map(|e| (e.source.clone(), e.target.clone()))
        .collect();
    train_retriever(&pairs, task.source_kind(), task.target_kind(), vocab, cfg)
}

/// Token-id training pairs for the generator.
pub fn generator_pairs(
    inputs: &[AugmentedInput],
    examples: &[Example],
    task: Task,
    vocab: &Vocabulary,
) -> Vec<(TokenSequence, TokenSequence)> {
    inputs
        .iter()
        .zip(examples)
        .map(|(a, ex)| {
            (
                a.rendered.clone(),
                vocab.encode_text(task.target_kind(), &ex.target),
            )
        })
        .collect()
}

/// Retrieves for every training example (skipping its own target), renders
/// the inputs and trains a generator on them.
#[allow(clippy::too_many_arguments)]
pub fn train_augmented_generator(
    engine: &RetrievalEngine,
    db: &RetrievalDatabase,
    train: &[Example],
    task: Task,
    mode: AugmentMode,
    k: usize,
    max_len: usize,
    vocab: &Vocabulary,
    cfg: &GeneratorTrainConfig,
) -> Result<Seq2SeqParams> {
    let k = if mode == AugmentMode::None { 0 } else { k };
    let hits = retrieve(engine, db, train, k, true)?;
    let inputs = augment_all(mode, task, train, &hits, db, vocab, max_len);
    let pairs = generator_pairs(&inputs, train, task, vocab);
    Ok(train_generator(&pairs, vocab.len(), cfg).0)
}

pub fn generate_seq2seq(
    params: &Seq2SeqParams,
    inputs: &[AugmentedInput],
    vocab: &Vocabulary,
    cfg: &DecodeConfig,
) -> Vec<String> {
    inputs
        .iter()
        .map(|a| generate_greedy(params, a.rendered.ids(), vocab, cfg))
        .collect()
}

pub fn generate_copy(db: &RetrievalDatabase, hits: &[Vec<RetrievalHit>]) -> Vec<String> {
    hits.iter().map(|h| copy_top1(&candidates(db, h))).collect()
}

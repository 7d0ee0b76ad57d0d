use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentMode;
use crate::corpus::{normalize, RetrievalDatabase};
use crate::dense::Retriever;
use crate::error::{Error, Result};
use crate::generate::{DecodeConfig, GeneratorMode, GeneratorTrainConfig, Seq2SeqParams};
use crate::metrics::{
    corpus_bleu, exact_match, gold_rank, mrr_from_ranks, recall_at_k_from_ranks, MetricReport,
};
use crate::text::{TextKind, Vocabulary};

use super::artifacts::{
    read_jsonl, write_jsonl, AugmentedRecord, Example, Prediction, RetrievalHit,
};
use super::config::{PipelineConfig, RetrievalMethod};
use super::stages::{
    augment_all, augmented_records, generate_copy, generate_seq2seq, retrieve,
    train_augmented_generator, RetrievalEngine,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// Bucket label, k, or `all`.
    pub key: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

/// Rows of an analysis sweep, one per (key, method, metric).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn push(
        &mut self,
        key: impl Into<String>,
        method: impl Into<String>,
        metric: impl Into<String>,
        value: f64,
    ) {
        self.rows.push(ResultRow {
            key: key.into(),
            method: method.into(),
            metric: metric.into(),
            value,
        });
    }

    pub fn get(&self, key: &str, method: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.key == key && r.method == method && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,method,metric,value\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.key, r.method, r.metric, r.value
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Everything a pipeline run reads. Optional parts are only needed by some
/// configurations.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub db: RetrievalDatabase,
    pub test: Vec<Example>,
    pub vocab: Option<Vocabulary>,
    pub retriever: Option<Retriever>,
    pub generator: Option<Seq2SeqParams>,
}

fn missing(stage: &'static str, what: &str) -> Error {
    Error::MissingArtifact {
        stage,
        reason: format!("no {what} configured or found"),
    }
}

fn existing(path: &Option<std::path::PathBuf>) -> Option<&Path> {
    path.as_deref().filter(|p| p.exists())
}

impl Artifacts {
    /// Loads the artifacts named by `cfg`. The database and test examples are
    /// required; the rest are loaded when their files exist.
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let db_path =
            existing(&cfg.db_path).ok_or_else(|| missing("build-db", "retrieval database"))?;
        let test_path =
            existing(&cfg.test_path).ok_or_else(|| missing("make-synthetic", "test examples"))?;
        Ok(Artifacts {
            db: RetrievalDatabase::load(db_path, cfg.task.db_kind())?,
            test: read_jsonl(test_path)?,
            vocab: existing(&cfg.vocab_path)
                .map(Vocabulary::load)
                .transpose()?,
            retriever: existing(&cfg.retriever_path)
                .map(Retriever::load)
                .transpose()?,
            generator: existing(&cfg.generator_path)
                .map(Seq2SeqParams::load)
                .transpose()?,
        })
    }

    /// The database queries run against: test targets are removed when
    /// `exclude_targets` is set.
    pub fn query_db(&self, cfg: &PipelineConfig) -> RetrievalDatabase {
        if cfg.exclude_targets {
            let targets: Vec<&str> = self.test.iter().map(|e| e.target.as_str()).collect();
            self.db.exclude_targets(&targets)
        } else {
            self.db.clone()
        }
    }

    pub fn vocab(&self, stage: &'static str) -> Result<&Vocabulary> {
        self.vocab
            .as_ref()
            .ok_or_else(|| missing(stage, "vocabulary"))
    }

    pub fn engine(&self, db: &RetrievalDatabase, cfg: &PipelineConfig) -> Result<RetrievalEngine> {
        Ok(match cfg.method {
            RetrievalMethod::Bm25 => RetrievalEngine::bm25(db),
            RetrievalMethod::Dense => {
                let retriever = self
                    .retriever
                    .clone()
                    .ok_or_else(|| missing("train-retriever", "retriever parameters"))?;
                RetrievalEngine::dense(
                    db,
                    retriever,
                    self.vocab("train-retriever")?.clone(),
                    cfg.task,
                )
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: MetricReport,
    pub hits: Vec<Vec<RetrievalHit>>,
    pub augmented: Vec<AugmentedRecord>,
    pub predictions: Vec<Prediction>,
}

impl PipelineRun {
    /// Mean number of candidates cut by input truncation.
    pub fn mean_cut_candidates(&self) -> f64 {
        if self.augmented.is_empty() {
            return 0.0;
        }
        self.augmented
            .iter()
            .map(|a| a.cut_candidates as f64)
            .sum::<f64>()
            / self.augmented.len() as f64
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let hits: Vec<RetrievalHit> = self.hits.iter().flatten().cloned().collect();
        write_jsonl(dir.join("retrieval.jsonl"), &hits)?;
        write_jsonl(dir.join("augmented.jsonl"), &self.augmented)?;
        write_jsonl(dir.join("predictions.jsonl"), &self.predictions)?;
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        put("report.json", self.report.to_json())?;
        put("report.csv", self.report.to_csv())
    }
}

/// Retrieve, augment, generate and evaluate on the test examples.
pub fn evaluate_pipeline(cfg: &PipelineConfig, artifacts: &Artifacts) -> Result<PipelineRun> {
    cfg.validate()?;
    if cfg.mode == AugmentMode::None && cfg.generator == GeneratorMode::Copy {
        return Err(Error::Config(
            "the copy generator needs retrieval; augment mode none is not allowed".into(),
        ));
    }
    let test = &artifacts.test;
    if test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let targets: Vec<&str> = test.iter().map(|e| e.target.as_str()).collect();
    let db = artifacts.query_db(cfg);
    let k = if cfg.mode == AugmentMode::None && cfg.generator == GeneratorMode::Seq2seq {
        0
    } else {
        cfg.k
    };
    let hits = if k == 0 {
        vec![Vec::new(); test.len()]
    } else {
        retrieve(&artifacts.engine(&db, cfg)?, &db, test, k, false)?
    };

    let (hyps, augmented) = match cfg.generator {
        GeneratorMode::Copy => (generate_copy(&db, &hits), Vec::new()),
        GeneratorMode::Seq2seq => {
            let params = artifacts
                .generator
                .as_ref()
                .ok_or_else(|| missing("train-gen", "generator parameters"))?;
            let vocab = artifacts.vocab("train-gen")?;
            let inputs = augment_all(cfg.mode, cfg.task, test, &hits, &db, vocab, cfg.max_len);
            let decode = DecodeConfig {
                max_target_length: cfg.max_target_len,
                seed: cfg.seed,
            };
            (
                generate_seq2seq(params, &inputs, vocab, &decode),
                augmented_records(test, &inputs, vocab),
            )
        }
    };
    let report = MetricReport::evaluate(&hyps, &targets, cfg.task.target_kind())?;
    let predictions = test
        .iter()
        .zip(hyps)
        .map(|(e, h)| Prediction {
            id: e.id.clone(),
            prediction: h,
            target: e.target.clone(),
        })
        .collect();
    let run = PipelineRun {
        report,
        hits,
        augmented,
        predictions,
    };
    if let Some(dir) = &cfg.output_dir {
        run.write(dir)?;
    }
    Ok(run)
}

/// Trains the generator on `train` with inputs rendered from the query
/// database. Each training example skips its own target among retrieved
/// candidates.
pub fn train_pipeline_generator(
    cfg: &PipelineConfig,
    artifacts: &Artifacts,
    train: &[Example],
) -> Result<Seq2SeqParams> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let db = artifacts.query_db(cfg);
    let vocab = artifacts.vocab("build-vocab")?;
    let engine = if cfg.mode == AugmentMode::None {
        RetrievalEngine::bm25(&db)
    } else {
        artifacts.engine(&db, cfg)?
    };
    let gen_cfg = GeneratorTrainConfig {
        seed: cfg.seed,
        max_target_len: cfg.max_target_len,
        ..cfg.generator_train.clone()
    };
    train_augmented_generator(
        &engine,
        &db,
        train,
        cfg.task,
        cfg.mode,
        cfg.k,
        cfg.max_len,
        vocab,
        &gen_cfg,
    )
}

/// Loads artifacts from the configured paths and evaluates.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<MetricReport> {
    Ok(evaluate_pipeline(cfg, &Artifacts::load(cfg)?)?.report)
}

/// One evaluation per k with everything else fixed. Each k contributes the
/// report's metrics plus the mean count of truncated candidates.
pub fn sweep_k(
    cfg: &PipelineConfig,
    artifacts: &Artifacts,
    ks: &[usize],
) -> Result<ExperimentResult> {
    if ks.is_empty() {
        return Err(Error::Config("sweep needs at least one k".into()));
    }
    let mut result = ExperimentResult::default();
    for &k in ks {
        let cfg = PipelineConfig {
            k,
            output_dir: None,
            ..cfg.clone()
        };
        let run = evaluate_pipeline(&cfg, artifacts)?;
        let label = cfg.label();
        for (metric, value) in run.report.metric_values() {
            result.push(k.to_string(), &label, metric, value);
        }
        result.push(
            k.to_string(),
            &label,
            "cut_candidates",
            run.mean_cut_candidates(),
        );
    }
    Ok(result)
}

pub const DEFAULT_BUCKET_EDGES: [usize; 5] = [0, 16, 32, 64, 128];

fn bucket_label(edges: &[usize], i: usize) -> String {
    match edges.get(i + 1) {
        Some(hi) => format!("[{},{})", edges[i], hi),
        None => format!("[{},inf)", edges[i]),
    }
}

/// Corpus BLEU and exact match per reference-length bucket for each method.
/// Buckets are `[e_i, e_{i+1})` plus an open last bucket; empty buckets
/// produce no rows.
pub fn bucket_by_target_length(
    results: &[(String, Vec<Prediction>)],
    edges: &[usize],
    kind: TextKind,
) -> Result<ExperimentResult> {
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "bucket edges must be non-empty and strictly increasing".into(),
        ));
    }
    let mut result = ExperimentResult::default();
    for (method, preds) in results {
        let mut buckets: Vec<(Vec<String>, Vec<String>)> = vec![Default::default(); edges.len()];
        for p in preds {
            let len = kind.tokenize(&p.target).len();
            if let Some(b) = edges.iter().rposition(|&e| e <= len) {
                buckets[b].0.push(kind.canonical(&p.prediction));
                buckets[b].1.push(kind.canonical(&p.target));
            }
        }
        for (i, (h, r)) in buckets.iter().enumerate() {
            if h.is_empty() {
                continue;
            }
            let label = bucket_label(edges, i);
            result.push(&label, method, "bleu", corpus_bleu(h, r)?);
            result.push(&label, method, "exact_match", exact_match(h, r)?);
        }
    }
    Ok(result)
}

/// Recall@k for every k and MRR for BM25 and the dense retriever, ranking
/// the full database with targets kept in it. The gold document of an
/// example is the one whose text equals its target.
pub fn retrieval_eval(
    cfg: &PipelineConfig,
    artifacts: &Artifacts,
    ks: &[usize],
) -> Result<ExperimentResult> {
    let db = &artifacts.db;
    let by_text: HashMap<String, &str> = db
        .documents()
        .iter()
        .map(|d| (normalize(&d.text), d.id.as_str()))
        .collect();
    let gold: Vec<&str> = artifacts
        .test
        .iter()
        .map(|e| by_text.get(&normalize(&e.target)).copied().unwrap_or(""))
        .collect();
    let mut result = ExperimentResult::default();
    for method in [RetrievalMethod::Bm25, RetrievalMethod::Dense] {
        let cfg = PipelineConfig {
            method,
            exclude_targets: false,
            ..cfg.clone()
        };
        let engine = artifacts.engine(db, &cfg)?;
        let hits = retrieve(&engine, db, &artifacts.test, db.len(), false)?;
        let ranks: Vec<Option<usize>> = hits
            .iter()
            .zip(&gold)
            .map(|(h, g)| {
                let ids: Vec<&str> = h.iter().map(|h| h.doc_id.as_str()).collect();
                gold_rank(&ids, g)
            })
            .collect();
        for (k, v) in recall_at_k_from_ranks(&ranks, ks) {
            result.push(k.to_string(), method.name(), "recall", v);
        }
        result.push("all", method.name(), "mrr", mrr_from_ranks(&ranks));
    }
    Ok(result)
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use retrogen_core::corpus::{DocKind, Document, RetrievalDatabase};
use retrogen_core::dense::DenseIndex;
use retrogen_core::generate::{generate_greedy, DecodeConfig, GeneratorMode, Seq2SeqParams};
use retrogen_core::metrics::MetricReport;
use retrogen_core::pipeline::artifacts::{group_hits, synthetic_database, synthetic_examples};
use retrogen_core::pipeline::stages::{
    augment_all, augmented_records, build_vocab, generate_copy, retrieve, train_dense_retriever,
};
use retrogen_core::pipeline::synthetic::{generate_corpus, Split, SyntheticConfig};
use retrogen_core::pipeline::{
    bucket_by_target_length, evaluate_pipeline, read_jsonl, retrieval_eval, sweep_k,
    train_pipeline_generator, write_jsonl, Artifacts, AugmentedRecord, Example, ExperimentResult,
    PipelineConfig, Prediction, RetrievalEngine, RetrievalHit, RetrievalMethod,
    DEFAULT_BUCKET_EDGES,
};
use retrogen_core::sparse::InvertedIndex;
use retrogen_core::text::Vocabulary;

#[derive(Parser)]
#[command(
    name = "retrogen",
    version,
    about = "Retrieval-augmented code generation and summarization"
)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// code_gen or code_sum.
    #[arg(long, global = true)]
    task: Option<String>,
    /// bm25 or dense.
    #[arg(long, global = true)]
    method: Option<String>,
    /// none, case1 or case2.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// copy or seq2seq.
    #[arg(long, global = true)]
    generator: Option<String>,
    /// Retrieved candidates per query.
    #[arg(short, long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    max_len: Option<usize>,
    #[arg(long, global = true)]
    exclude_targets: Option<bool>,
    #[arg(long, global = true)]
    db: Option<PathBuf>,
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    #[arg(long, global = true)]
    retriever: Option<PathBuf>,
    #[arg(long, global = true)]
    generator_params: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    NearCopy,
    Aligned,
    Paraphrased,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus: pairs, train/test examples and a database.
    MakeSynthetic {
        #[arg(long, value_enum, default_value = "near-copy")]
        preset: Preset,
        /// Pair count for the aligned and paraphrased presets.
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build a deduplicated database from the targets of example files.
    BuildDb {
        #[arg(long = "examples", required = true, num_args = 1..)]
        examples: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the shared vocabulary over the database and example files.
    BuildVocab {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the dense bi-encoder on the training examples.
    TrainRetriever {
        #[arg(long)]
        out: PathBuf,
    },
    /// Index the query database for the configured method.
    Index {
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve top-k documents for every test example.
    Retrieve {
        /// Saved index; rebuilt from the database when absent.
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render augmented generator inputs from a retrieval results file.
    Augment {
        #[arg(long)]
        hits: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the seq2seq generator on augmented training inputs.
    TrainGen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce predictions from augmented inputs (seq2seq) or retrieval results (copy).
    Generate {
        #[arg(long, required_unless_present = "hits")]
        augmented: Option<PathBuf>,
        #[arg(long)]
        hits: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions file; prints the JSON report.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Retrieve, augment, generate and evaluate in one go.
    Run,
    /// Evaluate once per k.
    SweepK {
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recall@k and MRR of BM25 and the dense retriever, targets kept.
    RetrievalEval {
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,50,100")]
        ks: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BLEU and exact match per reference-length bucket.
    BucketLength {
        /// Predictions files as LABEL=PATH; repeatable.
        #[arg(long = "predictions", value_name = "LABEL=PATH", required = true)]
        predictions: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        edges: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let text = |v: &Option<String>| v.clone();
    let num = |v: Option<usize>| v.map(|n| n.to_string());
    let path = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
    let flags = [
        ("seed", cli.seed.map(|s| s.to_string())),
        ("task", text(&cli.task)),
        ("method", text(&cli.method)),
        ("mode", text(&cli.mode)),
        ("generator", text(&cli.generator)),
        ("k", num(cli.k)),
        ("max_len", num(cli.max_len)),
        (
            "exclude_targets",
            cli.exclude_targets.map(|b| b.to_string()),
        ),
        ("db", path(&cli.db)),
        ("train", path(&cli.train)),
        ("test", path(&cli.test)),
        ("vocab", path(&cli.vocab)),
        ("retriever", path(&cli.retriever)),
        ("generator_params", path(&cli.generator_params)),
        ("output_dir", path(&cli.output_dir)),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            cfg.set(key, &value)?;
        }
    }
    for kv in &cli.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(key, value)?;
    }
    Ok(cfg)
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| {
        anyhow!(
            "no {key} path configured; pass --{} or set {key}",
            key.replace('_', "-")
        )
    })
}

fn examples(path: &Option<PathBuf>, key: &str) -> Result<Vec<Example>> {
    let p = required(path, key)?;
    read_jsonl(p).with_context(|| format!("reading {key} examples"))
}

/// Database plus whichever other artifacts exist. Test examples are optional
/// here so training stages can run before a test split exists.
fn artifacts(cfg: &PipelineConfig) -> Result<Artifacts> {
    let db_path = required(&cfg.db_path, "db")?;
    let load_opt = |p: &Option<PathBuf>| p.as_deref().filter(|p| p.exists()).map(Path::to_path_buf);
    Ok(Artifacts {
        db: RetrievalDatabase::load(db_path, cfg.task.db_kind())?,
        test: match load_opt(&cfg.test_path) {
            Some(p) => read_jsonl(p)?,
            None => Vec::new(),
        },
        vocab: load_opt(&cfg.vocab_path)
            .map(Vocabulary::load)
            .transpose()?,
        retriever: load_opt(&cfg.retriever_path)
            .map(retrogen_core::dense::Retriever::load)
            .transpose()?,
        generator: load_opt(&cfg.generator_path)
            .map(Seq2SeqParams::load)
            .transpose()?,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(result: &ExperimentResult, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => {
            write_text(p, &result.to_csv())?;
            write_text(&p.with_extension("json"), &result.to_json())
        }
        None => {
            print!("{}", result.to_csv());
            Ok(())
        }
    }
}

fn make_synthetic(cfg: &PipelineConfig, preset: Preset, n: usize, out_dir: &Path) -> Result<()> {
    let syn = match preset {
        Preset::NearCopy => SyntheticConfig::near_copy(cfg.seed),
        Preset::Aligned => SyntheticConfig::aligned(n, cfg.seed),
        Preset::Paraphrased => SyntheticConfig::paraphrased(n, cfg.seed),
    };
    let pairs = generate_corpus(&syn);
    fs::create_dir_all(out_dir)?;
    let train = synthetic_examples(&pairs, cfg.task, Split::Train);
    let mut test = synthetic_examples(&pairs, cfg.task, Split::Test);
    if test.is_empty() {
        // retrieval-only presets are evaluated on their own pairs
        test = train.clone();
    }
    write_jsonl(out_dir.join("pairs.jsonl"), &pairs)?;
    write_jsonl(out_dir.join("train.jsonl"), &train)?;
    write_jsonl(out_dir.join("test.jsonl"), &test)?;
    synthetic_database(&pairs, cfg.task)?.save(out_dir.join("db.jsonl"))?;
    info!(
        "{} pairs: {} train, {} test",
        pairs.len(),
        train.len(),
        test.len()
    );
    Ok(())
}

fn build_db(cfg: &PipelineConfig, files: &[PathBuf], out: &Path) -> Result<()> {
    let kind = cfg.task.db_kind();
    let doc_kind: DocKind = kind.doc_kind();
    let mut docs = Vec::new();
    for f in files {
        for ex in read_jsonl::<Example>(f)? {
            docs.push(Document::new(ex.id, doc_kind, ex.target).with_pair(ex.source));
        }
    }
    let db = RetrievalDatabase::from_documents(kind, docs)?.deduplicate();
    db.save(out)?;
    info!("{} documents", db.len());
    Ok(())
}

fn engine_from_index(
    cfg: &PipelineConfig,
    arts: &Artifacts,
    db: &RetrievalDatabase,
    index: &Path,
) -> Result<RetrievalEngine> {
    let engine = match cfg.method {
        RetrievalMethod::Bm25 => {
            let idx = InvertedIndex::load(index)?;
            if idx.num_docs() != db.len() {
                bail!(
                    "index covers {} documents, database has {}; rerun `index`",
                    idx.num_docs(),
                    db.len()
                );
            }
            RetrievalEngine::Bm25(idx)
        }
        RetrievalMethod::Dense => {
            let idx = DenseIndex::load(index)?;
            if idx.len() != db.len() {
                bail!(
                    "index covers {} documents, database has {}; rerun `index`",
                    idx.len(),
                    db.len()
                );
            }
            let retriever = arts
                .retriever
                .clone()
                .ok_or_else(|| anyhow!("dense retrieval needs --retriever"))?;
            RetrievalEngine::Dense {
                retriever,
                index: idx,
                vocab: arts.vocab("train-retriever")?.clone(),
                query_kind: cfg.task.source_kind(),
            }
        }
    };
    Ok(engine)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::MakeSynthetic { preset, n, out_dir } => {
            make_synthetic(&cfg, *preset, *n, out_dir)?
        }
        Command::BuildDb { examples, out } => build_db(&cfg, examples, out)?,
        Command::BuildVocab { out } => {
            let arts = artifacts(&cfg)?;
            let mut exs = arts.test.clone();
            if cfg.train_path.is_some() {
                exs.extend(examples(&cfg.train_path, "train")?);
            }
            let vocab = build_vocab(&arts.db, &exs, cfg.task, cfg.vocab_size)?;
            vocab.save(out)?;
            info!("{} tokens", vocab.len());
        }
        Command::TrainRetriever { out } => {
            let arts = artifacts(&cfg)?;
            let train = examples(&cfg.train_path, "train")?;
            let rcfg = retrogen_core::dense::RetrieverTrainConfig {
                seed: cfg.seed,
                ..cfg.retriever_train.clone()
            };
            let (retriever, log) =
                train_dense_retriever(&train, cfg.task, arts.vocab("build-vocab")?, &rcfg)?;
            info!(
                "in-batch loss {:.4} -> {:.4}",
                log.initial_loss, log.final_loss
            );
            retriever.save(out)?;
        }
        Command::Index { out } => {
            let arts = artifacts(&cfg)?;
            let db = arts.query_db(&cfg);
            match arts.engine(&db, &cfg)? {
                RetrievalEngine::Bm25(idx) => idx.save(out)?,
                RetrievalEngine::Dense { index, .. } => index.save(out)?,
            }
            info!("indexed {} documents", db.len());
        }
        Command::Retrieve { index, out } => {
            let arts = artifacts(&cfg)?;
            let test = examples(&cfg.test_path, "test")?;
            let db = arts.query_db(&cfg);
            let engine = match index {
                Some(p) => engine_from_index(&cfg, &arts, &db, p)?,
                None => arts.engine(&db, &cfg)?,
            };
            let hits: Vec<RetrievalHit> = retrieve(&engine, &db, &test, cfg.k, false)?
                .into_iter()
                .flatten()
                .collect();
            write_jsonl(out, &hits)?;
        }
        Command::Augment { hits, out } => {
            let arts = artifacts(&cfg)?;
            let test = examples(&cfg.test_path, "test")?;
            let db = arts.query_db(&cfg);
            let vocab = arts.vocab("build-vocab")?;
            let grouped = group_hits(&test, &read_jsonl(hits)?);
            let inputs = augment_all(cfg.mode, cfg.task, &test, &grouped, &db, vocab, cfg.max_len);
            write_jsonl(out, &augmented_records(&test, &inputs, vocab))?;
        }
        Command::TrainGen { out } => {
            let arts = artifacts(&cfg)?;
            let train = examples(&cfg.train_path, "train")?;
            train_pipeline_generator(&cfg, &arts, &train)?.save(out)?;
        }
        Command::Generate {
            augmented,
            hits,
            out,
        } => {
            let preds: Vec<Prediction> = match (cfg.generator, augmented, hits) {
                (GeneratorMode::Seq2seq, Some(aug), _) => {
                    let arts = artifacts(&cfg)?;
                    let params = arts
                        .generator
                        .as_ref()
                        .ok_or_else(|| anyhow!("seq2seq generation needs --generator-params"))?;
                    let vocab = arts.vocab("build-vocab")?;
                    let decode = DecodeConfig {
                        max_target_length: cfg.max_target_len,
                        seed: cfg.seed,
                    };
                    read_jsonl::<AugmentedRecord>(aug)?
                        .into_iter()
                        .map(|r| Prediction {
                            prediction: generate_greedy(params, &r.input_ids, vocab, &decode),
                            id: r.id,
                            target: r.target,
                        })
                        .collect()
                }
                (GeneratorMode::Copy, _, Some(h)) => {
                    let arts = artifacts(&cfg)?;
                    let test = examples(&cfg.test_path, "test")?;
                    let grouped = group_hits(&test, &read_jsonl(h)?);
                    let db = arts.query_db(&cfg);
                    test.iter()
                        .zip(generate_copy(&db, &grouped))
                        .map(|(e, p)| Prediction {
                            id: e.id.clone(),
                            prediction: p,
                            target: e.target.clone(),
                        })
                        .collect()
                }
                (GeneratorMode::Seq2seq, None, _) => bail!("seq2seq generation reads --augmented"),
                (GeneratorMode::Copy, _, None) => bail!("copy generation reads --hits"),
            };
            write_jsonl(out, &preds)?;
        }
        Command::Evaluate {
            predictions,
            json,
            csv,
        } => {
            let preds: Vec<Prediction> = read_jsonl(predictions)?;
            let hyps: Vec<&str> = preds.iter().map(|p| p.prediction.as_str()).collect();
            let refs: Vec<&str> = preds.iter().map(|p| p.target.as_str()).collect();
            let report = MetricReport::evaluate(&hyps, &refs, cfg.task.target_kind())?;
            if let Some(p) = json {
                write_text(p, &report.to_json())?;
            }
            if let Some(p) = csv {
                write_text(p, &report.to_csv())?;
            }
            println!("{}", report.to_json());
        }
        Command::Run => {
            let run = evaluate_pipeline(&cfg, &Artifacts::load(&cfg)?)?;
            println!("{}", run.report.to_json());
        }
        Command::SweepK { ks, out } => emit(&sweep_k(&cfg, &Artifacts::load(&cfg)?, ks)?, out)?,
        Command::RetrievalEval { ks, out } => {
            emit(&retrieval_eval(&cfg, &Artifacts::load(&cfg)?, ks)?, out)?
        }
        Command::BucketLength {
            predictions,
            edges,
            out,
        } => {
            let mut results = Vec::new();
            for spec in predictions {
                let (label, path) = spec
                    .split_once('=')
                    .ok_or_else(|| anyhow!("--predictions expects LABEL=PATH, got {spec:?}"))?;
                results.push((label.to_string(), read_jsonl::<Prediction>(path)?));
            }
            let edges = edges
                .clone()
                .unwrap_or_else(|| DEFAULT_BUCKET_EDGES.to_vec());
            emit(
                &bucket_by_target_length(&results, &edges, cfg.task.target_kind())?,
                out,
            )?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

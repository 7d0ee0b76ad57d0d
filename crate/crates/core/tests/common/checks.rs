//! Measurable checks behind the acceptance criteria. Each returns a short
//! summary on success and the failing measurement otherwise.

use std::ops::ControlFlow;
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use retrogen_core::augment::{render, AugmentMode, RenderKinds, RetrievedCandidate};
use retrogen_core::corpus::{RetrievalDatabase, Task};
use retrogen_core::dense::RetrieverTrainConfig;
use retrogen_core::dense::{
    in_batch_loss, retriever_loss_and_grads, DenseIndex, EmbeddingVector, EncoderConfig, Retriever,
};
use retrogen_core::generate::{
    generate_greedy, train_generator_with, DecodeConfig, GeneratorMode, GeneratorTrainConfig,
};
use retrogen_core::generate::{Seq2SeqConfig, Seq2SeqParams};
use retrogen_core::metrics::{
    ast_match, codebleu, corpus_bleu, corpus_smoothed_bleu4, dataflow_match, exact_match, mrr,
    parse_minilang, recall_at_k, smoothed_bleu4,
};
use retrogen_core::params::ParamGroups;
use retrogen_core::pipeline::artifacts::{synthetic_database, synthetic_examples};
use retrogen_core::pipeline::stages::{build_vocab, generator_pairs, train_dense_retriever};
use retrogen_core::pipeline::synthetic::{generate_corpus, Split, SyntheticConfig};
use retrogen_core::pipeline::{
    evaluate_pipeline, retrieval_eval, train_pipeline_generator, Artifacts, Example, PipelineConfig,
};
use retrogen_core::sparse::InvertedIndex;
use retrogen_core::text::{tokenize_code, tokenize_nl, TextKind, TokenSequence, Vocabulary};

use super::{gen, oracle};

pub type Check = Result<String, String>;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

struct MaxDiff {
    worst: f64,
    what: String,
}

impl MaxDiff {
    fn new() -> Self {
        MaxDiff {
            worst: 0.0,
            what: String::new(),
        }
    }

    fn see(&mut self, what: &str, got: f64, want: f64) {
        let d = (got - want).abs();
        if d > self.worst || !d.is_finite() {
            self.worst = if d.is_finite() { d } else { f64::INFINITY };
            self.what = format!("{what}: library {got} vs oracle {want}");
        }
    }
}

// ---------------------------------------------------------------------------
// 1. metric oracles

pub fn metric_oracles(corpora: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diff = MaxDiff::new();
    let (mut parseable_pairs, mut imperfect_flow) = (0, 0);
    for _ in 0..corpora {
        let n = rng.random_range(1..8);

        // token corpora with heavy n-gram overlap
        let refs: Vec<String> = (0..n).map(|_| gen::token_text(&mut rng, 12)).collect();
        let hyps: Vec<String> = refs
            .iter()
            .map(|r| match rng.random_range(0..4) {
                0 => r.clone(),
                1 => format!("  {}\t", r.replace(' ', "  ")),
                _ => gen::token_text(&mut rng, 12),
            })
            .collect();
        let ht: Vec<Vec<String>> = hyps.iter().map(|h| tokenize_code(h)).collect();
        let rt: Vec<Vec<String>> = refs.iter().map(|r| tokenize_code(r)).collect();
        diff.see(
            "corpus BLEU",
            corpus_bleu(&hyps, &refs).unwrap(),
            oracle::corpus_bleu(&ht, &rt),
        );
        let sb: f64 = ht
            .iter()
            .zip(&rt)
            .map(|(h, r)| oracle::smoothed_bleu4(h, r))
            .sum::<f64>()
            / n as f64;
        diff.see(
            "smoothed BLEU-4",
            corpus_smoothed_bleu4(&hyps, &refs).unwrap(),
            sb,
        );
        for (h, r) in hyps.iter().zip(&refs) {
            diff.see(
                "sentence smoothed BLEU-4",
                smoothed_bleu4(h, r),
                oracle::smoothed_bleu4(&tokenize_code(h), &tokenize_code(r)),
            );
        }
        diff.see(
            "exact match",
            exact_match(&hyps, &refs).unwrap(),
            oracle::exact_match(&hyps, &refs),
        );

        // program corpora
        let refs: Vec<String> = (0..n).map(|_| gen::program(&mut rng)).collect();
        let hyps: Vec<String> = refs.iter().map(|r| gen::mutate(&mut rng, r)).collect();
        let got = codebleu(&hyps, &refs).unwrap();
        let want = oracle::codebleu(&hyps, &refs, tokenize_code);
        diff.see("CodeBLEU", got.codebleu, want.total);
        diff.see("CodeBLEU n-gram", got.ngram, want.ngram);
        diff.see(
            "CodeBLEU weighted n-gram",
            got.weighted_ngram,
            want.weighted,
        );
        diff.see("CodeBLEU AST", got.ast, want.ast);
        diff.see("CodeBLEU data-flow", got.dataflow, want.dataflow);
        for (h, r) in hyps.iter().zip(&refs) {
            let parseable = parse_minilang(h).is_parseable();
            if parseable != oracle::parse(h).is_some() {
                return Err(format!("parsers disagree on {h:?}"));
            }
            diff.see(
                "AST match",
                ast_match(&parse_minilang(h), &parse_minilang(r)),
                oracle::ast_match(h, r),
            );
            let flow = dataflow_match(h, r);
            diff.see("data-flow match", flow, oracle::dataflow_match(h, r));
            if parseable && parse_minilang(r).is_parseable() {
                parseable_pairs += 1;
                if flow < 1.0 {
                    imperfect_flow += 1;
                }
            }
        }

        // rankings over a small id space; some gold ids never retrieved
        let ids: Vec<String> = (0..12).map(|i| format!("d{i}")).collect();
        let rankings: Vec<Vec<String>> = (0..n)
            .map(|_| {
                let len = rng.random_range(0..ids.len());
                ids.choose_multiple(&mut rng, len).cloned().collect()
            })
            .collect();
        let gold: Vec<String> = (0..n)
            .map(|_| ids.choose(&mut rng).unwrap().clone())
            .collect();
        let ks: Vec<usize> = (0..=13).collect();
        let recall = recall_at_k(&rankings, &gold, &ks).unwrap();
        for &k in &ks {
            diff.see(
                "recall@k",
                recall[&k],
                oracle::recall_at_k(&rankings, &gold, k),
            );
        }
        diff.see(
            "MRR",
            mrr(&rankings, &gold).unwrap(),
            oracle::mrr(&rankings, &gold),
        );
    }
    if parseable_pairs < corpora || imperfect_flow == 0 {
        return Err(format!(
            "generated programs too degenerate: {parseable_pairs} parseable pairs, {imperfect_flow} imperfect data-flow scores"
        ));
    }
    if diff.worst <= 1e-9 {
        Ok(format!(
            "{corpora} corpora, max |diff| {:.1e}, {parseable_pairs} parseable program pairs",
            diff.worst
        ))
    } else {
        Err(format!("max |diff| {:.3e} at {}", diff.worst, diff.what))
    }
}

// ---------------------------------------------------------------------------
// 2. retrieval oracles

/// `got` must list the oracle's best `k` positive documents; ordinals may
/// differ only between documents whose oracle scores tie to rounding.
fn compare_ranking(
    got: &[(usize, f64)],
    scores: &[f64],
    order: &[usize],
    k: usize,
    positive_only: bool,
) -> Result<(), String> {
    let want: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| !positive_only || scores[i] > 0.0)
        .take(k)
        .collect();
    if got.len() != want.len() {
        return Err(format!("k={k}: {} hits, oracle {}", got.len(), want.len()));
    }
    let mut seen = std::collections::HashSet::new();
    for (pos, (&(o, s), &w)) in got.iter().zip(&want).enumerate() {
        let scale = 1.0f64.max(scores[w].abs());
        if !seen.insert(o) || o >= scores.len() {
            return Err(format!("k={k}: bad ordinal {o} at {pos}"));
        }
        if !close(s, scores[w], 1e-9 * scale) {
            return Err(format!(
                "k={k} pos {pos}: score {s} vs oracle {}",
                scores[w]
            ));
        }
        if o != w && !close(scores[o], scores[w], 1e-12 * scale) {
            return Err(format!("k={k} pos {pos}: doc {o} vs oracle {w}"));
        }
    }
    Ok(())
}

pub fn retrieval_oracles(corpora: usize, max_docs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..40).map(|i| format!("t{i}")).collect();
    let mut comparisons = 0usize;
    for c in 0..corpora {
        let n = if c == 0 {
            max_docs
        } else {
            rng.random_range(1..=max_docs)
        };

        // BM25
        let docs: Vec<Vec<String>> = (0..n)
            .map(|_| {
                let len = rng.random_range(0..15);
                // skewed draws give repeated terms and shared documents
                (0..len)
                    .map(|_| {
                        vocab[rng.random_range(0..40usize).min(rng.random_range(0..40))].clone()
                    })
                    .collect()
            })
            .collect();
        let index = InvertedIndex::from_tokens(&docs, TextKind::Code, 1.2, 0.75);
        for _ in 0..3 {
            let qlen = rng.random_range(0..6);
            let query: Vec<String> = (0..qlen)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        "oov".to_string()
                    } else {
                        vocab.choose(&mut rng).unwrap().clone()
                    }
                })
                .collect();
            let scores = oracle::bm25_all(&docs, &query, 1.2, 0.75);
            let order = oracle::rank_all(&scores);
            for k in 0..=n + 1 {
                compare_ranking(&index.top_k_tokens(&query, k), &scores, &order, k, true)
                    .map_err(|e| format!("bm25 n={n}: {e}"))?;
                comparisons += 1;
            }
        }

        // exact inner product search; integer vectors force exact ties
        let dim = rng.random_range(1..6);
        let integer = rng.random_bool(0.5);
        let draw = |rng: &mut ChaCha8Rng| {
            if integer {
                rng.random_range(-2..=2) as f64
            } else {
                rng.random_range(-1.0..1.0)
            }
        };
        let mut vectors = Array2::zeros((n, dim));
        for i in 0..n {
            if i > 0 && rng.random_bool(0.1) {
                let j = rng.random_range(0..i);
                let row = vectors.row(j).to_owned();
                vectors.row_mut(i).assign(&row);
            } else {
                for d in 0..dim {
                    vectors[[i, d]] = draw(&mut rng);
                }
            }
        }
        let index =
            DenseIndex::new(vectors.clone(), (0..n).collect()).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let q: Vec<f64> = (0..dim).map(|_| draw(&mut rng)).collect();
            let scores: Vec<f64> = (0..n)
                .map(|i| (0..dim).map(|d| vectors[[i, d]] * q[d]).sum())
                .collect();
            let order = oracle::rank_all(&scores);
            for k in 0..=n + 1 {
                let got = index
                    .top_k(&EmbeddingVector(q.clone()), k)
                    .map_err(|e| e.to_string())?;
                compare_ranking(&got, &scores, &order, k, false)
                    .map_err(|e| format!("dense n={n}: {e}"))?;
                comparisons += 1;
            }
        }
    }
    Ok(format!(
        "{corpora} corpora up to {max_docs} docs, {comparisons} top-k lists match"
    ))
}

// ---------------------------------------------------------------------------
// 3. gradients

fn group_errors<P: ParamGroups + Clone>(
    params: &P,
    analytic: &P,
    loss: impl Fn(&P) -> f64,
) -> Vec<(&'static str, f64)> {
    const H: f64 = 1e-5;
    const ZERO_GRAD: f64 = 1e-8;
    let names: Vec<&'static str> = params.groups().iter().map(|(n, _)| *n).collect();
    let analytic_groups = analytic.groups();
    let mut out = Vec::new();
    for (g, name) in names.iter().enumerate() {
        let a = analytic_groups[g].1;
        let (mut num, mut diff) = (0.0, 0.0);
        let mut norm_a = 0.0;
        for (i, &ai) in a.iter().enumerate() {
            let mut plus = params.clone();
            plus.groups_mut()[g].1[i] += H;
            let mut minus = params.clone();
            minus.groups_mut()[g].1[i] -= H;
            let n = (loss(&plus) - loss(&minus)) / (2.0 * H);
            num += n * n;
            norm_a += ai * ai;
            diff += (ai - n) * (ai - n);
        }
        let denom = num.sqrt() + norm_a.sqrt();
        // groups the loss is invariant to (e.g. a bias shared by every
        // document) have zero gradient; both sides are then rounding noise
        out.push((
            *name,
            if denom < ZERO_GRAD {
                0.0
            } else {
                diff.sqrt() / denom
            },
        ));
    }
    out
}

fn random_seq(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> TokenSequence {
    let len = rng.random_range(1..=max_len);
    TokenSequence(
        (0..len)
            .map(|_| rng.random_range(4..vocab as u32))
            .collect(),
    )
}

pub fn gradient_checks(configs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, String::new());
    let mut groups_checked = 0;
    let mut note = |errs: Vec<(&'static str, f64)>, model: &str| {
        for (name, e) in errs {
            groups_checked += 1;
            if e > worst.0 || !e.is_finite() {
                worst = (
                    if e.is_finite() { e } else { f64::INFINITY },
                    format!("{model} {name}"),
                );
            }
        }
    };
    for _ in 0..configs {
        let cfg = EncoderConfig {
            vocab_size: rng.random_range(6..12),
            d_emb: rng.random_range(1..5),
            d_hidden: rng.random_range(1..5),
            d_out: rng.random_range(1..5),
        };
        let retriever = Retriever::init(cfg, &mut rng);
        let b = rng.random_range(2..5);
        let negatives = rng.random_range(0..3);
        let qs: Vec<TokenSequence> = (0..b)
            .map(|_| random_seq(&mut rng, cfg.vocab_size, 4))
            .collect();
        let ds: Vec<TokenSequence> = (0..b + negatives)
            .map(|_| random_seq(&mut rng, cfg.vocab_size, 4))
            .collect();
        let qr: Vec<&TokenSequence> = qs.iter().collect();
        let dr: Vec<&TokenSequence> = ds.iter().collect();
        let (_, grads) =
            retriever_loss_and_grads(&retriever, &qr, &dr).map_err(|e| e.to_string())?;
        let loss = |r: &Retriever| retriever_loss_and_grads(r, &qr, &dr).unwrap().0;
        note(group_errors(&retriever, &grads, loss), "retriever");

        let vocab = rng.random_range(6..10);
        let d = 2 * rng.random_range(1..4);
        let params = Seq2SeqParams::init(Seq2SeqConfig::new(vocab, d), &mut rng);
        let batch: Vec<(Vec<u32>, Vec<u32>)> = (0..rng.random_range(1..4))
            .map(|_| {
                (
                    random_seq(&mut rng, vocab, 5).0,
                    random_seq(&mut rng, vocab, 4).0,
                )
            })
            .collect();
        let refs: Vec<(&[u32], &[u32])> = batch.iter().map(|(x, y)| (&x[..], &y[..])).collect();
        let (_, grads) = params.batch_loss_and_grads(&refs);
        note(
            group_errors(&params, &grads, |p: &Seq2SeqParams| {
                p.batch_loss_and_grads(&refs).0
            }),
            "seq2seq",
        );
    }
    if worst.0 < 1e-4 {
        Ok(format!("{configs} configurations per model, {groups_checked} groups, worst relative error {:.1e} ({})", worst.0, worst.1))
    } else {
        Err(format!("relative error {:.3e} in {}", worst.0, worst.1))
    }
}

// ---------------------------------------------------------------------------
// 4. loss identities

pub fn loss_identities(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for b in [2usize, 4, 8] {
        for _ in 0..5 {
            let v = EmbeddingVector((0..6).map(|_| rng.random_range(-3.0..3.0)).collect());
            let batch = vec![v; b];
            let loss = in_batch_loss(&batch, &batch)
                .map_err(|e| e.to_string())?
                .loss;
            worst = worst.max((loss - (b as f64).ln()).abs());
        }
    }
    for _ in 0..10 {
        let vocab = rng.random_range(5..40);
        let mut params = Seq2SeqParams::init(Seq2SeqConfig::new(vocab, 8), &mut rng);
        params.output.fill(0.0);
        let x = random_seq(&mut rng, vocab, 6).0;
        let y = random_seq(&mut rng, vocab, 6).0;
        let per_token = params.sequence_loss(&x, &y);
        let (batch, _) = params.batch_loss_and_grads(&[(&x, &y)]);
        worst = worst.max((per_token - (vocab as f64).ln()).abs());
        worst = worst.max((batch - (vocab as f64).ln()).abs());
    }
    if worst <= 1e-9 {
        Ok(format!("max deviation {worst:.1e}"))
    } else {
        Err(format!("deviation {worst:.3e}"))
    }
}

// ---------------------------------------------------------------------------
// shared setup for the pipeline criteria

pub struct Corpus {
    pub task: Task,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub db: RetrievalDatabase,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn new(cfg: &SyntheticConfig, task: Task) -> Self {
        let pairs = generate_corpus(cfg);
        let train = synthetic_examples(&pairs, task, Split::Train);
        let mut test = synthetic_examples(&pairs, task, Split::Test);
        if test.is_empty() {
            test = train.clone();
        }
        let db = synthetic_database(&pairs, task).unwrap();
        let all: Vec<Example> = train.iter().chain(&test).cloned().collect();
        let vocab = build_vocab(&db, &all, task, 50_000).unwrap();
        Corpus {
            task,
            train,
            test,
            db,
            vocab,
        }
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts {
            db: self.db.clone(),
            test: self.test.clone(),
            vocab: Some(self.vocab.clone()),
            retriever: None,
            generator: None,
        }
    }

    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            task: self.task,
            ..PipelineConfig::default()
        }
    }
}

pub fn retriever_config(seed: u64, hard_negatives: bool) -> RetrieverTrainConfig {
    RetrieverTrainConfig {
        seed,
        hard_negatives,
        ..RetrieverTrainConfig::default()
    }
}

/// (bm25, dense) MRR and dense recall@10 with targets kept in the database.
fn retrieval_scores(
    corpus: &Corpus,
    rcfg: &RetrieverTrainConfig,
) -> Result<(f64, f64, f64), String> {
    let (retriever, _) = train_dense_retriever(&corpus.train, corpus.task, &corpus.vocab, rcfg)
        .map_err(|e| e.to_string())?;
    let arts = Artifacts {
        retriever: Some(retriever),
        ..corpus.artifacts()
    };
    let res = retrieval_eval(&corpus.config(), &arts, &[10]).map_err(|e| e.to_string())?;
    let get = |k: &str, m: &str, metric: &str| {
        res.get(k, m, metric)
            .ok_or(format!("missing row {k}/{m}/{metric}"))
    };
    Ok((
        get("all", "bm25", "mrr")?,
        get("all", "dense", "mrr")?,
        get("10", "dense", "recall")?,
    ))
}

// ---------------------------------------------------------------------------
// 5. retriever learning

pub fn retriever_learning(n: usize, seed: u64) -> Check {
    let aligned = Corpus::new(&SyntheticConfig::aligned(n, seed), Task::CodeGen);
    let (_, _, recall10) = retrieval_scores(&aligned, &retriever_config(seed, false))?;
    let baseline = 10.0 / aligned.db.len() as f64;
    let para = Corpus::new(&SyntheticConfig::paraphrased(n, seed), Task::CodeGen);
    let (bm25, dense, _) = retrieval_scores(&para, &retriever_config(seed, false))?;
    let msg = format!(
        "aligned recall@10 {recall10:.3} (random {baseline:.3}); paraphrased MRR dense {dense:.3} vs bm25 {bm25:.3}"
    );
    if recall10 >= 10.0 * baseline && dense > bm25 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------------------
// 6. hard-negative ablation

pub fn hard_negative_ablation(cfg: &SyntheticConfig) -> Check {
    let corpus = Corpus::new(cfg, Task::CodeGen);
    let (_, plain, _) = retrieval_scores(&corpus, &retriever_config(cfg.seed, false))?;
    let (_, hard, _) = retrieval_scores(&corpus, &retriever_config(cfg.seed, true))?;
    let msg = format!("MRR without hard negatives {plain:.3}, with {hard:.3}");
    if plain >= hard - 0.05 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------------------
// 7-9. generation

pub fn generator_config(epochs: usize) -> GeneratorTrainConfig {
    GeneratorTrainConfig {
        epochs,
        lr: 3e-3,
        linear_decay: true,
        ..GeneratorTrainConfig::default()
    }
}

/// Trains a generator for `mode` and returns (EM, smoothed BLEU-4) on the test split.
pub fn augmented_run(
    corpus: &Corpus,
    mode: AugmentMode,
    gen: &GeneratorTrainConfig,
    seed: u64,
) -> Result<(f64, f64), String> {
    let cfg = PipelineConfig {
        mode,
        seed,
        generator_train: gen.clone(),
        ..corpus.config()
    };
    let mut arts = corpus.artifacts();
    arts.generator =
        Some(train_pipeline_generator(&cfg, &arts, &corpus.train).map_err(|e| e.to_string())?);
    let report = evaluate_pipeline(&cfg, &arts)
        .map_err(|e| e.to_string())?
        .report;
    Ok((report.exact_match, report.smoothed_bleu4))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn augmentation_benefit(
    seeds: &[u64],
    epochs: usize,
    base: impl Fn(u64) -> SyntheticConfig,
) -> Check {
    let modes = [AugmentMode::None, AugmentMode::Case1, AugmentMode::Case2];
    let mut em = vec![Vec::new(); 3];
    let mut bleu = vec![Vec::new(); 3];
    let mut lines = Vec::new();
    for &seed in seeds {
        let corpus = Corpus::new(&base(seed), Task::CodeGen);
        let mut line = format!("seed {seed}:");
        for (i, &mode) in modes.iter().enumerate() {
            let (e, b) = augmented_run(&corpus, mode, &generator_config(epochs), seed)?;
            em[i].push(e);
            bleu[i].push(b);
            line.push_str(&format!(" {mode:?} {e:.2}/{b:.1}"));
        }
        lines.push(line);
    }
    let em: Vec<f64> = em.into_iter().map(median).collect();
    let bleu: Vec<f64> = bleu.into_iter().map(median).collect();
    let msg = format!(
        "median EM/sBLEU none {:.2}/{:.1} case1 {:.2}/{:.1} case2 {:.2}/{:.1} [{}]",
        em[0],
        bleu[0],
        em[1],
        bleu[1],
        em[2],
        bleu[2],
        lines.join("; ")
    );
    let ordered = |v: &[f64]| v[2] >= v[1] && v[1] > v[0];
    if ordered(&em) && ordered(&bleu) && em[1] - em[0] >= 0.10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn copy_scores(corpus: &Corpus, exclude: bool) -> Result<(f64, f64), String> {
    let cfg = PipelineConfig {
        generator: GeneratorMode::Copy,
        exclude_targets: exclude,
        ..corpus.config()
    };
    let r = evaluate_pipeline(&cfg, &corpus.artifacts())
        .map_err(|e| e.to_string())?
        .report;
    Ok((r.exact_match, r.smoothed_bleu4))
}

pub fn target_present(cfg: &SyntheticConfig, epochs: usize) -> Check {
    let corpus = Corpus::new(cfg, Task::CodeGen);
    let (copy_out, _) = copy_scores(&corpus, true)?;
    let (copy_in, _) = copy_scores(&corpus, false)?;
    let mut pcfg = PipelineConfig {
        mode: AugmentMode::Case1,
        seed: cfg.seed,
        generator_train: generator_config(epochs),
        ..corpus.config()
    };
    let mut arts = corpus.artifacts();
    arts.generator =
        Some(train_pipeline_generator(&pcfg, &arts, &corpus.train).map_err(|e| e.to_string())?);
    let gen_out = evaluate_pipeline(&pcfg, &arts)
        .map_err(|e| e.to_string())?
        .report
        .exact_match;
    pcfg.exclude_targets = false;
    let gen_in = evaluate_pipeline(&pcfg, &arts)
        .map_err(|e| e.to_string())?
        .report
        .exact_match;
    let msg =
        format!("copy EM {copy_out:.2} -> {copy_in:.2}; generator EM {gen_out:.2} -> {gen_in:.2}");
    if copy_in > copy_out && gen_in > gen_out {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn copy_em_zero(cfg: &SyntheticConfig) -> Check {
    let corpus = Corpus::new(cfg, Task::CodeGen);
    let (em, bleu) = copy_scores(&corpus, true)?;
    let msg = format!("copy top-1 EM {em} smoothed BLEU-4 {bleu:.2}");
    if em == 0.0 && bleu > 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------------------
// 10. overfitting

fn train_em(
    params: &Seq2SeqParams,
    pairs: &[(TokenSequence, TokenSequence)],
    vocab: &Vocabulary,
) -> f64 {
    let cfg = DecodeConfig::default();
    let hits = pairs
        .iter()
        .filter(|(x, y)| generate_greedy(params, x.ids(), vocab, &cfg) == vocab.decode(y).join(" "))
        .count();
    hits as f64 / pairs.len() as f64
}

/// Trains until training EM is 1 or `max_epochs`; returns the params and the
/// epoch count reached.
fn overfit_run(
    pairs: &[(TokenSequence, TokenSequence)],
    vocab: &Vocabulary,
    cfg: &GeneratorTrainConfig,
    stop_at: Option<usize>,
) -> (Seq2SeqParams, usize, f64) {
    let mut reached = (0, 0.0);
    let (params, _) = train_generator_with(pairs, vocab.len(), cfg, |epoch, p, _| {
        let done = epoch + 1;
        if let Some(stop) = stop_at {
            return if done >= stop {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            };
        }
        if done % 10 == 0 || done == cfg.epochs {
            let em = train_em(p, pairs, vocab);
            reached = (done, em);
            if em == 1.0 {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    let epochs = stop_at.unwrap_or(reached.0);
    (params, epochs, reached.1)
}

pub fn overfit(n: usize, max_epochs: usize, seed: u64) -> Check {
    let corpus = Corpus::new(&SyntheticConfig::aligned(n, seed), Task::CodeGen);
    let examples: Vec<Example> = corpus.train.iter().take(n).cloned().collect();
    let inputs = retrogen_core::pipeline::stages::augment_all(
        AugmentMode::None,
        corpus.task,
        &examples,
        &vec![Vec::new(); examples.len()],
        &corpus.db,
        &corpus.vocab,
        512,
    );
    let pairs = generator_pairs(&inputs, &examples, corpus.task, &corpus.vocab);
    let cfg = GeneratorTrainConfig {
        epochs: max_epochs,
        lr: 3e-3,
        seed,
        ..GeneratorTrainConfig::default()
    };
    let (first, epochs, em) = overfit_run(&pairs, &corpus.vocab, &cfg, None);
    let (second, _, _) = overfit_run(&pairs, &corpus.vocab, &cfg, Some(epochs));
    let identical = first
        .groups()
        .iter()
        .zip(second.groups())
        .all(|((_, a), (_, b))| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let msg =
        format!("training EM {em:.2} after {epochs} epochs; rerun bitwise identical: {identical}");
    if em == 1.0 && identical {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------------------
// 11. totality

pub fn totality(strings: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::build(
        [
            tokenize_code("def f ( a ) { return a ; }"),
            tokenize_nl("returns a value"),
        ],
        100,
    )
    .map_err(|e| e.to_string())?;
    let mut longest = 0usize;
    for i in 0..strings {
        let a = gen::fuzz_string(&mut rng);
        let b = gen::fuzz_string(&mut rng);
        let max_len = rng.random_range(1..40);
        let mode = [AugmentMode::None, AugmentMode::Case1, AugmentMode::Case2][i % 3];
        let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<usize, String> {
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            let in_pct = |v: f64| (0.0..=100.0).contains(&v);
            let pair = [a.as_str()];
            let other = [b.as_str()];
            let checks = [
                (
                    "corpus BLEU",
                    in_pct(corpus_bleu(&pair, &other).map_err(|e| e.to_string())?),
                ),
                ("smoothed BLEU-4", in_pct(smoothed_bleu4(&a, &b))),
                (
                    "exact match",
                    in_unit(exact_match(&pair, &other).map_err(|e| e.to_string())?),
                ),
                ("CodeBLEU", {
                    let s = codebleu(&pair, &other).map_err(|e| e.to_string())?;
                    [s.codebleu, s.ngram, s.weighted_ngram, s.ast, s.dataflow]
                        .into_iter()
                        .all(in_unit)
                }),
                (
                    "AST match",
                    in_unit(ast_match(&parse_minilang(&a), &parse_minilang(&b))),
                ),
                ("data-flow match", in_unit(dataflow_match(&a, &b))),
            ];
            if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
                return Err(format!("{name} out of range"));
            }
            tokenize_nl(&a);
            let cands = [RetrievedCandidate {
                primary_text: b.clone(),
                paired_text: Some(a.clone()),
                score: 1.0,
                rank: 1,
            }];
            let out = render(
                mode,
                &a,
                &cands,
                &vocab,
                RenderKinds::for_task(Task::CodeGen),
                max_len,
            );
            if out.rendered.len() > max_len {
                return Err(format!(
                    "rendered {} tokens over max_len {max_len}",
                    out.rendered.len()
                ));
            }
            Ok(out.rendered.len())
        }));
        match outcome {
            Ok(Ok(len)) => longest = longest.max(len),
            Ok(Err(e)) => return Err(format!("{e} on {a:?} / {b:?}")),
            Err(_) => return Err(format!("panic on {a:?} / {b:?}")),
        }
    }
    Ok(format!(
        "{strings} random strings, longest rendered input {longest}"
    ))
}

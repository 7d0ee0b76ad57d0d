use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentMode, DEFAULT_MAX_LEN};
use crate::corpus::Task;
use crate::dense::RetrieverTrainConfig;
use crate::error::{Error, Result};
use crate::generate::{GeneratorMode, GeneratorTrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMethod {
    Bm25,
    Dense,
}

impl FromStr for RetrievalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm25" => Ok(RetrievalMethod::Bm25),
            "dense" => Ok(RetrievalMethod::Dense),
            other => Err(Error::Config(format!("unknown retrieval method {other:?}"))),
        }
    }
}

impl RetrievalMethod {
    pub fn name(self) -> &'static str {
        match self {
            RetrievalMethod::Bm25 => "bm25",
            RetrievalMethod::Dense => "dense",
        }
    }
}

/// Settings shared by every stage. Read from a `key = value` file, then
/// overridden key by key from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub task: Task,
    pub method: RetrievalMethod,
    pub mode: AugmentMode,
    pub generator: GeneratorMode,
    pub k: usize,
    pub max_len: usize,
    pub exclude_targets: bool,
    pub seed: u64,
    pub max_target_len: usize,

    pub db_path: Option<PathBuf>,
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub vocab_path: Option<PathBuf>,
    pub retriever_path: Option<PathBuf>,
    pub generator_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,

    pub vocab_size: usize,
    pub generator_train: GeneratorTrainConfig,
    pub retriever_train: RetrieverTrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            task: Task::CodeGen,
            method: RetrievalMethod::Bm25,
            mode: AugmentMode::Case1,
            generator: GeneratorMode::Seq2seq,
            k: 1,
            max_len: DEFAULT_MAX_LEN,
            exclude_targets: true,
            seed: 0,
            max_target_len: 128,
            db_path: None,
            train_path: None,
            test_path: None,
            vocab_path: None,
            retriever_path: None,
            generator_path: None,
            output_dir: None,
            vocab_size: 50_000,
            generator_train: GeneratorTrainConfig::default(),
            retriever_train: RetrieverTrainConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {value:?} for {key}"))),
    }
}

impl PipelineConfig {
    /// Sets one option. Keys use the field names; training options are
    /// prefixed with `gen_` or `retriever_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let path = || Some(PathBuf::from(value));
        match key.trim() {
            "task" => self.task = value.parse()?,
            "method" => self.method = value.parse()?,
            "mode" => self.mode = value.parse()?,
            "generator" => self.generator = value.parse()?,
            "k" => self.k = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "exclude_targets" => self.exclude_targets = parse_bool(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "max_target_len" => self.max_target_len = parse(key, value)?,
            "db" => self.db_path = path(),
            "train" => self.train_path = path(),
            "test" => self.test_path = path(),
            "vocab" => self.vocab_path = path(),
            "retriever" => self.retriever_path = path(),
            "generator_params" => self.generator_path = path(),
            "output_dir" => self.output_dir = path(),
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "gen_d_model" => self.generator_train.d_model = parse(key, value)?,
            "gen_epochs" => self.generator_train.epochs = parse(key, value)?,
            "gen_batch_size" => self.generator_train.batch_size = parse(key, value)?,
            "gen_lr" => self.generator_train.lr = parse(key, value)?,
            "gen_linear_decay" => self.generator_train.linear_decay = parse_bool(key, value)?,
            "retriever_epochs" => self.retriever_train.epochs = parse(key, value)?,
            "retriever_batch_size" => self.retriever_train.batch_size = parse(key, value)?,
            "retriever_lr" => self.retriever_train.lr = parse(key, value)?,
            "retriever_hard_negatives" => {
                self.retriever_train.hard_negatives = parse_bool(key, value)?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        self.validate()
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = PipelineConfig::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if self.max_target_len == 0 {
            return Err(Error::Config("max_target_len must be at least 1".into()));
        }
        Ok(())
    }

    /// Short label naming retrieval method, augmentation and generator.
    pub fn label(&self) -> String {
        let gen = match self.generator {
            GeneratorMode::Copy => "copy",
            GeneratorMode::Seq2seq => "seq2seq",
        };
        let mode = match self.mode {
            AugmentMode::None => "none",
            AugmentMode::Case1 => "case1",
            AugmentMode::Case2 => "case2",
        };
        format!("{}/{}/{}", self.method.name(), mode, gen)
    }
}

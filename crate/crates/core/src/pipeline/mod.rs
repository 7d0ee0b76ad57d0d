//! Stage orchestration: configuration, artifact files, the end-to-end run
//! and analysis sweeps.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod stages;
pub mod synthetic;

pub use artifacts::{read_jsonl, write_jsonl, AugmentedRecord, Example, Prediction, RetrievalHit};
pub use config::{PipelineConfig, RetrievalMethod};
pub use experiments::{
    bucket_by_target_length, evaluate_pipeline, retrieval_eval, run_pipeline, sweep_k,
    train_pipeline_generator, Artifacts, ExperimentResult, PipelineRun, ResultRow,
    DEFAULT_BUCKET_EDGES,
};
pub use stages::RetrievalEngine;

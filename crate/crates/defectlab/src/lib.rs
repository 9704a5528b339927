//! defectlab: a workbench for studying defect prediction on version
//! histories, end to end: mine a repository, label bug-inducing changes,
//! compute change (process) and code (product) metrics, assemble datasets,
//! train seeded learners, score them with effort-aware measures, and rank
//! configurations statistically.
//!
//! The library surface is organised around the pipeline stages; each stage
//! has a runnable walkthrough under `examples/`:
//!
//! ```text
//! cargo run --example mine_history         repository -> commit dump
//! cargo run --example label_bugs           dump + repo -> inducing labels
//! cargo run --example change_metrics       dump + releases -> process metrics
//! cargo run --example code_metrics         repo snapshots -> product metrics
//! cargo run --example balance_training_data  oversampling walkthrough
//! cargo run --example train_and_score      one train/test round, all learners
//! cargo run --example rank_learners        statistical ranking walkthrough
//! cargo run --example synthetic_corpus     generated corpus + experiments
//! cargo run --example full_pipeline        fixture repo -> ranked results
//! ```
//!
//! The same stages are reachable from the thin `defectlab` binary
//! (`mine`, `releases`, `label`, `metrics`, `assemble`, `experiment`,
//! `rank`, `report`, `fixtures`).

pub mod error;
pub mod gitio;

pub mod dataset;
pub mod evaluation;
pub mod experiments;
pub mod fixtures;
pub mod labeling;
pub mod learners;
pub mod manifest;
pub mod process_metrics;
pub mod product_metrics;
pub mod repo_mining;
pub mod rng;
pub mod stats;
pub mod synth;

pub mod cli;

pub use error::{Error, Result};

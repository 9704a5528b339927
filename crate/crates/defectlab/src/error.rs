use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for the whole workbench.
///
/// Validation problems (bad flags, malformed input, impossible split
/// requests) map to exit code 1; runtime failures (subprocess, io,
/// numeric breakdown) map to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mining: {0}")]
    Mining(String),

    #[error("parse error in {source_name} line {line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("labeling {path} (fix {fix}): {msg}")]
    Labeling {
        fix: String,
        path: String,
        msg: String,
    },

    #[error("snapshot {commit}:{path}: {msg}")]
    Snapshot {
        commit: String,
        path: String,
        msg: String,
    },

    #[error("import {path}: {msg}")]
    Import { path: PathBuf, msg: String },

    #[error("data: {0}")]
    Data(String),

    #[error("resample: {0}")]
    Resample(String),

    #[error("split: {0}")]
    Split(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("score: {0}")]
    Score(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("stats: {0}")]
    Stats(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code this error maps to: 1 for input/validation
    /// problems, 2 for runtime failures.
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Config(_)
            | Error::Import { .. }
            | Error::Data(_)
            | Error::Split(_)
            | Error::Unsupported(_) => 1,
            _ => 2,
        }
    }

    pub fn parse(source_name: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! The four classifiers behind the benchmark, under one seeded contract:
//! fit on a preprocessed dataset, produce a ranking score per row, a binary
//! prediction, and (for rf and lr) a feature-importance vector.

pub mod bayes;
pub mod forest;
pub mod linear;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
pub use bayes::GaussianNb;
pub use forest::{Forest, ForestParams};
pub use linear::{GdParams, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Nb,
    Lr,
    Svm,
    Rf,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::Nb,
        LearnerKind::Lr,
        LearnerKind::Svm,
        LearnerKind::Rf,
    ];

    #[must_use]
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Nb => "nb",
            LearnerKind::Lr => "lr",
            LearnerKind::Svm => "svm",
            LearnerKind::Rf => "rf",
        }
    }

    pub fn parse(s: &str) -> Result<LearnerKind> {
        match s {
            "nb" => Ok(LearnerKind::Nb),
            "lr" => Ok(LearnerKind::Lr),
            "svm" => Ok(LearnerKind::Svm),
            "rf" => Ok(LearnerKind::Rf),
            other => Err(Error::Config(format!(
                "unknown learner {other:?}; expected nb, lr, svm, or rf"
            ))),
        }
    }
}

/// Everything needed to refit a model: kind, seed, and hyperparameters.
/// Defaults are fully enumerated so runs are reproducible from the spec
/// alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: LearnerKind,
    pub seed: u64,
    pub lr: GdParams,
    pub svm: GdParams,
    pub rf: ForestParams,
}

impl ModelSpec {
    #[must_use]
    pub fn new(kind: LearnerKind, seed: u64) -> Self {
        ModelSpec {
            kind,
            seed,
            lr: GdParams::default(),
            svm: GdParams::default(),
            rf: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum Model {
    Nb(GaussianNb),
    Lr(LinearModel),
    Svm(LinearModel),
    Rf(Forest),
}

impl Model {
    #[must_use]
    pub fn kind(&self) -> LearnerKind {
        match self {
            Model::Nb(_) => LearnerKind::Nb,
            Model::Lr(_) => LearnerKind::Lr,
            Model::Svm(_) => LearnerKind::Svm,
            Model::Rf(_) => LearnerKind::Rf,
        }
    }

    #[must_use]
    pub fn n_features(&self) -> usize {
        match self {
            Model::Nb(m) => m.mean[0].len(),
            Model::Lr(m) | Model::Svm(m) => m.weights.len(),
            Model::Rf(m) => m.n_features,
        }
    }

    /// Ranking score: posterior/vote fraction in [0,1] for nb, lr, rf; a
    /// raw margin for svm (only its sign and order carry meaning).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::Score(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        Ok(match self {
            Model::Nb(m) => m.posterior(x),
            Model::Lr(m) => linear::sigmoid(m.linear(x)),
            Model::Svm(m) => m.linear(x),
            Model::Rf(m) => m.vote_fraction(x),
        })
    }

    /// Threshold 0.5 on probabilities, 0 on the svm margin; exact ties
    /// resolve clean.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        let s = self.score(x)?;
        Ok(match self {
            Model::Svm(_) => s > 0.0,
            _ => s > 0.5,
        })
    }

    pub fn score_all(&self, ds: &Dataset) -> Result<Vec<f64>> {
        ds.x.iter().map(|row| self.score(row)).collect()
    }

    /// rf: normalized mean impurity decrease; lr: |beta|. The other two
    /// have no defined importance and refuse.
    pub fn feature_importance(&self) -> Result<Vec<f64>> {
        match self {
            Model::Rf(m) => Ok(m.importances.clone()),
            Model::Lr(m) => Ok(m.weights.iter().map(|w| w.abs()).collect()),
            Model::Nb(_) => Err(Error::Unsupported(
                "naive Bayes has no feature importance".into(),
            )),
            Model::Svm(_) => Err(Error::Unsupported(
                "svm importance is not defined here".into(),
            )),
        }
    }
}

/// Fits the learner named by the spec on preprocessed training data.
pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<Model> {
    if train.is_empty() {
        return Err(Error::Fit("empty training data".into()));
    }
    let pos = train.y.iter().filter(|&&b| b).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::Fit("single-class training data".into()));
    }
    if train.x.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Fit(
            "training data contains missing values; preprocess first".into(),
        ));
    }
    Ok(match spec.kind {
        LearnerKind::Nb => Model::Nb(bayes::fit(&train.x, &train.y)),
        LearnerKind::Lr => Model::Lr(linear::fit_logistic(&train.x, &train.y, &spec.lr)),
        LearnerKind::Svm => Model::Svm(linear::fit_svm(&train.x, &train.y, &spec.svm)),
        LearnerKind::Rf => Model::Rf(forest::fit(&train.x, &train.y, &spec.rf, spec.seed)),
    })
}

// ---------------------------------------------------------------------------
// Persistence

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub version: u32,
    pub spec: ModelSpec,
    #[serde(flatten)]
    pub model: Model,
}

pub fn save_model<W: Write>(spec: &ModelSpec, model: &Model, w: W) -> Result<()> {
    let doc = SavedModel {
        version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        model: model.clone(),
    };
    serde_json::to_writer_pretty(w, &doc)?;
    Ok(())
}

pub fn load_model<R: Read>(r: R) -> Result<(ModelSpec, Model)> {
    let doc: SavedModel = serde_json::from_reader(r)?;
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported model format version {}",
            doc.version
        )));
    }
    Ok((doc.spec, doc.model))
}

//! Orchestrates the eight research questions over a corpus of assembled
//! project datasets and writes analysis-ready CSV tables.
//!
//! Cells (project x mode x learner) are independent jobs with derived
//! seeds; failures are recorded as skips, never silently dropped. Rankings
//! across the corpus feed per-project medians (not pooled rows) into the
//! Scott-Knott procedure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dataset::{
    self, Dataset, Granularity, Level, Mode, ResampleConfig, SplitKind,
};
use crate::error::{Error, Result};
use crate::evaluation::{self, EvalResult, Measure, ResultRow, MEASURES};
use crate::learners::{self, LearnerKind, ModelSpec};
use crate::manifest::{self, RunManifest};
use crate::process_metrics::PROCESS_METRICS;
use crate::product_metrics::PRODUCT_METRICS;
use crate::stats::{self, RankGroup, RankedGroup, SkConfig};

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rq6Reading {
    /// Correlate the model's training-period score with its test-period
    /// score (the default reading of "learned probability").
    Score,
    /// Correlate the training-period per-file defect density with the
    /// test-period score instead.
    Density,
}

impl Rq6Reading {
    #[must_use]
    pub fn as_str(&self) -> &'static str {
        match self {
            Rq6Reading::Score => "score",
            Rq6Reading::Density => "density",
        }
    }

    pub fn parse(s: &str) -> Result<Rq6Reading> {
        match s {
            "score" => Ok(Rq6Reading::Score),
            "density" => Ok(Rq6Reading::Density),
            other => Err(Error::Config(format!(
                "unknown rq6_reading {other:?}; expected score or density"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub projects: Vec<PathBuf>,
    pub modes: Vec<Mode>,
    pub learners: Vec<LearnerKind>,
    pub split: SplitKind,
    pub seed: u64,
    pub measures: Vec<Measure>,
    /// Number of small-team samples drawn for the importance comparison.
    pub small_samples: usize,
    /// Projects per small-team sample.
    pub small_size: usize,
    pub rq6_reading: Rq6Reading,
}

impl ExperimentConfig {
    /// Parses the flat `key = value` format. Every field has a default
    /// except `seed`, which is mandatory. Lines starting with `#` and
    /// blank lines are ignored; later assignments override earlier ones.
    ///
    /// Keys: `projects` (comma-separated paths, resolved against `base`),
    /// `modes` (P, C, P+C), `learners` (nb, lr, svm, rf), `split`
    /// (cv | release), `repeats`, `folds`, `seed`, `measures`,
    /// `small_samples`, `small_size`, `rq6_reading` (score | density).
    pub fn parse(text: &str, base: &Path) -> Result<ExperimentConfig> {
        let mut projects = Vec::new();
        let mut modes = vec![Mode::Process, Mode::Product, Mode::Combined];
        let mut learners = LearnerKind::ALL.to_vec();
        let mut split_name = "cv".to_string();
        let mut repeats = 5usize;
        let mut folds = 5usize;
        let mut seed: Option<u64> = None;
        let mut measures = MEASURES.to_vec();
        let mut small_samples = 20usize;
        let mut small_size = 5usize;
        let mut rq6_reading = Rq6Reading::Score;

        let list = |v: &str| -> Vec<String> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        };
        let int = |k: &str, v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("{k} wants an integer, got {v:?}")))
        };

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "config line {}: expected key = value, got {line:?}",
                    lineno + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "projects" => {
                    projects = list(value).iter().map(|p| base.join(p)).collect();
                }
                "modes" => {
                    modes = list(value)
                        .iter()
                        .map(|m| Mode::parse(m))
                        .collect::<Result<_>>()?;
                }
                "learners" => {
                    learners = list(value)
                        .iter()
                        .map(|l| LearnerKind::parse(l))
                        .collect::<Result<_>>()?;
                }
                "split" => match value {
                    "cv" | "release" => split_name = value.to_string(),
                    other => {
                        return Err(Error::Config(format!(
                            "split must be cv or release, got {other:?}"
                        )))
                    }
                },
                "repeats" => repeats = int(key, value)?,
                "folds" => folds = int(key, value)?,
                "seed" => {
                    seed = Some(value.parse().map_err(|_| {
                        Error::Config(format!("seed wants an unsigned integer, got {value:?}"))
                    })?);
                }
                "measures" => {
                    measures = list(value)
                        .iter()
                        .map(|m| Measure::parse(m))
                        .collect::<Result<_>>()?;
                }
                "small_samples" => small_samples = int(key, value)?,
                "small_size" => small_size = int(key, value)?,
                "rq6_reading" => rq6_reading = Rq6Reading::parse(value)?,
                other => {
                    return Err(Error::Config(format!(
                        "config line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let seed = seed.ok_or_else(|| Error::Config("seed is mandatory".into()))?;
        let split = match split_name.as_str() {
            "release" => SplitKind::ReleaseBased,
            _ => SplitKind::CrossVal { repeats, folds },
        };
        Ok(ExperimentConfig {
            projects,
            modes,
            learners,
            split,
            seed,
            measures,
            small_samples,
            small_size,
            rq6_reading,
        })
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        ExperimentConfig::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.projects.is_empty() {
            return Err(Error::Config("no project datasets listed".into()));
        }
        for p in &self.projects {
            if !p.exists() {
                return Err(Error::Config(format!("dataset {} does not exist", p.display())));
            }
        }
        if self.modes.is_empty() {
            return Err(Error::Config("mode list is empty".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Config("learner list is empty".into()));
        }
        if self.measures.is_empty() {
            return Err(Error::Config("measure list is empty".into()));
        }
        if self.small_samples == 0 || self.small_size == 0 {
            return Err(Error::Config("small-sample counts must be positive".into()));
        }
        Ok(())
    }
}

/// Stable per-cell seed derivation: a hash of the run seed and the cell's
/// labels, so cells are independent of config ordering and each other.
#[must_use]
pub fn cell_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("sha256 is 32 bytes"))
}

// ---------------------------------------------------------------------------
// Dataset loading and mode views

/// Reads a dataset CSV, inferring mode from the feature columns, level
/// from whether commit ids survive, and granularity from the names.
pub fn read_dataset_auto(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Error::Data(format!("{} is empty", path.display())))?;
    let features: Vec<&str> = header.split(',').skip(6).collect();
    let has_all = |names: &[&str]| names.iter().all(|n| features.contains(n));
    let mode = if has_all(&PROCESS_METRICS) && has_all(&PRODUCT_METRICS) {
        Mode::Combined
    } else if has_all(&PROCESS_METRICS) {
        Mode::Process
    } else if has_all(&PRODUCT_METRICS) {
        Mode::Product
    } else {
        return Err(Error::Data(format!(
            "{} carries neither a full process nor a full product column set",
            path.display()
        )));
    };
    let source = path.display().to_string();
    let mut ds = dataset::read_dataset_csv(
        std::io::Cursor::new(text),
        &source,
        mode,
        Granularity::File,
        Level::Jit,
    )?;
    if ds.meta.iter().all(|m| m.commit.is_empty()) {
        ds.level = Level::Release;
    }
    if !ds.meta.is_empty() && ds.meta.iter().all(|m| !m.name.contains('.')) {
        ds.granularity = Granularity::Package;
    }
    Ok(ds)
}

fn load_projects(cfg: &ExperimentConfig) -> Result<Vec<(String, Dataset)>> {
    cfg.projects
        .iter()
        .map(|p| {
            let ds = read_dataset_auto(p)?;
            let name = ds
                .meta
                .first()
                .map(|m| m.project.clone())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| {
                    p.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| p.display().to_string())
                });
            Ok((name, ds))
        })
        .collect()
}

/// Projects a combined dataset onto one feature family. The effort proxy
/// is re-read from the matrix: lines before the change (`lt`) for the
/// process view, `CountLineCode` otherwise, falling back to the stored
/// effort when the column is absent.
pub fn filter_mode(ds: &Dataset, mode: Mode) -> Result<Dataset> {
    if ds.mode == mode {
        return Ok(ds.clone());
    }
    if ds.mode != Mode::Combined {
        return Err(Error::Config(format!(
            "dataset holds only {} columns; cannot derive the {} view",
            ds.mode.as_str(),
            mode.as_str()
        )));
    }
    let wanted: &[&str] = match mode {
        Mode::Process => &PROCESS_METRICS,
        Mode::Product => &PRODUCT_METRICS,
        Mode::Combined => unreachable!("handled by the identity case"),
    };
    let keep: Vec<usize> = ds
        .feature_names
        .iter()
        .enumerate()
        .filter(|(_, n)| wanted.contains(&n.as_str()))
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::Config(format!(
            "no {} columns present in the dataset",
            mode.as_str()
        )));
    }
    let effort_col = match mode {
        Mode::Process => ds.feature_index("lt"),
        _ => ds.feature_index("CountLineCode"),
    };
    let mut out = ds.clone();
    out.feature_names = keep.iter().map(|&i| ds.feature_names[i].clone()).collect();
    out.x = ds
        .x
        .iter()
        .map(|row| keep.iter().map(|&i| row[i]).collect())
        .collect();
    if let Some(c) = effort_col {
        out.effort = ds.x.iter().map(|row| row[c]).collect();
    }
    out.mode = mode;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Performance substrate (RQ1/RQ2)

#[derive(Debug, Clone, PartialEq)]
pub struct Skip {
    pub scope: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub skips: Vec<Skip>,
}

fn fit_and_eval(spec: &ModelSpec, train: &Dataset, test: &Dataset) -> Result<EvalResult> {
    let model = learners::fit(spec, train)?;
    let scores = model.score_all(test)?;
    let pred = test
        .x
        .iter()
        .map(|row| model.predict(row))
        .collect::<Result<Vec<bool>>>()?;
    evaluation::evaluate(&scores, &pred, &test.y, &test.effort)
}

/// Runs preprocess -> resample -> fit -> evaluate for every project x mode
/// x learner x split cell. Splits are derived per project (shared across
/// modes and learners so comparisons stay paired).
#[must_use]
pub fn run_performance_on(
    projects: &[(String, Dataset)],
    cfg: &ExperimentConfig,
) -> RunOutput {
    let cells: Vec<(usize, Mode)> = (0..projects.len())
        .flat_map(|pi| cfg.modes.iter().map(move |&m| (pi, m)))
        .collect();
    let per_cell: Vec<(Vec<ResultRow>, Vec<Skip>)> = cells
        .par_iter()
        .map(|&(pi, mode)| {
            let (pname, ds) = &projects[pi];
            let mut rows = Vec::new();
            let mut skips = Vec::new();
            let scope = |rest: &str| format!("{pname}/{}{rest}", mode.as_str());
            let sub = match filter_mode(ds, mode) {
                Ok(s) => s,
                Err(e) => {
                    skips.push(Skip { scope: scope(""), reason: e.to_string() });
                    return (rows, skips);
                }
            };
            let plan = match dataset::make_splits(
                &sub,
                &cfg.split,
                cell_seed(cfg.seed, &["split", pname]),
            ) {
                Ok(p) => p,
                Err(e) => {
                    skips.push(Skip { scope: scope(""), reason: e.to_string() });
                    return (rows, skips);
                }
            };
            for split in &plan.splits {
                let train = sub.subset(&split.train);
                let test = sub.subset(&split.test);
                let (ptrain, ptest, _) = match dataset::preprocess(&train, &test) {
                    Ok(t) => t,
                    Err(e) => {
                        skips.push(Skip {
                            scope: scope(&format!("/{}", split.name)),
                            reason: e.to_string(),
                        });
                        continue;
                    }
                };
                let strain = match dataset::smote(
                    &ptrain,
                    &ResampleConfig {
                        k: 5,
                        seed: cell_seed(cfg.seed, &["smote", pname, mode.as_str(), &split.name]),
                    },
                ) {
                    Ok(t) => t,
                    Err(e) => {
                        skips.push(Skip {
                            scope: scope(&format!("/{}", split.name)),
                            reason: e.to_string(),
                        });
                        continue;
                    }
                };
                for &lk in &cfg.learners {
                    let spec = ModelSpec::new(
                        lk,
                        cell_seed(
                            cfg.seed,
                            &["fit", pname, mode.as_str(), lk.as_str(), &split.name],
                        ),
                    );
                    match fit_and_eval(&spec, &strain, &ptest) {
                        Ok(result) => rows.push(ResultRow {
                            project: pname.clone(),
                            mode,
                            granularity: sub.granularity,
                            level: sub.level,
                            learner: lk,
                            fold_or_release: split.name.clone(),
                            result,
                        }),
                        Err(e) => skips.push(Skip {
                            scope: scope(&format!("/{}/{}", lk.as_str(), split.name)),
                            reason: e.to_string(),
                        }),
                    }
                }
            }
            (rows, skips)
        })
        .collect();
    let mut out = RunOutput::default();
    for (rows, skips) in per_cell {
        out.rows.extend(rows);
        out.skips.extend(skips);
    }
    out
}

pub fn rq_performance(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let projects = load_projects(cfg)?;
    Ok(run_performance_on(&projects, cfg))
}

// ---------------------------------------------------------------------------
// Medians, quantiles, variance (RQ2)

/// Type-7 (linear interpolation) quantile of an ascending slice.
#[must_use]
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of nothing");
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-project median of a measure, keyed and ordered by first appearance.
fn project_medians(
    rows: &[ResultRow],
    measure: Measure,
    filter: impl Fn(&ResultRow) -> bool,
) -> Vec<f64> {
    let mut order: Vec<&str> = Vec::new();
    let mut per: HashMap<&str, Vec<f64>> = HashMap::new();
    for r in rows.iter().filter(|r| filter(r)) {
        if let Some(v) = r.result.get(measure) {
            if !per.contains_key(r.project.as_str()) {
                order.push(&r.project);
            }
            per.entry(&r.project).or_default().push(v);
        }
    }
    order
        .iter()
        .map(|p| stats::median(per.get(p).expect("keyed by order")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub learner: LearnerKind,
    pub mode: Mode,
    pub measure: Measure,
    /// Projects contributing a defined median.
    pub projects: usize,
    pub median: f64,
    pub iqr: f64,
}

/// The variance report: median and IQR, over projects, of each project's
/// median result, per learner x mode x measure.
#[must_use]
pub fn variance_report(rows: &[ResultRow], measures: &[Measure]) -> Vec<VarianceRow> {
    let mut combos: Vec<(LearnerKind, Mode)> = Vec::new();
    for r in rows {
        if !combos.contains(&(r.learner, r.mode)) {
            combos.push((r.learner, r.mode));
        }
    }
    let mut out = Vec::new();
    for (lk, mode) in combos {
        for &measure in measures {
            let mut medians =
                project_medians(rows, measure, |r| r.learner == lk && r.mode == mode);
            if medians.is_empty() {
                continue;
            }
            medians.sort_by(|a, b| a.total_cmp(b));
            out.push(VarianceRow {
                learner: lk,
                mode,
                measure,
                projects: medians.len(),
                median: quantile(&medians, 0.5),
                iqr: quantile(&medians, 0.75) - quantile(&medians, 0.25),
            });
        }
    }
    out
}

pub const VARIANCE_HEADER: &str = "learner,mode,measure,projects,median,iqr";

pub fn write_variance_csv<W: Write>(rows: &[VarianceRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(VARIANCE_HEADER.split(','))?;
    for r in rows {
        wtr.write_record([
            r.learner.as_str(),
            r.mode.as_str(),
            r.measure.as_str(),
            &r.projects.to_string(),
            &format!("{}", r.median),
            &format!("{}", r.iqr),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Groups results as `learner/mode`, feeds each group's per-project
/// medians to Scott-Knott. Direction follows the measure unless overridden.
pub fn rank_results(
    rows: &[ResultRow],
    measure: Measure,
    smaller_is_better: bool,
    seed: u64,
) -> Result<Vec<RankedGroup>> {
    let mut keys: Vec<(LearnerKind, Mode)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.learner, r.mode)) {
            keys.push((r.learner, r.mode));
        }
    }
    let groups: Vec<RankGroup> = keys
        .iter()
        .map(|&(lk, mode)| RankGroup {
            name: format!("{}/{}", lk.as_str(), mode.as_str()),
            values: project_medians(rows, measure, |r| r.learner == lk && r.mode == mode),
        })
        .filter(|g| !g.values.is_empty())
        .collect();
    stats::scott_knott(
        &groups,
        &SkConfig {
            seed,
            smaller_is_better,
            ..SkConfig::default()
        },
    )
}

// ---------------------------------------------------------------------------
// RQ3: file vs package granularity

#[derive(Debug)]
pub struct Rq3Output {
    pub file: RunOutput,
    pub package: RunOutput,
    /// Scott-Knott of {file, package} per measure over per-(project,
    /// mode, learner) medians.
    pub ranks: Vec<(Measure, Vec<RankedGroup>)>,
    pub skips: Vec<Skip>,
}

fn cell_medians(rows: &[ResultRow], measure: Measure) -> Vec<f64> {
    let mut order: Vec<(String, Mode, LearnerKind)> = Vec::new();
    let mut per: HashMap<(String, Mode, LearnerKind), Vec<f64>> = HashMap::new();
    for r in rows {
        if let Some(v) = r.result.get(measure) {
            let key = (r.project.clone(), r.mode, r.learner);
            if !per.contains_key(&key) {
                order.push(key.clone());
            }
            per.entry(key).or_default().push(v);
        }
    }
    order
        .iter()
        .map(|k| stats::median(per.get(k).expect("keyed by order")))
        .collect()
}

pub fn rq3_granularity(cfg: &ExperimentConfig) -> Result<Rq3Output> {
    cfg.validate()?;
    let projects = load_projects(cfg)?;
    let mut skips = Vec::new();
    let mut file_set = Vec::new();
    let mut package_set = Vec::new();
    for (name, ds) in projects {
        let pkg = dataset::aggregate_packages(&ds);
        let distinct: BTreeSet<&str> = pkg.meta.iter().map(|m| m.name.as_str()).collect();
        if distinct.len() < 2 {
            skips.push(Skip {
                scope: name,
                reason: "single package; no package structure to compare".into(),
            });
            continue;
        }
        file_set.push((name.clone(), ds));
        package_set.push((name, pkg));
    }
    if file_set.is_empty() {
        return Err(Error::Data(
            "no project in the corpus has package structure".into(),
        ));
    }
    let file = run_performance_on(&file_set, cfg);
    let package = run_performance_on(&package_set, cfg);
    let mut ranks = Vec::new();
    for &measure in &cfg.measures {
        let groups = vec![
            RankGroup { name: "file".into(), values: cell_medians(&file.rows, measure) },
            RankGroup { name: "package".into(), values: cell_medians(&package.rows, measure) },
        ];
        if groups.iter().any(|g| g.values.is_empty()) {
            skips.push(Skip {
                scope: format!("ranks/{}", measure.as_str()),
                reason: "a granularity produced no defined values".into(),
            });
            continue;
        }
        let ranked = stats::scott_knott(
            &groups,
            &SkConfig {
                seed: cfg.seed,
                smaller_is_better: measure.smaller_is_better(),
                ..SkConfig::default()
            },
        )?;
        ranks.push((measure, ranked));
    }
    Ok(Rq3Output { file, package, ranks, skips })
}

// ---------------------------------------------------------------------------
// RQ4: stability across the last three releases

#[derive(Debug)]
pub struct Rq4Output {
    pub rows: Vec<ResultRow>,
    pub skips: Vec<Skip>,
    /// Scott-Knott of {R-2, R-1, R} per mode x measure over per-(project,
    /// learner) values.
    pub ranks: Vec<(Mode, Measure, Vec<RankedGroup>)>,
}

pub fn rq4_stability(cfg: &ExperimentConfig) -> Result<Rq4Output> {
    cfg.validate()?;
    let projects = load_projects(cfg)?;
    let release_cfg = ExperimentConfig {
        split: SplitKind::ReleaseBased,
        ..cfg.clone()
    };
    let out = run_performance_on(&projects, &release_cfg);

    // Align test releases across projects by position: oldest test release
    // first. Labels are "R-2", "R-1", "R".
    let mut per_project: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for r in &out.rows {
        if let Some(n) = r.fold_or_release.strip_prefix("release-") {
            if let Ok(num) = n.parse::<u32>() {
                per_project.entry(&r.project).or_default().insert(num);
            }
        }
    }
    let position = |project: &str, label: &str| -> Option<usize> {
        let num: u32 = label.strip_prefix("release-")?.parse().ok()?;
        per_project.get(project)?.iter().position(|&r| r == num)
    };
    const LABELS: [&str; 3] = ["R-2", "R-1", "R"];

    let mut ranks = Vec::new();
    for &mode in &cfg.modes {
        for &measure in &cfg.measures {
            let mut values: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            for r in out.rows.iter().filter(|r| r.mode == mode) {
                let (Some(pos), Some(v)) =
                    (position(&r.project, &r.fold_or_release), r.result.get(measure))
                else {
                    continue;
                };
                if pos < 3 {
                    values[pos].push(v);
                }
            }
            if values.iter().any(Vec::is_empty) {
                continue;
            }
            let groups: Vec<RankGroup> = LABELS
                .iter()
                .zip(values)
                .map(|(name, values)| RankGroup { name: (*name).into(), values })
                .collect();
            let ranked = stats::scott_knott(
                &groups,
                &SkConfig {
                    seed: cfg.seed,
                    smaller_is_better: measure.smaller_is_better(),
                    ..SkConfig::default()
                },
            )?;
            ranks.push((mode, measure, ranked));
        }
    }
    Ok(Rq4Output { rows: out.rows, skips: out.skips, ranks })
}

// ---------------------------------------------------------------------------
// RQ5: metric stasis across consecutive check points

#[derive(Debug, Clone, PartialEq)]
pub struct StasisRow {
    pub view: String,
    pub project: String,
    pub name: String,
    pub from: String,
    pub to: String,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StasisSummary {
    pub view: String,
    pub pairs: usize,
    /// Names seen only once, hence excluded.
    pub skipped: usize,
    /// Pairs whose correlation was undefined (too few shared finite
    /// dimensions or zero rank variance).
    pub undefined: usize,
    pub median_rho: Option<f64>,
}

#[derive(Debug)]
pub struct Rq5Output {
    pub rows: Vec<StasisRow>,
    pub summaries: Vec<StasisSummary>,
    pub skips: Vec<Skip>,
}

fn stasis_of(view: &str, project: &str, ds: &Dataset) -> (Vec<StasisRow>, usize, usize) {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, m) in ds.meta.iter().enumerate() {
        if !groups.contains_key(m.name.as_str()) {
            order.push(&m.name);
        }
        groups.entry(&m.name).or_default().push(i);
    }
    let label = |i: usize| match ds.level {
        Level::Release => ds.meta[i].release.to_string(),
        Level::Jit => ds.meta[i].commit.clone(),
    };
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    let mut undefined = 0usize;
    for name in order {
        let idxs = &groups[name];
        if idxs.len() < 2 {
            skipped += 1;
            continue;
        }
        for w in idxs.windows(2) {
            let (i, j) = (w[0], w[1]);
            let mut a = Vec::new();
            let mut b = Vec::new();
            for d in 0..ds.n_features() {
                let (u, v) = (ds.x[i][d], ds.x[j][d]);
                if u.is_finite() && v.is_finite() {
                    a.push(u);
                    b.push(v);
                }
            }
            match stats::spearman(&a, &b) {
                Some(rho) => rows.push(StasisRow {
                    view: view.into(),
                    project: project.into(),
                    name: name.into(),
                    from: label(i),
                    to: label(j),
                    rho,
                }),
                None => undefined += 1,
            }
        }
    }
    (rows, skipped, undefined)
}

/// The five stasis views of a corpus: process/product at release level,
/// process/product at commit level, and package-level process at commit
/// level.
pub fn rq5_stasis(cfg: &ExperimentConfig) -> Result<Rq5Output> {
    cfg.validate()?;
    let projects = load_projects(cfg)?;
    const VIEWS: [&str; 5] = ["P_R", "C_R", "P_J", "C_J", "P_P_J"];
    let mut rows = Vec::new();
    let mut skips = Vec::new();
    let mut tallies: BTreeMap<&str, (usize, usize, usize, Vec<f64>)> = BTreeMap::new();
    for (pname, ds) in &projects {
        let release = dataset::aggregate_releases(ds);
        let package = dataset::aggregate_packages(ds);
        let derived: [(&str, Result<Dataset>); 5] = [
            ("P_R", filter_mode(&release, Mode::Process)),
            ("C_R", filter_mode(&release, Mode::Product)),
            ("P_J", filter_mode(ds, Mode::Process)),
            ("C_J", filter_mode(ds, Mode::Product)),
            ("P_P_J", filter_mode(&package, Mode::Process)),
        ];
        for (view, derived) in derived {
            let view_ds = match derived {
                Ok(d) => d,
                Err(e) => {
                    skips.push(Skip {
                        scope: format!("{pname}/{view}"),
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            let (mut view_rows, skipped, undefined) = stasis_of(view, pname, &view_ds);
            let t = tallies.entry(view).or_insert((0, 0, 0, Vec::new()));
            t.0 += view_rows.len();
            t.1 += skipped;
            t.2 += undefined;
            t.3.extend(view_rows.iter().map(|r| r.rho));
            rows.append(&mut view_rows);
        }
    }
    let summaries = VIEWS
        .iter()
        .filter_map(|view| {
            tallies.get(view).map(|(pairs, skipped, undefined, rhos)| StasisSummary {
                view: (*view).into(),
                pairs: *pairs,
                skipped: *skipped,
                undefined: *undefined,
                median_rho: if rhos.is_empty() {
                    None
                } else {
                    Some(stats::median(rhos))
                },
            })
        })
        .collect();
    Ok(Rq5Output { rows, summaries, skips })
}

// ---------------------------------------------------------------------------
// RQ6: stagnation

#[derive(Debug, Clone, PartialEq)]
pub struct StagnationRow {
    pub project: String,
    pub mode: Mode,
    pub reading: Rq6Reading,
    /// Files appearing in both periods.
    pub files: usize,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub flag: String,
}

/// Train period vs test period: the last three releases when there are at
/// least four, otherwise the second half of the rows.
fn period_split(ds: &Dataset) -> Option<(Vec<usize>, Vec<usize>)> {
    let max_rel = ds.meta.iter().map(|m| m.release).max()?;
    if max_rel >= 4 {
        let train: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.meta[i].release <= max_rel - 3)
            .collect();
        let test: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.meta[i].release > max_rel - 3)
            .collect();
        if !train.is_empty() && !test.is_empty() {
            return Some((train, test));
        }
    }
    if ds.len() >= 4 {
        let mid = ds.len() / 2;
        return Some(((0..mid).collect(), (mid..ds.len()).collect()));
    }
    None
}

fn mean_by_file(names: &[&str], values: &[f64]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (n, v) in names.iter().zip(values) {
        let e = sums.entry((*n).to_string()).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

/// For files present in both periods, correlates the training-period
/// signal (model score, or defect density under the density reading) with
/// the model's test-period score.
pub fn rq6_stagnation(cfg: &ExperimentConfig) -> Result<Vec<StagnationRow>> {
    cfg.validate()?;
    let learner = cfg.learners[0];
    let projects = load_projects(cfg)?;
    let mut out = Vec::new();
    for (pname, ds) in &projects {
        let split = period_split(ds);
        for &mode in &cfg.modes {
            let mut row = StagnationRow {
                project: pname.clone(),
                mode,
                reading: cfg.rq6_reading,
                files: 0,
                rho: None,
                p: None,
                flag: String::new(),
            };
            let Some((train_idx, test_idx)) = &split else {
                row.flag = "too few rows to form two periods".into();
                out.push(row);
                continue;
            };
            match stagnation_cell(
                cfg,
                pname,
                ds,
                mode,
                learner,
                train_idx,
                test_idx,
            ) {
                Ok((files, rho, p, flag)) => {
                    row.files = files;
                    row.rho = rho;
                    row.p = p;
                    row.flag = flag;
                }
                Err(e) => row.flag = e.to_string(),
            }
            out.push(row);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn stagnation_cell(
    cfg: &ExperimentConfig,
    pname: &str,
    ds: &Dataset,
    mode: Mode,
    learner: LearnerKind,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<(usize, Option<f64>, Option<f64>, String)> {
    let sub = filter_mode(ds, mode)?;
    let train = sub.subset(train_idx);
    let test = sub.subset(test_idx);
    let (ptrain, ptest, _) = dataset::preprocess(&train, &test)?;
    let strain = dataset::smote(
        &ptrain,
        &ResampleConfig {
            k: 5,
            seed: cell_seed(cfg.seed, &["smote", pname, mode.as_str(), "rq6"]),
        },
    )?;
    let spec = ModelSpec::new(
        learner,
        cell_seed(cfg.seed, &["fit", pname, mode.as_str(), learner.as_str(), "rq6"]),
    );
    let model = learners::fit(&spec, &strain)?;

    let train_names: Vec<&str> = ptrain.meta.iter().map(|m| m.name.as_str()).collect();
    let test_names: Vec<&str> = ptest.meta.iter().map(|m| m.name.as_str()).collect();
    let train_signal = match cfg.rq6_reading {
        Rq6Reading::Score => model.score_all(&ptrain)?,
        Rq6Reading::Density => ptrain.y.iter().map(|&b| f64::from(u8::from(b))).collect(),
    };
    let test_scores = model.score_all(&ptest)?;
    let train_by_file = mean_by_file(&train_names, &train_signal);
    let test_by_file = mean_by_file(&test_names, &test_scores);

    let shared: Vec<&String> = train_by_file
        .keys()
        .filter(|k| test_by_file.contains_key(*k))
        .collect();
    if shared.len() < 2 {
        return Ok((
            shared.len(),
            None,
            None,
            format!("fewer than 2 files shared across periods ({})", shared.len()),
        ));
    }
    let a: Vec<f64> = shared.iter().map(|k| train_by_file[*k]).collect();
    let b: Vec<f64> = shared.iter().map(|k| test_by_file[*k]).collect();
    match stats::spearman(&a, &b) {
        Some(rho) => Ok((
            shared.len(),
            Some(rho),
            stats::spearman_p(rho, shared.len()),
            String::new(),
        )),
        None => Ok((
            shared.len(),
            None,
            None,
            "undefined: zero rank variance (constant scores)".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// RQ7: recurrence partitions

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceRow {
    pub project: String,
    pub mode: Mode,
    /// recurrent | train_only | test_only.
    pub partition: String,
    pub files: usize,
    pub rows: usize,
    /// recall for recurrent/test_only, pf for train_only.
    pub measure: String,
    pub value: Option<f64>,
    pub flag: String,
}

pub fn rq7_recurrence(cfg: &ExperimentConfig) -> Result<Vec<RecurrenceRow>> {
    cfg.validate()?;
    let learner = cfg.learners[0];
    let projects = load_projects(cfg)?;
    let mut out = Vec::new();
    for (pname, ds) in &projects {
        let Some((train_idx, test_idx)) = period_split(ds) else {
            for &mode in &cfg.modes {
                for part in ["recurrent", "train_only", "test_only"] {
                    out.push(RecurrenceRow {
                        project: pname.clone(),
                        mode,
                        partition: part.into(),
                        files: 0,
                        rows: 0,
                        measure: if part == "train_only" { "pf" } else { "recall" }.into(),
                        value: None,
                        flag: "too few rows to form two periods".into(),
                    });
                }
            }
            continue;
        };
        for &mode in &cfg.modes {
            match recurrence_cell(cfg, pname, ds, mode, learner, &train_idx, &test_idx) {
                Ok(mut rows) => out.append(&mut rows),
                Err(e) => {
                    for part in ["recurrent", "train_only", "test_only"] {
                        out.push(RecurrenceRow {
                            project: pname.clone(),
                            mode,
                            partition: part.into(),
                            files: 0,
                            rows: 0,
                            measure: if part == "train_only" { "pf" } else { "recall" }.into(),
                            value: None,
                            flag: e.to_string(),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn recurrence_cell(
    cfg: &ExperimentConfig,
    pname: &str,
    ds: &Dataset,
    mode: Mode,
    learner: LearnerKind,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<Vec<RecurrenceRow>> {
    let sub = filter_mode(ds, mode)?;
    let train = sub.subset(train_idx);
    let test = sub.subset(test_idx);
    let (ptrain, ptest, _) = dataset::preprocess(&train, &test)?;
    let strain = dataset::smote(
        &ptrain,
        &ResampleConfig {
            k: 5,
            seed: cell_seed(cfg.seed, &["smote", pname, mode.as_str(), "rq7"]),
        },
    )?;
    let spec = ModelSpec::new(
        learner,
        cell_seed(cfg.seed, &["fit", pname, mode.as_str(), learner.as_str(), "rq7"]),
    );
    let model = learners::fit(&spec, &strain)?;
    let pred = ptest
        .x
        .iter()
        .map(|row| model.predict(row))
        .collect::<Result<Vec<bool>>>()?;

    let defective_names = |d: &Dataset| -> BTreeSet<String> {
        d.meta
            .iter()
            .zip(&d.y)
            .filter(|(_, &y)| y)
            .map(|(m, _)| m.name.clone())
            .collect()
    };
    let def_train = defective_names(&ptrain);
    let def_test = defective_names(&ptest);
    let test_files: BTreeSet<String> = ptest.meta.iter().map(|m| m.name.clone()).collect();

    let recurrent: BTreeSet<&String> = test_files
        .iter()
        .filter(|f| def_train.contains(*f) && def_test.contains(*f))
        .collect();
    let train_only: BTreeSet<&String> = test_files
        .iter()
        .filter(|f| def_train.contains(*f) && !def_test.contains(*f))
        .collect();
    let test_only: BTreeSet<&String> = test_files
        .iter()
        .filter(|f| def_test.contains(*f) && !def_train.contains(*f))
        .collect();

    let mut out = Vec::new();
    for (part, files, measure) in [
        ("recurrent", &recurrent, "recall"),
        ("train_only", &train_only, "pf"),
        ("test_only", &test_only, "recall"),
    ] {
        let rows: Vec<usize> = (0..ptest.len())
            .filter(|&i| files.contains(&ptest.meta[i].name))
            .collect();
        let (value, flag) = if files.is_empty() {
            (None, "empty partition".to_string())
        } else {
            let p: Vec<bool> = rows.iter().map(|&i| pred[i]).collect();
            let y: Vec<bool> = rows.iter().map(|&i| ptest.y[i]).collect();
            let cm = evaluation::confusion(&p, &y)?;
            let v = if measure == "pf" { cm.pf() } else { cm.recall() };
            match v {
                Some(v) => (Some(v), String::new()),
                None => (None, "undefined: empty denominator".to_string()),
            }
        };
        out.push(RecurrenceRow {
            project: pname.to_string(),
            mode,
            partition: part.into(),
            files: files.len(),
            rows: rows.len(),
            measure: measure.into(),
            value,
            flag,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// RQ8: analytics in-the-large vs in-the-small

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub metrics: Vec<String>,
    /// Rank per metric from the pooled-corpus forest (1 = most important).
    pub large_rank: Vec<f64>,
    /// Median rank per metric across the small samples' linear models.
    pub small_rank: Vec<f64>,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub samples_used: usize,
    pub notes: Vec<String>,
}

/// Rank 1 for the largest value; ties share average ranks.
fn rank_descending(values: &[f64]) -> Vec<f64> {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    stats::average_ranks(&negated)
}

struct PoolScaler {
    keep: Vec<usize>,
    names: Vec<String>,
    median: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl PoolScaler {
    fn fit(pool: &Dataset) -> Result<PoolScaler> {
        let mut keep = Vec::new();
        let mut names = Vec::new();
        let mut median = Vec::new();
        let mut min = Vec::new();
        let mut max = Vec::new();
        for c in 0..pool.n_features() {
            let vals: Vec<f64> = pool.x.iter().map(|r| r[c]).filter(|v| v.is_finite()).collect();
            if vals.is_empty() {
                continue;
            }
            keep.push(c);
            names.push(pool.feature_names[c].clone());
            median.push(stats::median(&vals));
            min.push(vals.iter().copied().fold(f64::INFINITY, f64::min));
            max.push(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        if keep.is_empty() {
            return Err(Error::Data("every column is empty in the pooled corpus".into()));
        }
        Ok(PoolScaler { keep, names, median, min, max })
    }

    /// Imputes with the pool median and scales with the pool min-max so
    /// every fit sees the same columns; constant columns map to 0.
    fn apply(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        out.feature_names = self.names.clone();
        out.x = ds
            .x
            .iter()
            .map(|row| {
                self.keep
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| {
                        let v = if row[c].is_finite() { row[c] } else { self.median[j] };
                        if self.max[j] > self.min[j] {
                            (v - self.min[j]) / (self.max[j] - self.min[j])
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        out
    }
}

/// In-the-large: one forest over the pooled corpus, ranked by impurity
/// importance. In-the-small: S samples of s projects, a linear model per
/// sample ranked by |coefficient|, median rank per metric. Reports both
/// rankings and their Spearman correlation.
pub fn rq8_importance(cfg: &ExperimentConfig) -> Result<ImportanceReport> {
    cfg.validate()?;
    let projects = load_projects(cfg)?;
    if projects.len() < cfg.small_size {
        return Err(Error::Config(format!(
            "corpus has {} projects but small samples want {}",
            projects.len(),
            cfg.small_size
        )));
    }
    let all: Vec<Dataset> = projects.iter().map(|(_, d)| d.clone()).collect();
    let pool = dataset::concat(&all)?;
    let scaler = PoolScaler::fit(&pool)?;

    let large_model = learners::fit(
        &ModelSpec::new(LearnerKind::Rf, cell_seed(cfg.seed, &["rq8", "large"])),
        &scaler.apply(&pool),
    )?;
    let large_rank = rank_descending(&large_model.feature_importance()?);

    let mut notes = Vec::new();
    let mut sample_ranks: Vec<Vec<f64>> = Vec::new();
    for s in 0..cfg.small_samples {
        let mut rng = crate::rng::stream(cfg.seed, 10_000 + s as u64);
        let mut order: Vec<usize> = (0..all.len()).collect();
        order.shuffle(&mut rng);
        let mut chosen: Vec<usize> = order[..cfg.small_size].to_vec();
        chosen.sort_unstable();
        let sample: Vec<Dataset> = chosen.iter().map(|&i| all[i].clone()).collect();
        let sample_pool = scaler.apply(&dataset::concat(&sample)?);
        let spec = ModelSpec::new(
            LearnerKind::Lr,
            cell_seed(cfg.seed, &["rq8", "small", &s.to_string()]),
        );
        match learners::fit(&spec, &sample_pool).and_then(|m| m.feature_importance()) {
            Ok(betas) => sample_ranks.push(rank_descending(&betas)),
            Err(e) => notes.push(format!("sample {s}: {e}")),
        }
    }
    if sample_ranks.is_empty() {
        return Err(Error::Fit("no small sample produced a model".into()));
    }
    let small_rank: Vec<f64> = (0..scaler.names.len())
        .map(|j| {
            let per_metric: Vec<f64> = sample_ranks.iter().map(|r| r[j]).collect();
            stats::median(&per_metric)
        })
        .collect();
    let rho = stats::spearman(&large_rank, &small_rank);
    let p = rho.and_then(|r| stats::spearman_p(r, scaler.names.len()));
    Ok(ImportanceReport {
        metrics: scaler.names,
        large_rank,
        small_rank,
        rho,
        p,
        samples_used: sample_ranks.len(),
        notes,
    })
}

// ---------------------------------------------------------------------------
// CSV writers

pub fn write_skips_csv<W: Write>(skips: &[Skip], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["scope", "reason"])?;
    for s in skips {
        wtr.write_record([s.scope.as_str(), s.reason.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn write_measure_ranks_csv<W: Write>(
    ranks: &[(Measure, Vec<RankedGroup>)],
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["measure", "group", "rank", "median", "a12_vs_next", "p"])?;
    for (measure, groups) in ranks {
        for g in groups {
            wtr.write_record([
                measure.as_str(),
                g.name.as_str(),
                &g.rank.to_string(),
                &format!("{}", g.median),
                &opt(g.a12_vs_next),
                &opt(g.p_vs_next),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_mode_measure_ranks_csv<W: Write>(
    ranks: &[(Mode, Measure, Vec<RankedGroup>)],
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["mode", "measure", "group", "rank", "median", "a12_vs_next", "p"])?;
    for (mode, measure, groups) in ranks {
        for g in groups {
            wtr.write_record([
                mode.as_str(),
                measure.as_str(),
                g.name.as_str(),
                &g.rank.to_string(),
                &format!("{}", g.median),
                &opt(g.a12_vs_next),
                &opt(g.p_vs_next),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_stasis_pairs_csv<W: Write>(rows: &[StasisRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["view", "project", "name", "from", "to", "rho"])?;
    for r in rows {
        wtr.write_record([
            r.view.as_str(),
            r.project.as_str(),
            r.name.as_str(),
            r.from.as_str(),
            r.to.as_str(),
            &format!("{}", r.rho),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_stasis_summary_csv<W: Write>(rows: &[StasisSummary], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["view", "pairs", "skipped_files", "undefined", "median_rho"])?;
    for r in rows {
        wtr.write_record([
            r.view.as_str(),
            &r.pairs.to_string(),
            &r.skipped.to_string(),
            &r.undefined.to_string(),
            &opt(r.median_rho),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_stagnation_csv<W: Write>(rows: &[StagnationRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["project", "mode", "reading", "files", "rho", "p", "flag"])?;
    for r in rows {
        wtr.write_record([
            r.project.as_str(),
            r.mode.as_str(),
            r.reading.as_str(),
            &r.files.to_string(),
            &opt(r.rho),
            &opt(r.p),
            r.flag.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_recurrence_csv<W: Write>(rows: &[RecurrenceRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["project", "mode", "partition", "files", "rows", "measure", "value", "flag"])?;
    for r in rows {
        wtr.write_record([
            r.project.as_str(),
            r.mode.as_str(),
            r.partition.as_str(),
            &r.files.to_string(),
            &r.rows.to_string(),
            r.measure.as_str(),
            &opt(r.value),
            r.flag.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_importance_csv<W: Write>(report: &ImportanceReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["metric", "large_rank", "small_rank"])?;
    for (i, m) in report.metrics.iter().enumerate() {
        wtr.write_record([
            m.as_str(),
            &format!("{}", report.large_rank[i]),
            &format!("{}", report.small_rank[i]),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_importance_summary_csv<W: Write>(
    report: &ImportanceReport,
    samples: usize,
    sample_size: usize,
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["rho", "p", "metrics", "samples_used", "samples", "sample_size"])?;
    wtr.write_record([
        &opt(report.rho),
        &opt(report.p),
        &report.metrics.len().to_string(),
        &report.samples_used.to_string(),
        &samples.to_string(),
        &sample_size.to_string(),
    ])?;
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage runner with manifest-backed resumability

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub ran: Vec<String>,
    pub reused: Vec<String>,
    pub manifest_path: PathBuf,
}

fn create(out_dir: &Path, name: &str) -> Result<File> {
    Ok(File::create(out_dir.join(name))?)
}

/// Executes the requested research questions, writing their CSVs and a
/// run manifest into `out_dir`. Stages whose recorded outputs are intact
/// are reused, not recomputed; re-running an identical config is a no-op
/// that leaves every byte unchanged.
pub fn run_experiment(config_path: &Path, rqs: &[u8], out_dir: &Path) -> Result<RunSummary> {
    let raw = std::fs::read(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let config_hash = manifest::sha256_hex(&raw);
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    let cfg = ExperimentConfig::parse(&String::from_utf8_lossy(&raw), base)?;
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let mut wanted: Vec<u8> = rqs.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    if wanted.is_empty() {
        return Err(Error::Config("no research questions requested".into()));
    }
    if let Some(bad) = wanted.iter().find(|&&n| !(1..=8).contains(&n)) {
        return Err(Error::Config(format!("rq{bad} does not exist; use 1..8")));
    }

    let manifest_path = out_dir.join("manifest.json");
    let mut man = match RunManifest::load(&manifest_path) {
        Ok(m) if m.config_hash == config_hash && m.seed == cfg.seed => m,
        _ => RunManifest::new(&config_hash, cfg.seed),
    };
    let inputs: Vec<(String, String)> = cfg
        .projects
        .iter()
        .map(|p| Ok((p.display().to_string(), manifest::file_digest(p)?)))
        .collect::<Result<_>>()?;

    let mut summary = RunSummary {
        ran: Vec::new(),
        reused: Vec::new(),
        manifest_path: manifest_path.clone(),
    };
    // RQ1 and RQ2 share one expensive substrate; compute it at most once.
    let mut substrate: Option<RunOutput> = None;
    for rq in wanted {
        let stage = format!("rq{rq}");
        if man.stage_current(&stage, out_dir) {
            summary.reused.push(stage);
            continue;
        }
        let (outputs, stage_skips) = run_stage(&cfg, rq, out_dir, &mut substrate)?;
        man.skips.retain(|s| !s.starts_with(&format!("{stage}:")));
        man.skips
            .extend(stage_skips.iter().map(|s| format!("{stage}: {s}")));
        man.record_stage(&stage, out_dir, &inputs, &outputs)?;
        summary.ran.push(stage);
    }
    man.save(&manifest_path)?;
    Ok(summary)
}

fn skip_strings(skips: &[Skip]) -> Vec<String> {
    skips.iter().map(|s| format!("{}: {}", s.scope, s.reason)).collect()
}

fn run_stage(
    cfg: &ExperimentConfig,
    rq: u8,
    out_dir: &Path,
    substrate: &mut Option<RunOutput>,
) -> Result<(Vec<String>, Vec<String>)> {
    let mut get_substrate = |cfg: &ExperimentConfig| -> Result<()> {
        if substrate.is_none() {
            *substrate = Some(rq_performance(cfg)?);
        }
        Ok(())
    };
    match rq {
        1 => {
            get_substrate(cfg)?;
            let out = substrate.as_ref().expect("just filled");
            evaluation::write_results_csv(&out.rows, create(out_dir, "rq1_results.csv")?)?;
            write_skips_csv(&out.skips, create(out_dir, "rq1_skips.csv")?)?;
            Ok((
                vec!["rq1_results.csv".into(), "rq1_skips.csv".into()],
                skip_strings(&out.skips),
            ))
        }
        2 => {
            get_substrate(cfg)?;
            let out = substrate.as_ref().expect("just filled");
            let report = variance_report(&out.rows, &cfg.measures);
            write_variance_csv(&report, create(out_dir, "rq2_variance.csv")?)?;
            Ok((vec!["rq2_variance.csv".into()], skip_strings(&out.skips)))
        }
        3 => {
            let out = rq3_granularity(cfg)?;
            evaluation::write_results_csv(&out.file.rows, create(out_dir, "rq3_results_file.csv")?)?;
            evaluation::write_results_csv(
                &out.package.rows,
                create(out_dir, "rq3_results_package.csv")?,
            )?;
            write_measure_ranks_csv(&out.ranks, create(out_dir, "rq3_ranks.csv")?)?;
            let mut skips = out.skips.clone();
            skips.extend(out.file.skips.iter().cloned());
            skips.extend(out.package.skips.iter().cloned());
            write_skips_csv(&skips, create(out_dir, "rq3_skips.csv")?)?;
            Ok((
                vec![
                    "rq3_results_file.csv".into(),
                    "rq3_results_package.csv".into(),
                    "rq3_ranks.csv".into(),
                    "rq3_skips.csv".into(),
                ],
                skip_strings(&skips),
            ))
        }
        4 => {
            let out = rq4_stability(cfg)?;
            evaluation::write_results_csv(&out.rows, create(out_dir, "rq4_results.csv")?)?;
            write_mode_measure_ranks_csv(&out.ranks, create(out_dir, "rq4_ranks.csv")?)?;
            write_skips_csv(&out.skips, create(out_dir, "rq4_skips.csv")?)?;
            Ok((
                vec![
                    "rq4_results.csv".into(),
                    "rq4_ranks.csv".into(),
                    "rq4_skips.csv".into(),
                ],
                skip_strings(&out.skips),
            ))
        }
        5 => {
            let out = rq5_stasis(cfg)?;
            write_stasis_pairs_csv(&out.rows, create(out_dir, "rq5_pairs.csv")?)?;
            write_stasis_summary_csv(&out.summaries, create(out_dir, "rq5_summary.csv")?)?;
            write_skips_csv(&out.skips, create(out_dir, "rq5_skips.csv")?)?;
            Ok((
                vec![
                    "rq5_pairs.csv".into(),
                    "rq5_summary.csv".into(),
                    "rq5_skips.csv".into(),
                ],
                skip_strings(&out.skips),
            ))
        }
        6 => {
            let rows = rq6_stagnation(cfg)?;
            write_stagnation_csv(&rows, create(out_dir, "rq6_stagnation.csv")?)?;
            Ok((vec!["rq6_stagnation.csv".into()], Vec::new()))
        }
        7 => {
            let rows = rq7_recurrence(cfg)?;
            write_recurrence_csv(&rows, create(out_dir, "rq7_recurrence.csv")?)?;
            Ok((vec!["rq7_recurrence.csv".into()], Vec::new()))
        }
        8 => {
            let report = rq8_importance(cfg)?;
            write_importance_csv(&report, create(out_dir, "rq8_importance.csv")?)?;
            write_importance_summary_csv(
                &report,
                cfg.small_samples,
                cfg.small_size,
                create(out_dir, "rq8_summary.csv")?,
            )?;
            Ok((
                vec!["rq8_importance.csv".into(), "rq8_summary.csv".into()],
                report.notes,
            ))
        }
        _ => unreachable!("validated above"),
    }
}

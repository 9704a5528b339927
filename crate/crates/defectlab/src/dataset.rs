//! Dataset assembly and split machinery.
//!
//! Metric rows and labels become dense matrices here, then flow through
//! aggregation (release level, package granularity), train-only
//! preprocessing, minority oversampling, and split planning. Missing cells
//! are carried as NaN until [`preprocess`] resolves them; afterwards a
//! dataset is guaranteed NaN-free.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::process_metrics::{ProcessRow, PROCESS_METRICS};
use crate::product_metrics::{ProductRow, PRODUCT_METRICS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Process,
    Product,
    Combined,
}

impl Mode {
    #[must_use]
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Process => "P",
            Mode::Product => "C",
            Mode::Combined => "P+C",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "P" => Ok(Mode::Process),
            "C" => Ok(Mode::Product),
            "P+C" => Ok(Mode::Combined),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; expected P, C, or P+C"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    File,
    Package,
}

impl Granularity {
    #[must_use]
    pub fn as_str(&self) -> &'static str {
        match self {
            Granularity::File => "file",
            Granularity::Package => "package",
        }
    }

    pub fn parse(s: &str) -> Result<Granularity> {
        match s {
            "file" => Ok(Granularity::File),
            "package" => Ok(Granularity::Package),
            other => Err(Error::Config(format!(
                "unknown granularity {other:?}; expected file or package"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Jit,
    Release,
}

impl Level {
    #[must_use]
    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Jit => "jit",
            Level::Release => "release",
        }
    }

    pub fn parse(s: &str) -> Result<Level> {
        match s {
            "jit" => Ok(Level::Jit),
            "release" => Ok(Level::Release),
            other => Err(Error::Config(format!(
                "unknown level {other:?}; expected jit or release"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowMeta {
    pub project: String,
    /// Canonical file id, or package path at package granularity.
    pub name: String,
    pub release: u32,
    /// Empty once rows are aggregated beyond a single commit.
    pub commit: String,
}

/// A dense instance matrix plus everything needed to evaluate on it.
///
/// NaN marks a missing cell; [`preprocess`] is the only stage allowed to
/// hand a dataset with NaN to a learner-facing consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
    /// Size proxy per instance used by effort-aware measures: lines of code
    /// before the change (process mode) or CountLineCode (otherwise).
    pub effort: Vec<f64>,
    pub meta: Vec<RowMeta>,
    pub mode: Mode,
    pub granularity: Granularity,
    pub level: Level,
}

impl Dataset {
    #[must_use]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[must_use]
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    #[must_use]
    pub fn defect_ratio(&self) -> f64 {
        if self.y.is_empty() {
            return 0.0;
        }
        self.y.iter().filter(|&&b| b).count() as f64 / self.y.len() as f64
    }

    #[must_use]
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// New dataset holding the given rows, in the given order.
    #[must_use]
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            effort: rows.iter().map(|&i| self.effort[i]).collect(),
            meta: rows.iter().map(|&i| self.meta[i].clone()).collect(),
            mode: self.mode,
            granularity: self.granularity,
            level: self.level,
        }
    }

    /// Checks the parallel-array invariant; cheap enough to call anywhere.
    #[must_use]
    pub fn consistent(&self) -> bool {
        let n = self.x.len();
        self.y.len() == n
            && self.effort.len() == n
            && self.meta.len() == n
            && self.x.iter().all(|r| r.len() == self.feature_names.len())
    }
}

// ---------------------------------------------------------------------------
// Assembly

#[derive(Debug, Clone, Default)]
pub struct AssembleReport {
    /// Rows lost to the inner join (unmatched on either side).
    pub dropped_join: usize,
    pub notes: Vec<String>,
}

/// Joins metric rows into a dataset for one project.
///
/// Combined and product modes inner-join process and product rows on
/// (file, commit); process mode ignores the product side. Labels and
/// release indices always come from the process rows.
pub fn assemble(
    project: &str,
    process: &[ProcessRow],
    product: Option<&[ProductRow]>,
    mode: Mode,
    granularity: Granularity,
    level: Level,
) -> Result<(Dataset, AssembleReport)> {
    let mut report = AssembleReport::default();
    let feature_names: Vec<String> = match mode {
        Mode::Process => PROCESS_METRICS.iter().map(|s| s.to_string()).collect(),
        Mode::Product => PRODUCT_METRICS.iter().map(|s| s.to_string()).collect(),
        Mode::Combined => PROCESS_METRICS
            .iter()
            .chain(PRODUCT_METRICS.iter())
            .map(|s| s.to_string())
            .collect(),
    };

    let product_map: HashMap<(&str, &str), &ProductRow> = match (mode, product) {
        (Mode::Process, _) => HashMap::new(),
        (_, Some(rows)) => rows
            .iter()
            .map(|r| ((r.file.as_str(), r.commit.as_str()), r))
            .collect(),
        (_, None) => {
            return Err(Error::Data(
                "product metrics required for this mode but not supplied".into(),
            ))
        }
    };
    let mut matched_product = 0usize;

    let mut ds = Dataset {
        feature_names,
        x: Vec::new(),
        y: Vec::new(),
        effort: Vec::new(),
        meta: Vec::new(),
        mode,
        granularity: Granularity::File,
        level: Level::Jit,
    };

    for row in process {
        let prod = if mode == Mode::Process {
            None
        } else {
            match product_map.get(&(row.file.as_str(), row.commit.as_str())) {
                Some(p) => {
                    matched_product += 1;
                    Some(*p)
                }
                None => {
                    report.dropped_join += 1;
                    continue;
                }
            }
        };
        let mut feats: Vec<f64> = Vec::with_capacity(ds.feature_names.len());
        if mode != Mode::Product {
            feats.extend_from_slice(&row.feature_values());
        }
        if let Some(p) = prod {
            feats.extend(p.values.iter().map(|v| v.unwrap_or(f64::NAN)));
        }
        ds.x.push(feats);
        ds.y.push(row.defective);
        ds.effort.push(0.0); // filled below once aggregation settles
        ds.meta.push(RowMeta {
            project: project.to_string(),
            name: row.file.clone(),
            release: row.release,
            commit: row.commit.clone(),
        });
    }
    if mode != Mode::Process {
        let unmatched_product = product_map.len().saturating_sub(matched_product);
        report.dropped_join += unmatched_product;
    }

    if ds.x.is_empty() {
        return Err(Error::Data("no overlapping keys".into()));
    }

    if level == Level::Release {
        ds = aggregate_releases(&ds);
    }
    if granularity == Granularity::Package {
        ds = aggregate_packages(&ds);
    }

    let effort_col = match mode {
        Mode::Process => "lt",
        _ => "CountLineCode",
    };
    let j = ds
        .feature_index(effort_col)
        .expect("effort column present by construction");
    for i in 0..ds.len() {
        ds.effort[i] = ds.x[i][j];
    }

    debug_assert!(ds.consistent());
    Ok((ds, report))
}

fn median_of(mut vals: Vec<f64>) -> f64 {
    if vals.is_empty() {
        return f64::NAN;
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("no NaN here"));
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        (vals[n / 2 - 1] + vals[n / 2]) / 2.0
    }
}

/// Groups rows and reduces each feature to the member median; a group is
/// labelled defective when any member is. Group order follows first
/// appearance, keeping output deterministic.
fn aggregate_by<K: std::hash::Hash + Eq + Clone>(
    ds: &Dataset,
    key_of: impl Fn(&RowMeta) -> K,
    meta_of: impl Fn(&RowMeta) -> RowMeta,
) -> Dataset {
    let mut order: Vec<K> = Vec::new();
    let mut groups: HashMap<K, Vec<usize>> = HashMap::new();
    for (i, m) in ds.meta.iter().enumerate() {
        let k = key_of(m);
        groups
            .entry(k.clone())
            .or_insert_with(|| {
                order.push(k);
                Vec::new()
            })
            .push(i);
    }
    let mut out = Dataset {
        feature_names: ds.feature_names.clone(),
        x: Vec::with_capacity(order.len()),
        y: Vec::with_capacity(order.len()),
        effort: Vec::with_capacity(order.len()),
        meta: Vec::with_capacity(order.len()),
        mode: ds.mode,
        granularity: ds.granularity,
        level: ds.level,
    };
    for k in order {
        let members = &groups[&k];
        let mut feats = Vec::with_capacity(ds.feature_names.len());
        for j in 0..ds.feature_names.len() {
            let present: Vec<f64> = members
                .iter()
                .map(|&i| ds.x[i][j])
                .filter(|v| !v.is_nan())
                .collect();
            feats.push(median_of(present));
        }
        let effort = median_of(
            members
                .iter()
                .map(|&i| ds.effort[i])
                .filter(|v| !v.is_nan())
                .collect(),
        );
        out.x.push(feats);
        out.y.push(members.iter().any(|&i| ds.y[i]));
        out.effort.push(effort);
        out.meta.push(meta_of(&ds.meta[members[0]]));
    }
    out
}

/// Collapses (file, commit) rows into one row per (file, release).
#[must_use]
pub fn aggregate_releases(ds: &Dataset) -> Dataset {
    let mut out = aggregate_by(
        ds,
        |m| (m.name.clone(), m.release),
        |m| RowMeta {
            project: m.project.clone(),
            name: m.name.clone(),
            release: m.release,
            commit: String::new(),
        },
    );
    out.level = Level::Release;
    out
}

fn package_of(path: &str) -> &str {
    match path.rfind('/') {
        Some(i) => &path[..i],
        None => "<root>",
    }
}

/// Collapses file rows into one row per (package, period). The period is
/// the commit at jit level and the release otherwise. Applying this to a
/// dataset already at package granularity is the identity.
#[must_use]
pub fn aggregate_packages(ds: &Dataset) -> Dataset {
    let already = ds.granularity == Granularity::Package;
    let level = ds.level;
    let mut out = aggregate_by(
        ds,
        |m| {
            let name = if already {
                m.name.clone()
            } else {
                package_of(&m.name).to_string()
            };
            let period = match level {
                Level::Jit => m.commit.clone(),
                Level::Release => m.release.to_string(),
            };
            (name, period)
        },
        |m| RowMeta {
            project: m.project.clone(),
            name: if already {
                m.name.clone()
            } else {
                package_of(&m.name).to_string()
            },
            release: m.release,
            commit: match level {
                Level::Jit => m.commit.clone(),
                Level::Release => String::new(),
            },
        },
    );
    out.granularity = Granularity::Package;
    out
}

/// Stacks datasets row-wise; they must agree on the feature list and shape.
pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Data("nothing to concatenate".into()))?;
    let mut out = first.clone();
    for ds in &parts[1..] {
        if ds.feature_names != first.feature_names
            || ds.mode != first.mode
            || ds.granularity != first.granularity
            || ds.level != first.level
        {
            return Err(Error::Data(format!(
                "cannot pool {:?} with {:?}: differing columns or shape",
                ds.meta.first().map(|m| m.project.as_str()).unwrap_or("?"),
                first.meta.first().map(|m| m.project.as_str()).unwrap_or("?"),
            )));
        }
        out.x.extend(ds.x.iter().cloned());
        out.y.extend(ds.y.iter().copied());
        out.effort.extend(ds.effort.iter().copied());
        out.meta.extend(ds.meta.iter().cloned());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Preprocessing

#[derive(Debug, Clone, Default)]
pub struct PreprocessReport {
    /// Feature names dropped for having a single (or no) train value.
    pub dropped: Vec<String>,
    /// (feature, imputed cell count) across train and test.
    pub imputed: Vec<(String, usize)>,
}

/// Fits min-max scaling and median imputation on the training rows only,
/// then applies both to train and test. Test values are clamped into
/// [0, 1]; features constant on the training side are dropped from both.
/// Inputs are left untouched.
pub fn preprocess(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, PreprocessReport)> {
    if train.is_empty() {
        return Err(Error::Data("empty training split".into()));
    }
    if train.feature_names != test.feature_names {
        return Err(Error::Data("train/test feature names differ".into()));
    }
    let mut report = PreprocessReport::default();
    let n_feat = train.n_features();
    let mut keep: Vec<usize> = Vec::new();
    let mut medians = vec![0.0; n_feat];
    let mut mins = vec![0.0; n_feat];
    let mut maxs = vec![0.0; n_feat];

    for j in 0..n_feat {
        let observed: Vec<f64> = train
            .x
            .iter()
            .map(|r| r[j])
            .filter(|v| !v.is_nan())
            .collect();
        if observed.is_empty() {
            report.dropped.push(train.feature_names[j].clone());
            continue;
        }
        let med = median_of(observed.clone());
        let min = observed.iter().copied().fold(f64::INFINITY, f64::min);
        let max = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == min {
            report.dropped.push(train.feature_names[j].clone());
            continue;
        }
        let missing = train.x.iter().filter(|r| r[j].is_nan()).count()
            + test.x.iter().filter(|r| r[j].is_nan()).count();
        if missing > 0 {
            report.imputed.push((train.feature_names[j].clone(), missing));
        }
        medians[j] = med;
        mins[j] = min;
        maxs[j] = max;
        keep.push(j);
    }
    if keep.is_empty() {
        return Err(Error::Data("all features constant or missing".into()));
    }

    let transform = |ds: &Dataset, clamp: bool| -> Dataset {
        let mut out = ds.clone();
        out.feature_names = keep
            .iter()
            .map(|&j| ds.feature_names[j].clone())
            .collect();
        out.x = ds
            .x
            .iter()
            .map(|row| {
                keep.iter()
                    .map(|&j| {
                        let raw = if row[j].is_nan() { medians[j] } else { row[j] };
                        let scaled = (raw - mins[j]) / (maxs[j] - mins[j]);
                        if clamp {
                            scaled.clamp(0.0, 1.0)
                        } else {
                            scaled
                        }
                    })
                    .collect()
            })
            .collect();
        out
    };

    let train_out = transform(train, false);
    let test_out = transform(test, true);
    Ok((train_out, test_out, report))
}

// ---------------------------------------------------------------------------
// Minority oversampling

#[derive(Debug, Clone)]
pub struct ResampleConfig {
    /// Neighbor pool size; effective k is min(k, minority - 1).
    pub k: usize,
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig { k: 5, seed: 0 }
    }
}

/// Oversamples the minority class to exact balance. Each synthetic row is
/// x + u * (neighbor - x) for a random minority row x, one of its k nearest
/// minority neighbors, and a single u ~ U(0,1). Training data only.
pub fn smote(train: &Dataset, cfg: &ResampleConfig) -> Result<Dataset> {
    let pos: Vec<usize> = (0..train.len()).filter(|&i| train.y[i]).collect();
    let neg: Vec<usize> = (0..train.len()).filter(|&i| !train.y[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Resample("single-class training data".into()));
    }
    let (minority, majority) = if pos.len() <= neg.len() {
        (&pos, &neg)
    } else {
        (&neg, &pos)
    };
    let need = majority.len() - minority.len();
    let mut out = train.clone();
    if need == 0 {
        return Ok(out);
    }
    if minority.len() < 2 {
        return Err(Error::Resample(
            "minority class needs at least two rows".into(),
        ));
    }
    for &i in minority {
        if train.x[i].iter().any(|v| v.is_nan()) {
            return Err(Error::Resample(
                "missing values present; preprocess before resampling".into(),
            ));
        }
    }
    let k = cfg.k.min(minority.len() - 1);
    let label = train.y[minority[0]];

    // Neighbor lists are deterministic: distance ties break on row index.
    let dist = |a: usize, b: usize| -> f64 {
        train.x[a]
            .iter()
            .zip(&train.x[b])
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
    };
    let neighbors: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (dist(i, j), j))
                .collect();
            others.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = crate::rng::stream(cfg.seed, 0);
    for _ in 0..need {
        let mi = rng.random_range(0..minority.len());
        let base = minority[mi];
        let nb = neighbors[mi][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let row: Vec<f64> = train.x[base]
            .iter()
            .zip(&train.x[nb])
            .map(|(a, b)| a + u * (b - a))
            .collect();
        let effort = train.effort[base] + u * (train.effort[nb] - train.effort[base]);
        out.x.push(row);
        out.y.push(label);
        out.effort.push(effort);
        out.meta.push(train.meta[base].clone());
    }
    debug_assert!(out.consistent());
    Ok(out)
}

// ---------------------------------------------------------------------------
// Split planning

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitKind {
    /// `repeats` independent shuffles, each partitioned into `folds`
    /// stratified bins; every bin serves once as the test side.
    CrossVal { repeats: usize, folds: usize },
    /// Train on releases 1..R-3, test each of R-2, R-1, R separately.
    ReleaseBased,
}

impl SplitKind {
    #[must_use]
    pub fn standard_cv() -> SplitKind {
        SplitKind::CrossVal {
            repeats: 5,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub splits: Vec<Split>,
}

pub fn make_splits(ds: &Dataset, kind: &SplitKind, seed: u64) -> Result<SplitPlan> {
    match kind {
        SplitKind::CrossVal { repeats, folds } => cross_val_splits(ds, *repeats, *folds, seed),
        SplitKind::ReleaseBased => release_splits(ds),
    }
}

fn cross_val_splits(ds: &Dataset, repeats: usize, folds: usize, seed: u64) -> Result<SplitPlan> {
    if repeats == 0 || folds < 2 {
        return Err(Error::Split("need at least 1 repeat and 2 folds".into()));
    }
    let pos: Vec<usize> = (0..ds.len()).filter(|&i| ds.y[i]).collect();
    let neg: Vec<usize> = (0..ds.len()).filter(|&i| !ds.y[i]).collect();
    if pos.len() < folds || neg.len() < folds {
        return Err(Error::Split(format!(
            "stratified folding needs at least {folds} rows of each class \
             (have {} defective, {} clean)",
            pos.len(),
            neg.len()
        )));
    }
    let mut splits = Vec::with_capacity(repeats * folds);
    for m in 0..repeats {
        let mut rng = crate::rng::stream(seed, m as u64);
        let mut bins: Vec<Vec<usize>> = vec![Vec::new(); folds];
        for class in [&pos, &neg] {
            let mut rows = class.clone();
            rows.shuffle(&mut rng);
            for (i, row) in rows.into_iter().enumerate() {
                bins[i % folds].push(row);
            }
        }
        for n in 0..folds {
            let mut test = bins[n].clone();
            let mut train: Vec<usize> = bins
                .iter()
                .enumerate()
                .filter(|(b, _)| *b != n)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            test.sort_unstable();
            train.sort_unstable();
            splits.push(Split {
                name: format!("fold-{m}-{n}"),
                train,
                test,
            });
        }
    }
    Ok(SplitPlan { splits })
}

fn release_splits(ds: &Dataset) -> Result<SplitPlan> {
    let r_max = ds.meta.iter().map(|m| m.release).max().unwrap_or(0);
    if r_max < 4 {
        return Err(Error::Split("insufficient releases".into()));
    }
    let train: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.meta[i].release >= 1 && ds.meta[i].release <= r_max - 3)
        .collect();
    let mut splits = Vec::with_capacity(3);
    for r in [r_max - 2, r_max - 1, r_max] {
        let test: Vec<usize> = (0..ds.len()).filter(|&i| ds.meta[i].release == r).collect();
        splits.push(Split {
            name: format!("release-{r}"),
            train: train.clone(),
            test,
        });
    }
    Ok(SplitPlan { splits })
}

// ---------------------------------------------------------------------------
// CSV round trip

/// Header: project,name,release,commit,defective,effort,&lt;features&gt;.
/// NaN cells serialize as empty fields.
pub fn write_dataset_csv<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![
        "project".to_string(),
        "name".to_string(),
        "release".to_string(),
        "commit".to_string(),
        "defective".to_string(),
        "effort".to_string(),
    ];
    header.extend(ds.feature_names.iter().cloned());
    wtr.write_record(&header)?;
    let cell = |v: f64| {
        if v.is_nan() {
            String::new()
        } else {
            format!("{v}")
        }
    };
    for i in 0..ds.len() {
        let m = &ds.meta[i];
        let mut rec = vec![
            m.project.clone(),
            m.name.clone(),
            m.release.to_string(),
            m.commit.clone(),
            ds.y[i].to_string(),
            cell(ds.effort[i]),
        ];
        rec.extend(ds.x[i].iter().map(|&v| cell(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(
    reader: R,
    source_name: &str,
    mode: Mode,
    granularity: Granularity,
    level: Level,
) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let fixed = ["project", "name", "release", "commit", "defective", "effort"];
    if header.len() < fixed.len() || !fixed.iter().enumerate().all(|(i, f)| &header[i] == *f) {
        return Err(Error::parse(
            source_name,
            1,
            "dataset header must start with project,name,release,commit,defective,effort",
        ));
    }
    let feature_names: Vec<String> = header.iter().skip(fixed.len()).map(String::from).collect();
    let mut ds = Dataset {
        feature_names,
        x: Vec::new(),
        y: Vec::new(),
        effort: Vec::new(),
        meta: Vec::new(),
        mode,
        granularity,
        level,
    };
    let parse_cell = |s: &str, line: usize| -> Result<f64> {
        if s.is_empty() {
            return Ok(f64::NAN);
        }
        s.parse::<f64>()
            .map_err(|e| Error::parse(source_name, line, format!("bad number {s:?}: {e}")))
    };
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::parse(source_name, line, "wrong field count"));
        }
        ds.meta.push(RowMeta {
            project: rec[0].to_string(),
            name: rec[1].to_string(),
            release: rec[2]
                .parse()
                .map_err(|e| Error::parse(source_name, line, format!("bad release: {e}")))?,
            commit: rec[3].to_string(),
        });
        ds.y.push(match &rec[4] {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("bad defective flag {other:?}"),
                ))
            }
        });
        ds.effort.push(parse_cell(&rec[5], line)?);
        ds.x.push(
            (6..rec.len())
                .map(|j| parse_cell(&rec[j], line))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn process_row(file: &str, commit: &str, release: u32, lt: u64, defective: bool) -> ProcessRow {
        ProcessRow {
            file: file.to_string(),
            commit: commit.to_string(),
            release,
            la: 1,
            ld: 0,
            lt,
            age: 0.0,
            adev: 1,
            ddev: 0,
            nuc: 0,
            own: 0.0,
            minor: 0,
            nddev: 0,
            ncomm: 0,
            nadev: 0,
            avg_nddev: 0.0,
            avg_nadev: 0.0,
            avg_ncomm: 0.0,
            ns: 1,
            nd: 1,
            exp: 0,
            rexp: 0.0,
            sexp: 0,
            sctr: 0.0,
            defective,
        }
    }

    fn product_row(file: &str, commit: &str, loc: f64) -> ProductRow {
        let mut r = ProductRow::new(file, commit);
        r.set("CountLineCode", loc).unwrap();
        r.set("AvgCyclomatic", 2.0).unwrap();
        r
    }

    fn tiny(x: Vec<Vec<f64>>, y: Vec<bool>) -> Dataset {
        let n = x.len();
        let f = x.first().map_or(0, Vec::len);
        Dataset {
            feature_names: (0..f).map(|j| format!("f{j}")).collect(),
            x,
            y,
            effort: vec![1.0; n],
            meta: (0..n)
                .map(|i| RowMeta {
                    project: "p".into(),
                    name: format!("pkg/file{i}.java"),
                    release: 1,
                    commit: format!("c{i}"),
                })
                .collect(),
            mode: Mode::Process,
            granularity: Granularity::File,
            level: Level::Jit,
        }
    }

    #[test]
    fn assemble_process_mode_ignores_product() {
        let rows = vec![
            process_row("a/f.java", "c1", 1, 10, false),
            process_row("a/g.java", "c1", 1, 20, true),
        ];
        let (ds, rep) = assemble("proj", &rows, None, Mode::Process, Granularity::File, Level::Jit)
            .unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_features(), 21);
        assert_eq!(rep.dropped_join, 0);
        assert_eq!(ds.effort, vec![10.0, 20.0], "effort is lt in process mode");
        assert_eq!(ds.y, vec![false, true]);
        assert!(ds.consistent());
    }

    #[test]
    fn assemble_combined_inner_join_reports_drops() {
        let rows = vec![
            process_row("a/f.java", "c1", 1, 10, false),
            process_row("a/f.java", "c2", 1, 11, true),
            process_row("a/g.java", "c1", 1, 20, false),
        ];
        let prod = vec![
            product_row("a/f.java", "c1", 30.0),
            product_row("a/g.java", "c1", 40.0),
            product_row("a/h.java", "c9", 50.0),
        ];
        let (ds, rep) = assemble(
            "proj",
            &rows,
            Some(&prod),
            Mode::Combined,
            Granularity::File,
            Level::Jit,
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        // one process row without product + one product row without process
        assert_eq!(rep.dropped_join, 2);
        assert_eq!(ds.n_features(), 21 + 45);
        assert_eq!(ds.effort, vec![30.0, 40.0], "effort is CountLineCode");
        let j = ds.feature_index("AvgCyclomatic").unwrap();
        assert_eq!(ds.x[0][j], 2.0);
        let k = ds.feature_index("MaxInheritanceTree").unwrap();
        assert!(ds.x[0][k].is_nan(), "unset product metric stays missing");
    }

    #[test]
    fn assemble_empty_join_is_an_error() {
        let rows = vec![process_row("a/f.java", "c1", 1, 10, false)];
        let prod = vec![product_row("a/f.java", "zz", 30.0)];
        let err = assemble(
            "proj",
            &rows,
            Some(&prod),
            Mode::Combined,
            Granularity::File,
            Level::Jit,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn package_aggregation_medians_and_any_label() {
        let mut ds = tiny(vec![vec![2.0], vec![4.0]], vec![false, true]);
        ds.meta[1].commit = "c0".into();
        ds.meta[0].commit = "c0".into();
        let out = aggregate_packages(&ds);
        assert_eq!(out.len(), 1);
        assert_eq!(out.x[0][0], 3.0);
        assert!(out.y[0]);
        assert_eq!(out.meta[0].name, "pkg");
        assert_eq!(out.granularity, Granularity::Package);
    }

    #[test]
    fn package_aggregation_is_idempotent() {
        let mut ds = tiny(
            vec![vec![2.0, 1.0], vec![4.0, 5.0], vec![9.0, 2.0]],
            vec![false, true, false],
        );
        ds.meta[2].name = "other/x.java".into();
        for m in &mut ds.meta {
            m.commit = "c0".into();
        }
        let once = aggregate_packages(&ds);
        let twice = aggregate_packages(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn release_aggregation_ors_labels() {
        let rows = vec![
            process_row("a/f.java", "c1", 1, 10, false),
            process_row("a/f.java", "c2", 1, 30, true),
            process_row("a/f.java", "c3", 2, 50, false),
        ];
        let (ds, _) = assemble(
            "proj",
            &rows,
            None,
            Mode::Process,
            Granularity::File,
            Level::Release,
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        assert!(ds.y[0], "release 1 inherits the defective commit");
        assert!(!ds.y[1]);
        let j = ds.feature_index("lt").unwrap();
        assert_eq!(ds.x[0][j], 20.0, "median of member features");
        assert_eq!(ds.meta[0].commit, "");
        assert_eq!(ds.effort[0], 20.0);
    }

    #[test]
    fn preprocess_scales_imputes_and_clamps() {
        let train = tiny(
            vec![vec![0.0, 1.0], vec![10.0, 1.0], vec![f64::NAN, 1.0]],
            vec![true, false, false],
        );
        let test = tiny(vec![vec![5.0, 7.0], vec![20.0, 7.0]], vec![true, false]);
        let bytes_of = |ds: &Dataset| {
            let mut b = Vec::new();
            write_dataset_csv(ds, &mut b).unwrap();
            b
        };
        let train_before = bytes_of(&train);
        let test_before = bytes_of(&test);
        let (tr, te, rep) = preprocess(&train, &test).unwrap();
        assert_eq!(bytes_of(&train), train_before, "inputs untouched");
        assert_eq!(bytes_of(&test), test_before);
        // f1 is constant on train and gets dropped from both sides.
        assert_eq!(tr.feature_names, vec!["f0".to_string()]);
        assert_eq!(rep.dropped, vec!["f1".to_string()]);
        assert_eq!(te.x[0], vec![0.5]);
        assert_eq!(te.x[1], vec![1.0], "out-of-range test value clamps");
        // The NaN train cell imputes to the median of {0,10} = 5 -> 0.5.
        assert_eq!(tr.x[2], vec![0.5]);
        assert_eq!(rep.imputed, vec![("f0".to_string(), 1)]);
        assert!(tr.x.iter().chain(te.x.iter()).flatten().all(|v| !v.is_nan()));
    }

    #[test]
    fn preprocess_rejects_empty_train() {
        let train = tiny(vec![], vec![]);
        let test = tiny(vec![vec![1.0]], vec![true]);
        let train = Dataset {
            feature_names: vec!["f0".into()],
            ..train
        };
        assert!(matches!(
            preprocess(&train, &test),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn smote_balances_exactly() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..90 {
            x.push(vec![i as f64, 0.0]);
            y.push(false);
        }
        for i in 0..10 {
            x.push(vec![i as f64, 10.0]);
            y.push(true);
        }
        let ds = tiny(x, y);
        let out = smote(&ds, &ResampleConfig { k: 5, seed: 42 }).unwrap();
        let pos = out.y.iter().filter(|&&b| b).count();
        let neg = out.y.len() - pos;
        assert_eq!((pos, neg), (90, 90));
        assert_eq!(&out.x[..100], &ds.x[..], "original rows untouched and first");
        let again = smote(&ds, &ResampleConfig { k: 5, seed: 42 }).unwrap();
        assert_eq!(out, again, "seeded resampling replays exactly");
        let other = smote(&ds, &ResampleConfig { k: 5, seed: 43 }).unwrap();
        assert_ne!(out.x, other.x, "different seed, different rows");
    }

    #[test]
    fn smote_synthetics_lie_on_minority_segments() {
        let mut x = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![0.2, 0.9],
        ];
        let mut y = vec![true, true, true];
        for i in 0..9 {
            x.push(vec![i as f64 * 0.1, 5.0]);
            y.push(false);
        }
        let ds = tiny(x, y);
        let out = smote(&ds, &ResampleConfig { k: 5, seed: 7 }).unwrap();
        let minority: Vec<&Vec<f64>> = ds.x[..3].iter().collect();
        for row in &out.x[12..] {
            let on_some_segment = minority.iter().enumerate().any(|(i, a)| {
                minority.iter().skip(i + 1).any(|b| {
                    // Recover u from the first coordinate that moves, then
                    // demand consistency on every other coordinate.
                    let mut u: Option<f64> = None;
                    for ((&ra, &rb), &rs) in a.iter().zip(b.iter()).zip(row.iter()) {
                        if (rb - ra).abs() > 1e-12 {
                            let cand = (rs - ra) / (rb - ra);
                            match u {
                                None => u = Some(cand),
                                Some(prev) if (prev - cand).abs() > 1e-9 => return false,
                                _ => {}
                            }
                        } else if (rs - ra).abs() > 1e-9 {
                            return false;
                        }
                    }
                    matches!(u, Some(v) if (-1e-9..=1.0 + 1e-9).contains(&v))
                })
            });
            assert!(on_some_segment, "synthetic row off all segments: {row:?}");
        }
    }

    #[test]
    fn smote_error_cases() {
        let ds = tiny(vec![vec![1.0], vec![2.0]], vec![true, true]);
        assert!(matches!(
            smote(&ds, &ResampleConfig::default()),
            Err(Error::Resample(_))
        ));
        let ds = tiny(vec![vec![1.0], vec![2.0], vec![3.0]], vec![true, false, false]);
        assert!(matches!(
            smote(&ds, &ResampleConfig::default()),
            Err(Error::Resample(_))
        ));
    }

    #[test]
    fn cross_val_splits_are_stratified_partitions() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            x.push(vec![i as f64]);
            y.push(i < 30);
        }
        let ds = tiny(x, y);
        let plan = make_splits(&ds, &SplitKind::standard_cv(), 11).unwrap();
        assert_eq!(plan.splits.len(), 25);
        for s in &plan.splits {
            assert_eq!(s.test.len(), 20);
            assert_eq!(s.train.len(), 80);
            let mut all: Vec<usize> = s.train.iter().chain(s.test.iter()).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..100).collect::<Vec<_>>(), "disjoint and complete");
            let pos = s.test.iter().filter(|&&i| ds.y[i]).count();
            assert_eq!(pos, 6, "30% defect ratio preserved per fold");
        }
        let same = make_splits(&ds, &SplitKind::standard_cv(), 11).unwrap();
        assert_eq!(plan, same);
        let diff = make_splits(&ds, &SplitKind::standard_cv(), 12).unwrap();
        assert_ne!(plan, diff);
    }

    #[test]
    fn cross_val_needs_rows_of_each_class() {
        let ds = tiny(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0], vec![6.0]],
            vec![true, false, false, false, false, false],
        );
        assert!(matches!(
            make_splits(&ds, &SplitKind::standard_cv(), 0),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn release_splits_follow_the_tail_rule() {
        let mut ds = tiny(
            (0..12).map(|i| vec![i as f64]).collect(),
            (0..12).map(|i| i % 3 == 0).collect(),
        );
        for (i, m) in ds.meta.iter_mut().enumerate() {
            m.release = (i / 2 + 1) as u32; // releases 1..=6, 2 rows each
        }
        let plan = make_splits(&ds, &SplitKind::ReleaseBased, 0).unwrap();
        assert_eq!(plan.splits.len(), 3);
        assert_eq!(plan.splits[0].name, "release-4");
        assert_eq!(plan.splits[0].train, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(plan.splits[0].test, vec![6, 7]);
        assert_eq!(plan.splits[2].test, vec![10, 11]);

        for m in &mut ds.meta {
            m.release = m.release.min(3);
        }
        assert!(matches!(
            make_splits(&ds, &SplitKind::ReleaseBased, 0),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn dataset_csv_round_trip_preserves_missing_cells() {
        let mut ds = tiny(vec![vec![1.0, f64::NAN], vec![2.5, 4.0]], vec![true, false]);
        ds.effort = vec![3.0, f64::NAN];
        let mut buf = Vec::new();
        write_dataset_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("project,name,release,commit,defective,effort,f0,f1"));
        let back = read_dataset_csv(&buf[..], "mem", ds.mode, ds.granularity, ds.level).unwrap();
        assert_eq!(back.meta, ds.meta);
        assert_eq!(back.y, ds.y);
        assert_eq!(back.x[1], ds.x[1]);
        assert!(back.x[0][1].is_nan());
        assert!(back.effort[1].is_nan());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_dataset() -> impl Strategy<Value = Dataset> {
            (2usize..5, 8usize..40).prop_flat_map(|(nf, n)| {
                let rows = proptest::collection::vec(
                    proptest::collection::vec(0.0f64..10.0, nf..=nf),
                    n..=n,
                );
                let labels = proptest::collection::vec(proptest::bool::weighted(0.3), n..=n);
                (rows, labels).prop_map(|(x, y)| tiny(x, y))
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn smote_balances_and_stays_convex(ds in arb_dataset(), seed in 0u64..1000) {
                let pos = ds.y.iter().filter(|&&b| b).count();
                let neg = ds.y.len() - pos;
                prop_assume!(pos >= 2 && neg >= 2);
                let out = smote(&ds, &ResampleConfig { k: 5, seed }).unwrap();
                let p2 = out.y.iter().filter(|&&b| b).count();
                prop_assert_eq!(p2, out.y.len() - p2);
                // Synthetic coordinates stay inside the minority bounding box.
                let minority: Vec<&Vec<f64>> = (0..ds.len())
                    .filter(|&i| ds.y[i] == (pos <= neg))
                    .map(|i| &ds.x[i])
                    .collect();
                for row in &out.x[ds.len()..] {
                    for j in 0..row.len() {
                        let lo = minority.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                        let hi = minority.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(row[j] >= lo - 1e-9 && row[j] <= hi + 1e-9);
                    }
                }
            }

            #[test]
            fn preprocess_lands_in_unit_interval(ds in arb_dataset()) {
                let half = ds.len() / 2;
                let train = ds.subset(&(0..half).collect::<Vec<_>>());
                let test = ds.subset(&(half..ds.len()).collect::<Vec<_>>());
                prop_assume!(!train.is_empty() && !test.is_empty());
                match preprocess(&train, &test) {
                    Ok((tr, te, _)) => {
                        for v in tr.x.iter().chain(te.x.iter()).flatten() {
                            prop_assert!(!v.is_nan());
                            prop_assert!(*v >= -1e-12 && *v <= 1.0 + 1e-12);
                        }
                        prop_assert_eq!(tr.feature_names, te.feature_names);
                    }
                    Err(Error::Data(_)) => {} // all-constant draw
                    Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
                }
            }

            #[test]
            fn cross_val_always_partitions(ds in arb_dataset(), seed in 0u64..100) {
                let folds = 3usize;
                let pos = ds.y.iter().filter(|&&b| b).count();
                prop_assume!(pos >= folds && ds.len() - pos >= folds);
                let plan = make_splits(
                    &ds,
                    &SplitKind::CrossVal { repeats: 2, folds },
                    seed,
                ).unwrap();
                prop_assert_eq!(plan.splits.len(), 6);
                for s in &plan.splits {
                    let mut all: Vec<usize> =
                        s.train.iter().chain(s.test.iter()).copied().collect();
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
                }
            }
        }
    }
}

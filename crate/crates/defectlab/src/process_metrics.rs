//! Change-history metrics for every (file, commit) pair.
//!
//! A single forward scan accumulates per-file, per-author, and co-change
//! state; each row is computed from the state *before* its commit is folded
//! in, so nothing leaks from the future. Merge commits are skipped entirely.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repo_mining::ProjectHistory;

/// Feature columns in output order.
pub const PROCESS_METRICS: [&str; 21] = [
    "la", "ld", "lt", "age", "adev", "ddev", "nuc", "own", "minor", "nddev", "ncomm", "nadev",
    "avg_nddev", "avg_nadev", "avg_ncomm", "ns", "nd", "exp", "rexp", "sexp", "sctr",
];

const SECONDS_PER_DAY: f64 = 86_400.0;
const DAYS_PER_YEAR: f64 = 365.25;

/// One (file, commit) observation. Field order matches the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessRow {
    /// Rename-stable file identity.
    pub file: String,
    pub commit: String,
    pub release: u32,
    pub la: u64,
    pub ld: u64,
    /// Lines in the file before this change.
    pub lt: u64,
    /// Days since the previous change to this file; 0 on first change.
    pub age: f64,
    /// Authors active on this file within the current release, including
    /// the current author.
    pub adev: u64,
    /// Distinct prior authors of this file.
    pub ddev: u64,
    /// Prior commits touching this file.
    pub nuc: u64,
    /// Largest per-author share of lines added so far; 0 with no history.
    pub own: f64,
    /// Authors holding a share in (0, 0.05).
    pub minor: u64,
    pub nddev: u64,
    pub ncomm: u64,
    pub nadev: u64,
    pub avg_nddev: f64,
    pub avg_nadev: f64,
    pub avg_ncomm: f64,
    /// Distinct subsystems (first path components) the commit touches.
    pub ns: u64,
    /// Distinct parent directories the commit touches.
    pub nd: u64,
    /// Author's prior non-merge commit count.
    pub exp: u64,
    /// Sum over the author's prior commits of 1/(age in years + 1).
    pub rexp: f64,
    /// Author's prior commits inside this file's subsystem.
    pub sexp: u64,
    /// Negated normalised entropy of churn across the commit's files.
    pub sctr: f64,
    pub defective: bool,
}

impl ProcessRow {
    /// Metric values in [`PROCESS_METRICS`] order.
    #[must_use]
    pub fn feature_values(&self) -> [f64; 21] {
        [
            self.la as f64,
            self.ld as f64,
            self.lt as f64,
            self.age,
            self.adev as f64,
            self.ddev as f64,
            self.nuc as f64,
            self.own,
            self.minor as f64,
            self.nddev as f64,
            self.ncomm as f64,
            self.nadev as f64,
            self.avg_nddev,
            self.avg_nadev,
            self.avg_ncomm,
            self.ns as f64,
            self.nd as f64,
            self.exp as f64,
            self.rexp,
            self.sexp as f64,
            self.sctr,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ProcessOptions {
    /// Only files with one of these suffixes produce rows; every file still
    /// feeds the shared state so mixed commits keep their full footprint.
    pub extensions: Vec<String>,
}

impl Default for ProcessOptions {
    fn default() -> Self {
        ProcessOptions {
            extensions: vec![".java".to_string()],
        }
    }
}

fn has_extension(path: &str, extensions: &[String]) -> bool {
    let lower = path.to_ascii_lowercase();
    extensions.iter().any(|e| lower.ends_with(&e.to_ascii_lowercase()))
}

fn subsystem_of(path: &str) -> &str {
    match path.find('/') {
        Some(i) => &path[..i],
        None => "<root>",
    }
}

fn directory_of(path: &str) -> &str {
    match path.rfind('/') {
        Some(i) => &path[..i],
        None => "<root>",
    }
}

#[derive(Default)]
struct FileState {
    last_ts: Option<i64>,
    size: u64,
    /// author id -> lines added over the file's history.
    contrib: HashMap<usize, u64>,
    contrib_total: u64,
    /// Sequence numbers of prior commits touching this file.
    commits: BTreeSet<usize>,
    authors: HashSet<usize>,
    /// File ids ever co-committed with this one.
    neighbors: BTreeSet<usize>,
    /// Release the active-author set belongs to; stale sets read as empty.
    active_release: u32,
    active_authors: HashSet<usize>,
}

impl FileState {
    fn active_count(&self, release: u32) -> u64 {
        if self.active_release == release {
            self.active_authors.len() as u64
        } else {
            0
        }
    }
}

#[derive(Default)]
struct AuthorState {
    commits: u64,
    times: Vec<i64>,
    subsystem_commits: HashMap<String, u64>,
}

#[derive(Default)]
struct Interner {
    ids: HashMap<String, usize>,
}

impl Interner {
    fn get(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.ids.len();
        self.ids.insert(name.to_string(), id);
        id
    }
}

/// Computes one row per matching file per non-merge commit.
///
/// `defective` holds (canonical id, inducing commit hash) pairs; rows whose
/// key appears there are flagged.
#[must_use]
pub fn compute_process_rows(
    history: &ProjectHistory,
    defective: &HashSet<(String, String)>,
    opts: &ProcessOptions,
) -> Vec<ProcessRow> {
    let defective: HashSet<(&str, &str)> = defective
        .iter()
        .map(|(f, c)| (f.as_str(), c.as_str()))
        .collect();

    let mut files = Interner::default();
    let mut authors = Interner::default();
    let mut file_state: Vec<FileState> = Vec::new();
    let mut author_state: Vec<AuthorState> = Vec::new();
    // (author id, release) per processed non-merge commit, indexed by seq.
    let mut commit_meta: Vec<(usize, u32)> = Vec::new();
    let mut rows = Vec::new();

    for (idx, commit) in history.commits.iter().enumerate() {
        if commit.is_merge() {
            continue;
        }
        let release = history.release_of(idx);
        let author_id = authors.get(&commit.author);
        if author_id == author_state.len() {
            author_state.push(AuthorState::default());
        }

        // Commit-scoped quantities over the full change footprint.
        let mut subsystems: BTreeSet<&str> = BTreeSet::new();
        let mut dirs: BTreeSet<&str> = BTreeSet::new();
        let mut churn: Vec<u64> = Vec::new();
        for ch in &commit.changes {
            subsystems.insert(subsystem_of(&ch.path));
            dirs.insert(directory_of(&ch.path));
            if ch.added + ch.deleted > 0 {
                churn.push(ch.added + ch.deleted);
            }
        }
        let ns = subsystems.len() as u64;
        let nd = dirs.len() as u64;
        let sctr = scatter(&churn);

        let file_ids: Vec<usize> = commit
            .changes
            .iter()
            .map(|ch| {
                let id = files.get(&ch.canonical_id);
                if id == file_state.len() {
                    file_state.push(FileState::default());
                }
                id
            })
            .collect();

        // Emit rows against pre-commit state.
        for (ch, &fid) in commit.changes.iter().zip(&file_ids) {
            if !has_extension(&ch.path, &opts.extensions) {
                continue;
            }
            let fs = &file_state[fid];
            let age = match fs.last_ts {
                Some(prev) => (commit.timestamp - prev) as f64 / SECONDS_PER_DAY,
                None => 0.0,
            };
            let (own, minor) = ownership(fs);
            let adev = {
                let mut n = fs.active_count(release);
                if fs.active_release != release || !fs.active_authors.contains(&author_id) {
                    n += 1;
                }
                n
            };
            let nb = neighborhood(fs, &file_state, &commit_meta, release);
            let aus = &author_state[author_id];
            let rexp: f64 = aus
                .times
                .iter()
                .map(|&t| {
                    let years = (commit.timestamp - t) as f64 / SECONDS_PER_DAY / DAYS_PER_YEAR;
                    1.0 / (years + 1.0)
                })
                .sum();
            let sexp = aus
                .subsystem_commits
                .get(subsystem_of(&ch.path))
                .copied()
                .unwrap_or(0);
            rows.push(ProcessRow {
                file: ch.canonical_id.clone(),
                commit: commit.hash.clone(),
                release,
                la: ch.added,
                ld: ch.deleted,
                lt: fs.size,
                age,
                adev,
                ddev: fs.authors.len() as u64,
                nuc: fs.commits.len() as u64,
                own,
                minor,
                nddev: nb.nddev,
                ncomm: nb.ncomm,
                nadev: nb.nadev,
                avg_nddev: nb.avg_nddev,
                avg_nadev: nb.avg_nadev,
                avg_ncomm: nb.avg_ncomm,
                ns,
                nd,
                exp: aus.commits,
                rexp,
                sexp,
                sctr,
                defective: defective.contains(&(ch.canonical_id.as_str(), commit.hash.as_str())),
            });
        }

        // Fold the commit into the state.
        let seq = commit_meta.len();
        commit_meta.push((author_id, release));
        for (ch, &fid) in commit.changes.iter().zip(&file_ids) {
            let fs = &mut file_state[fid];
            fs.last_ts = Some(commit.timestamp);
            fs.size = (fs.size + ch.added).saturating_sub(ch.deleted);
            *fs.contrib.entry(author_id).or_insert(0) += ch.added;
            fs.contrib_total += ch.added;
            fs.commits.insert(seq);
            fs.authors.insert(author_id);
            if fs.active_release != release {
                fs.active_release = release;
                fs.active_authors.clear();
            }
            fs.active_authors.insert(author_id);
        }
        for (i, &a) in file_ids.iter().enumerate() {
            for &b in file_ids.iter().skip(i + 1) {
                if a != b {
                    file_state[a].neighbors.insert(b);
                    file_state[b].neighbors.insert(a);
                }
            }
        }
        let aus = &mut author_state[author_id];
        aus.commits += 1;
        aus.times.push(commit.timestamp);
        for sub in subsystems {
            *aus.subsystem_commits.entry(sub.to_string()).or_insert(0) += 1;
        }
    }
    rows
}

struct Neighborhood {
    nddev: u64,
    ncomm: u64,
    nadev: u64,
    avg_nddev: f64,
    avg_nadev: f64,
    avg_ncomm: f64,
}

fn neighborhood(
    fs: &FileState,
    file_state: &[FileState],
    commit_meta: &[(usize, u32)],
    release: u32,
) -> Neighborhood {
    let mut union: BTreeSet<usize> = fs.commits.clone();
    for &n in &fs.neighbors {
        union.extend(file_state[n].commits.iter().copied());
    }
    let mut all_authors = HashSet::new();
    let mut release_authors = HashSet::new();
    for &seq in &union {
        let (author, rel) = commit_meta[seq];
        all_authors.insert(author);
        if rel == release {
            release_authors.insert(author);
        }
    }
    let (avg_nddev, avg_nadev, avg_ncomm) = if fs.neighbors.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let k = fs.neighbors.len() as f64;
        let mut d = 0.0;
        let mut a = 0.0;
        let mut c = 0.0;
        for &n in &fs.neighbors {
            let g = &file_state[n];
            d += g.authors.len() as f64;
            a += g.active_count(release) as f64;
            c += g.commits.len() as f64;
        }
        (d / k, a / k, c / k)
    };
    Neighborhood {
        nddev: all_authors.len() as u64,
        ncomm: union.len() as u64,
        nadev: release_authors.len() as u64,
        avg_nddev,
        avg_nadev,
        avg_ncomm,
    }
}

fn ownership(fs: &FileState) -> (f64, u64) {
    if fs.contrib_total == 0 {
        return (0.0, 0);
    }
    let total = fs.contrib_total as f64;
    let mut own: f64 = 0.0;
    let mut minor = 0;
    for &lines in fs.contrib.values() {
        let share = lines as f64 / total;
        own = own.max(share);
        if share > 0.0 && share < 0.05 {
            minor += 1;
        }
    }
    (own, minor)
}

/// Negated normalised Shannon entropy of the churn distribution; 0 when
/// fewer than two files changed, -1 when churn is spread evenly.
fn scatter(churn: &[u64]) -> f64 {
    if churn.len() < 2 {
        return 0.0;
    }
    let total: u64 = churn.iter().sum();
    let total = total as f64;
    let h: f64 = churn
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    -h / (churn.len() as f64).ln()
}

// ---------------------------------------------------------------------------
// CSV round trip

pub fn write_process_csv<W: Write>(rows: &[ProcessRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_process_csv<R: Read>(reader: R, source_name: &str) -> Result<Vec<ProcessRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<ProcessRow>().enumerate() {
        let row = rec.map_err(|e| {
            Error::parse(source_name, i + 2, format!("bad process row: {e}"))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Rows grouped by release index, preserving scan order within each group.
#[must_use]
pub fn rows_by_release(rows: &[ProcessRow]) -> BTreeMap<u32, Vec<&ProcessRow>> {
    let mut map: BTreeMap<u32, Vec<&ProcessRow>> = BTreeMap::new();
    for row in rows {
        map.entry(row.release).or_default().push(row);
    }
    map
}

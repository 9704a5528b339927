//! Mining a git repository into a replayable commit-history dump.
//!
//! The dump is JSON lines, one commit per line, with per-file line counts
//! taken from numstat and rename detection left to the version-control
//! tool. Parsing a dump yields a [`ProjectHistory`] whose commits are
//! sorted (timestamp, then parent-before-child among ties, then hash) and
//! whose file changes carry a rename-stable `canonical_id`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gitio::Git;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Add,
    Modify,
    Delete,
    Rename,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    pub added: u64,
    pub deleted: u64,
    pub kind: ChangeKind,
    #[serde(default)]
    pub binary: bool,
    /// Rename-stable identity, assigned while building a history; not part
    /// of the dump format.
    #[serde(skip)]
    pub canonical_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Commit {
    pub hash: String,
    pub parents: Vec<String>,
    pub author: String,
    pub timestamp: i64,
    pub message: String,
    pub changes: Vec<FileChange>,
}

impl Commit {
    #[must_use]
    pub fn is_merge(&self) -> bool {
        self.parents.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub tag: String,
    /// Unix seconds UTC.
    pub date: i64,
    /// 1-based ordinal.
    pub index: u32,
}

/// A parsed, ordered history with canonical file identities and (once
/// assigned) a total commit-to-release map over non-merge commits.
#[derive(Debug, Clone, Default)]
pub struct ProjectHistory {
    pub commits: Vec<Commit>,
    pub releases: Vec<Release>,
    /// Release index per commit, parallel to `commits`; 0 = unassigned.
    pub commit_release: Vec<u32>,
}

/// Optional side data for the two sanity checks that need forge metadata.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProjectMetadata {
    #[serde(default)]
    pub pull_requests: Option<u64>,
    #[serde(default)]
    pub issues: Option<u64>,
}

// ---------------------------------------------------------------------------
// Mining (git subprocess -> Vec<Commit>)

/// Reads the full HEAD history of `repo` into commit records.
pub fn mine_repo(repo: &Git) -> Result<Vec<Commit>> {
    if !repo.has_commits() {
        return Ok(Vec::new());
    }
    let log = repo.log_numstat_raw()?;
    parse_log_output(&log)
}

/// One status entry from a `--raw` line.
struct RawEntry {
    status: char,
    old_path: Option<String>,
    path: String,
}

/// One `--numstat` entry, keyed by post-change path.
struct NumstatEntry {
    added: u64,
    deleted: u64,
    binary: bool,
    old_path: Option<String>,
    path: String,
}

fn parse_log_output(log: &str) -> Result<Vec<Commit>> {
    let mut commits = Vec::new();
    for record in log.split('\u{1}') {
        if record.trim().is_empty() {
            continue;
        }
        let (header, tail) = record
            .split_once('\u{3}')
            .ok_or_else(|| Error::Mining("log record missing terminator".into()))?;
        let fields: Vec<&str> = header.splitn(6, '\u{2}').collect();
        if fields.len() != 6 {
            return Err(Error::Mining(format!(
                "log record has {} header fields, expected 6",
                fields.len()
            )));
        }
        let email = fields[2].trim();
        let name = fields[3].trim();
        let author = if email.is_empty() {
            name.to_lowercase()
        } else {
            email.to_lowercase()
        };
        let timestamp: i64 = fields[4]
            .trim()
            .parse()
            .map_err(|_| Error::Mining(format!("bad timestamp {:?}", fields[4])))?;

        let mut raws = Vec::new();
        let mut stats = Vec::new();
        for line in tail.lines() {
            if let Some(rest) = line.strip_prefix(':') {
                raws.push(parse_raw_line(rest)?);
            } else if line
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_digit() || c == '-')
            {
                stats.push(parse_numstat_line(line)?);
            }
        }
        let changes = join_changes(raws, stats);

        commits.push(Commit {
            hash: fields[0].trim().to_string(),
            parents: fields[1].split_whitespace().map(str::to_string).collect(),
            author,
            timestamp,
            message: fields[5].trim_end().to_string(),
            changes,
        });
    }
    Ok(commits)
}

fn parse_raw_line(rest: &str) -> Result<RawEntry> {
    // ":100644 100644 <sha> <sha> M\tpath" or "... R100\told\tnew"
    let mut parts = rest.split('\t');
    let meta = parts
        .next()
        .ok_or_else(|| Error::Mining("empty raw line".into()))?;
    let status = meta
        .split(' ')
        .next_back()
        .and_then(|s| s.chars().next())
        .ok_or_else(|| Error::Mining(format!("raw line missing status: {rest:?}")))?;
    let first = parts
        .next()
        .map(unquote_path)
        .ok_or_else(|| Error::Mining(format!("raw line missing path: {rest:?}")))?;
    let second = parts.next().map(unquote_path);
    let (old_path, path) = match (status, second) {
        ('R' | 'C', Some(new)) => (Some(first), new),
        (_, _) => (None, first),
    };
    Ok(RawEntry {
        status,
        old_path,
        path,
    })
}

fn parse_numstat_line(line: &str) -> Result<NumstatEntry> {
    let mut parts = line.split('\t');
    let (a, d, raw_path) = match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(d), Some(p)) => (a, d, p),
        _ => return Err(Error::Mining(format!("bad numstat line {line:?}"))),
    };
    let binary = a == "-" || d == "-";
    let added = if binary { 0 } else { parse_count(a, line)? };
    let deleted = if binary { 0 } else { parse_count(d, line)? };
    let path_field = unquote_path(raw_path);
    let (old_path, path) = expand_rename_path(&path_field);
    Ok(NumstatEntry {
        added,
        deleted,
        binary,
        old_path,
        path,
    })
}

fn parse_count(s: &str, line: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| Error::Mining(format!("bad count in numstat line {line:?}")))
}

/// Expands numstat rename notation. `src/{A.java => B.java}` and plain
/// `old => new` both yield `(Some(old), new)`; anything else is `(None, s)`.
fn expand_rename_path(s: &str) -> (Option<String>, String) {
    if let (Some(l), Some(r)) = (s.find('{'), s.rfind('}')) {
        if l < r {
            if let Some((a, b)) = s[l + 1..r].split_once(" => ") {
                let pre = &s[..l];
                let post = &s[r + 1..];
                let old = normalize_slashes(&format!("{pre}{a}{post}"));
                let new = normalize_slashes(&format!("{pre}{b}{post}"));
                return (Some(old), new);
            }
        }
    }
    if let Some((a, b)) = s.split_once(" => ") {
        return (Some(a.to_string()), b.to_string());
    }
    (None, s.to_string())
}

fn normalize_slashes(s: &str) -> String {
    let mut out = s.replace("//", "/");
    while out.contains("//") {
        out = out.replace("//", "/");
    }
    out
}

/// Strips git's C-style quoting from paths with unusual characters.
/// Octal escapes encode single bytes of the UTF-8 form.
fn unquote_path(s: &str) -> String {
    let s = s.trim_end_matches(['\r', '\n']);
    if !(s.starts_with('"') && s.ends_with('"') && s.len() >= 2) {
        return s.to_string();
    }
    let inner = s[1..s.len() - 1].as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(inner.len());
    let mut i = 0;
    while i < inner.len() {
        let b = inner[i];
        if b != b'\\' {
            out.push(b);
            i += 1;
            continue;
        }
        i += 1;
        match inner.get(i) {
            Some(b't') => {
                out.push(b'\t');
                i += 1;
            }
            Some(b'n') => {
                out.push(b'\n');
                i += 1;
            }
            Some(b'\\') => {
                out.push(b'\\');
                i += 1;
            }
            Some(b'"') => {
                out.push(b'"');
                i += 1;
            }
            Some(d @ b'0'..=b'7') => {
                let mut v = (d - b'0') as u32;
                i += 1;
                let mut taken = 1;
                while taken < 3 {
                    match inner.get(i) {
                        Some(o @ b'0'..=b'7') => {
                            v = v * 8 + (o - b'0') as u32;
                            i += 1;
                            taken += 1;
                        }
                        _ => break,
                    }
                }
                out.push(v as u8);
            }
            Some(&other) => {
                out.push(other);
                i += 1;
            }
            None => {}
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn join_changes(raws: Vec<RawEntry>, stats: Vec<NumstatEntry>) -> Vec<FileChange> {
    let mut by_path: HashMap<String, (u64, u64, bool)> = HashMap::new();
    for st in &stats {
        by_path.insert(st.path.clone(), (st.added, st.deleted, st.binary));
    }
    if raws.is_empty() {
        // No --raw section (unexpected, but numstat alone still tells us
        // paths and counts); synthesize modify/rename records.
        return stats
            .into_iter()
            .map(|st| FileChange {
                kind: if st.old_path.is_some() {
                    ChangeKind::Rename
                } else {
                    ChangeKind::Modify
                },
                path: st.path,
                old_path: st.old_path,
                added: st.added,
                deleted: st.deleted,
                binary: st.binary,
                canonical_id: String::new(),
            })
            .collect();
    }
    raws.into_iter()
        .map(|raw| {
            let (added, deleted, binary) = by_path
                .get(&raw.path)
                .copied()
                .unwrap_or((0, 0, false));
            let kind = match raw.status {
                'A' | 'C' => ChangeKind::Add,
                'D' => ChangeKind::Delete,
                'R' => ChangeKind::Rename,
                _ => ChangeKind::Modify,
            };
            FileChange {
                path: raw.path,
                old_path: raw.old_path,
                added,
                deleted,
                kind,
                binary,
                canonical_id: String::new(),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dump IO

/// Writes commits as JSON lines (one commit per line).
pub fn write_dump<W: Write>(commits: &[Commit], mut w: W) -> Result<()> {
    for c in commits {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Mines `repo_path` and writes the dump to `out_path`. Records are sorted
/// before writing so two dumps of the same repository state are
/// byte-identical.
pub fn dump_history(repo_path: &Path, out_path: &Path) -> Result<()> {
    let git = Git::open(repo_path)?;
    let mut commits = mine_repo(&git)?;
    sort_commits(&mut commits);
    let file = std::fs::File::create(out_path)?;
    let mut w = std::io::BufWriter::new(file);
    write_dump(&commits, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Parses a JSON-lines dump into an ordered history with canonical file
/// identities. Malformed lines are rejected with their line number.
pub fn parse_dump<R: BufRead>(reader: R, source_name: &str) -> Result<ProjectHistory> {
    let mut commits = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let commit: Commit = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, idx + 1, e.to_string()))?;
        if commit.hash.is_empty() {
            return Err(Error::parse(source_name, idx + 1, "record missing hash"));
        }
        commits.push(commit);
    }
    Ok(ProjectHistory::from_commits(commits))
}

/// Sorts by timestamp, breaking ties parent-before-child, then by hash.
fn sort_commits(commits: &mut Vec<Commit>) {
    commits.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.hash.cmp(&b.hash))
    });
    // Fix parent-before-child order inside equal-timestamp runs.
    let mut out: Vec<Commit> = Vec::with_capacity(commits.len());
    let mut i = 0;
    while i < commits.len() {
        let mut j = i + 1;
        while j < commits.len() && commits[j].timestamp == commits[i].timestamp {
            j += 1;
        }
        if j - i > 1 {
            let group: Vec<Commit> = commits[i..j].to_vec();
            out.extend(topo_order(group));
        } else {
            out.push(commits[i].clone());
        }
        i = j;
    }
    *commits = std::mem::take(&mut out);
}

/// Kahn's algorithm over parent edges within one tie group; the ready set
/// is drained in hash order for determinism.
fn topo_order(group: Vec<Commit>) -> Vec<Commit> {
    let index: HashMap<String, usize> = group
        .iter()
        .enumerate()
        .map(|(i, c)| (c.hash.clone(), i))
        .collect();
    let mut indegree = vec![0usize; group.len()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); group.len()];
    for (i, c) in group.iter().enumerate() {
        for p in &c.parents {
            if let Some(&pi) = index.get(p) {
                children[pi].push(i);
                indegree[i] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..group.len()).filter(|&i| indegree[i] == 0).collect();
    ready.sort_by(|&a, &b| group[a].hash.cmp(&group[b].hash));
    let mut order = Vec::with_capacity(group.len());
    while let Some(i) = ready.first().copied() {
        ready.remove(0);
        order.push(i);
        for &ch in &children[i] {
            indegree[ch] -= 1;
            if indegree[ch] == 0 {
                let pos = ready
                    .binary_search_by(|&x| group[x].hash.cmp(&group[ch].hash))
                    .unwrap_or_else(|p| p);
                ready.insert(pos, ch);
            }
        }
    }
    // A cycle cannot happen in a real DAG; keep leftovers in hash order.
    if order.len() < group.len() {
        let seen: HashSet<usize> = order.iter().copied().collect();
        let mut rest: Vec<usize> = (0..group.len()).filter(|i| !seen.contains(i)).collect();
        rest.sort_by(|&a, &b| group[a].hash.cmp(&group[b].hash));
        order.extend(rest);
    }
    let mut slots: Vec<Option<Commit>> = group.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|i| slots[i].take().expect("each index used once"))
        .collect()
}

impl ProjectHistory {
    /// Sorts the commits and assigns rename-stable canonical ids.
    ///
    /// A path's first creation owns the bare path as its id; deleting and
    /// re-creating the path starts a new identity (`path@2`, `path@3`, ...).
    /// Renames carry the id to the new path.
    #[must_use]
    pub fn from_commits(mut commits: Vec<Commit>) -> Self {
        sort_commits(&mut commits);
        let mut live: HashMap<String, String> = HashMap::new();
        let mut creations: HashMap<String, u32> = HashMap::new();
        let fresh = |path: &str, creations: &mut HashMap<String, u32>| -> String {
            let n = creations.entry(path.to_string()).or_insert(0);
            *n += 1;
            if *n == 1 {
                path.to_string()
            } else {
                format!("{path}@{n}")
            }
        };
        for commit in &mut commits {
            // Removals first so a commit can rename A->B and add a new A.
            let mut freed: HashMap<String, String> = HashMap::new();
            for ch in &commit.changes {
                match ch.kind {
                    ChangeKind::Delete => {
                        if let Some(id) = live.remove(&ch.path) {
                            freed.insert(ch.path.clone(), id);
                        }
                    }
                    ChangeKind::Rename => {
                        if let Some(old) = &ch.old_path {
                            if let Some(id) = live.remove(old) {
                                freed.insert(old.clone(), id);
                            }
                        }
                    }
                    _ => {}
                }
            }
            for ch in &mut commit.changes {
                match ch.kind {
                    ChangeKind::Delete => {
                        ch.canonical_id = freed
                            .remove(&ch.path)
                            .unwrap_or_else(|| fresh(&ch.path, &mut creations));
                    }
                    ChangeKind::Rename => {
                        let old = ch.old_path.clone().unwrap_or_else(|| ch.path.clone());
                        let id = freed
                            .remove(&old)
                            .unwrap_or_else(|| fresh(&old, &mut creations));
                        live.insert(ch.path.clone(), id.clone());
                        ch.canonical_id = id;
                    }
                    ChangeKind::Add => {
                        let id = fresh(&ch.path, &mut creations);
                        live.insert(ch.path.clone(), id.clone());
                        ch.canonical_id = id;
                    }
                    ChangeKind::Modify => {
                        let id = live.get(&ch.path).cloned().unwrap_or_else(|| {
                            let id = fresh(&ch.path, &mut creations);
                            live.insert(ch.path.clone(), id.clone());
                            id
                        });
                        ch.canonical_id = id;
                    }
                }
            }
        }
        let n = commits.len();
        ProjectHistory {
            commits,
            releases: Vec::new(),
            commit_release: vec![0; n],
        }
    }

    /// Maps every commit to the earliest release whose date is on or after
    /// the commit timestamp; later commits fold into the final release.
    pub fn assign_releases(&mut self, releases: Vec<Release>) -> Result<()> {
        if releases.is_empty() {
            return Err(Error::Config("release list is empty".into()));
        }
        for w in releases.windows(2) {
            if w[1].date <= w[0].date {
                return Err(Error::Config(format!(
                    "release dates not strictly increasing ({} then {})",
                    w[0].tag, w[1].tag
                )));
            }
        }
        self.commit_release = self
            .commits
            .iter()
            .map(|c| {
                releases
                    .iter()
                    .find(|r| r.date >= c.timestamp)
                    .map_or(releases.len() as u32, |r| r.index)
            })
            .collect();
        self.releases = releases;
        Ok(())
    }

    /// Release index for the commit at `idx` (0 when unassigned).
    #[must_use]
    pub fn release_of(&self, idx: usize) -> u32 {
        self.commit_release.get(idx).copied().unwrap_or(0)
    }

    #[must_use]
    pub fn non_merge_count(&self) -> usize {
        self.commits.iter().filter(|c| !c.is_merge()).count()
    }
}

// ---------------------------------------------------------------------------
// Releases file

/// Reads a `tag,date` CSV; dates are ISO-8601 UTC (date or full timestamp).
pub fn read_releases<R: std::io::Read>(reader: R, source_name: &str) -> Result<Vec<Release>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let head = rdr.headers()?;
        if head.len() < 2 || &head[0] != "tag" || &head[1] != "date" {
            return Err(Error::parse(
                source_name,
                1,
                format!("expected header tag,date, got {head:?}"),
            ));
        }
    }
    let mut releases = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::parse(source_name, i + 2, "expected tag,date"));
        }
        let date = parse_iso_utc(&rec[1])
            .ok_or_else(|| Error::parse(source_name, i + 2, format!("bad date {:?}", &rec[1])))?;
        releases.push(Release {
            tag: rec[0].to_string(),
            date,
            index: (releases.len() + 1) as u32,
        });
    }
    Ok(releases)
}

pub fn read_releases_file(path: &Path) -> Result<Vec<Release>> {
    let f = std::fs::File::open(path)?;
    read_releases(std::io::BufReader::new(f), &path.display().to_string())
}

fn parse_iso_utc(s: &str) -> Option<i64> {
    use chrono::{DateTime, NaiveDate, NaiveDateTime};
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.and_utc().timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp());
    }
    None
}

// ---------------------------------------------------------------------------
// Project validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Unchecked,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    /// True when no check failed (unchecked ones do not count against).
    #[must_use]
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    #[must_use]
    pub fn unchecked_count(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Unchecked)
            .count()
    }
}

const WEEK_SECONDS: i64 = 7 * 24 * 3600;

/// Applies the project sanity checks: > 20 commits, ≥ 50 weeks of activity,
/// ≥ 8 contributors, ≥ 10 defective commits (when a count is supplied),
/// ≥ 1 pull request and > 8 issues (when forge metadata is supplied).
#[must_use]
pub fn validate_project(
    history: &ProjectHistory,
    defective_commits: Option<usize>,
    metadata: Option<&ProjectMetadata>,
) -> ValidationReport {
    let mut checks = Vec::new();
    let non_merge: Vec<&Commit> = history.commits.iter().filter(|c| !c.is_merge()).collect();

    let commits = non_merge.len();
    checks.push(threshold_check("Commits", commits > 20, format!("{commits} non-merge commits (need > 20)")));

    let (min_ts, max_ts) = non_merge
        .iter()
        .fold((i64::MAX, i64::MIN), |(lo, hi), c| {
            (lo.min(c.timestamp), hi.max(c.timestamp))
        });
    let weeks = if commits == 0 {
        0
    } else {
        (max_ts - min_ts) / WEEK_SECONDS
    };
    checks.push(threshold_check("Duration", weeks >= 50, format!("{weeks} weeks of activity (need >= 50)")));

    let contributors: HashSet<&str> = non_merge.iter().map(|c| c.author.as_str()).collect();
    checks.push(threshold_check(
        "Personal Purpose",
        contributors.len() >= 8,
        format!("{} contributors (need >= 8)", contributors.len()),
    ));

    match defective_commits {
        Some(n) => checks.push(threshold_check("Defective Commits", n >= 10, format!("{n} defective commits (need >= 10)"))),
        None => checks.push(CheckOutcome {
            name: "Defective Commits",
            status: CheckStatus::Unchecked,
            detail: "no label data supplied".into(),
        }),
    }

    let (pr, issues) = metadata
        .map(|m| (m.pull_requests, m.issues))
        .unwrap_or((None, None));
    match pr {
        Some(n) => checks.push(threshold_check("Collaboration", n >= 1, format!("{n} pull requests (need >= 1)"))),
        None => checks.push(CheckOutcome {
            name: "Collaboration",
            status: CheckStatus::Unchecked,
            detail: "no forge metadata supplied".into(),
        }),
    }
    match issues {
        Some(n) => checks.push(threshold_check("Issues", n > 8, format!("{n} issues (need > 8)"))),
        None => checks.push(CheckOutcome {
            name: "Issues",
            status: CheckStatus::Unchecked,
            detail: "no forge metadata supplied".into(),
        }),
    }

    ValidationReport { checks }
}

fn threshold_check(name: &'static str, ok: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        detail,
    }
}

//! Bug-fix identification and SZZ tracing.
//!
//! A commit is a fix when its message carries a fix keyword as a whole
//! word (case-insensitive) or an issue reference like `#42`. For every
//! source line the fix deletes or replaces, blame at the fix's first
//! parent names the commit that last touched the line; that commit becomes
//! bug-inducing for the file. Blank and pure-comment lines are filtered
//! out by default so cosmetic deletions do not accuse their authors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gitio::Git;
use crate::product_metrics::tokenizer::{classify_lines, LineKind};
use crate::product_metrics::{has_extension, snapshot};
use crate::repo_mining::{ChangeKind, Commit, FileChange, ProjectHistory};

pub const DEFAULT_KEYWORDS: [&str; 10] = [
    "bug", "fix", "fixes", "fixed", "fixing", "defect", "error", "fail", "failure", "patch",
];

#[derive(Debug, Clone)]
pub struct LabelOptions {
    pub keywords: Vec<String>,
    /// skip blank and pure-comment deleted lines
    pub line_filter: bool,
    /// which files are labeled at all
    pub extensions: Vec<String>,
}

impl Default for LabelOptions {
    fn default() -> Self {
        LabelOptions {
            keywords: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            line_filter: true,
            extensions: vec![".java".into()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixCommit {
    pub hash: String,
    pub matched_keywords: Vec<String>,
    /// canonical ids of labeled-language files this fix deleted lines from
    pub fixed_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducingLabel {
    pub inducing_hash: String,
    pub canonical_id: String,
    pub fix_hash: String,
    pub line_evidence: u64,
}

/// One blamed line of a file at a commit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlameRecord {
    pub file: String,
    pub at_commit: String,
    pub line_number: u32,
    pub origin_hash: String,
    /// fix commit that removed this line (offline dumps only)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deleted_in: Option<String>,
    /// line class at `at_commit` (offline dumps only; defaults to code)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

/// A line removed (or replaced) by a fix, with its class at the parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeletedLine {
    pub number: u32,
    pub kind: LineKind,
}

/// Source access needed by SZZ: which old-side lines a fix removed, and
/// who last touched each line of the parent version. `new_path` differs
/// from `old_path` only when the fix renames the file. Implementations
/// must be safe for concurrent read-only use.
pub trait BlameProvider: Sync {
    fn blame(&self, commit: &str, path: &str) -> Result<Vec<BlameRecord>>;
    fn deleted_lines(
        &self,
        parent: &str,
        fix: &str,
        old_path: &str,
        new_path: &str,
    ) -> Result<Vec<DeletedLine>>;
}

// ---------------------------------------------------------------------------
// Fix identification

/// Splits into lowercase alphanumeric words; `#123` survives as a word.
fn message_words(message: &str) -> Vec<String> {
    let lower = message.to_lowercase();
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut chars = lower.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_alphanumeric() || c == '_' {
            cur.push(c);
        } else {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            if c == '#' && chars.peek().is_some_and(char::is_ascii_digit) {
                let mut issue = String::from("#");
                while let Some(d) = chars.peek().copied() {
                    if d.is_ascii_digit() {
                        issue.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                words.push(issue);
            }
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

/// Keywords (whole-word, case-insensitive) and `#<digits>` references that
/// mark `message` as a fix; empty when it is not one.
#[must_use]
pub fn match_fix_message(message: &str, keywords: &[String]) -> Vec<String> {
    let keyset: HashSet<&str> = keywords.iter().map(String::as_str).collect();
    let mut matched = Vec::new();
    for word in message_words(message) {
        let hit = word.starts_with('#') || keyset.contains(word.as_str());
        if hit && !matched.contains(&word) {
            matched.push(word);
        }
    }
    matched
}

/// Non-merge commits whose messages mark them as fixes.
#[must_use]
pub fn identify_fix_commits(history: &ProjectHistory, opts: &LabelOptions) -> Vec<FixCommit> {
    history
        .commits
        .iter()
        .filter(|c| !c.is_merge())
        .filter_map(|c| {
            let matched = match_fix_message(&c.message, &opts.keywords);
            if matched.is_empty() {
                return None;
            }
            let fixed_files = c
                .changes
                .iter()
                .filter(|ch| is_traceable(ch, opts))
                .map(|ch| ch.canonical_id.clone())
                .collect();
            Some(FixCommit {
                hash: c.hash.clone(),
                matched_keywords: matched,
                fixed_files,
            })
        })
        .collect()
}

/// A change SZZ can follow: labeled-language file, not binary, with at
/// least one old-side line removed or replaced.
fn is_traceable(ch: &FileChange, opts: &LabelOptions) -> bool {
    !ch.binary
        && ch.deleted > 0
        && ch.kind != ChangeKind::Add
        && has_extension(blame_path(ch), &opts.extensions)
}

/// Path of the change's file as it existed at the fix's parent.
fn blame_path(ch: &FileChange) -> &str {
    ch.old_path.as_deref().unwrap_or(&ch.path)
}

// ---------------------------------------------------------------------------
// SZZ trace

pub struct TraceOutcome {
    pub labels: Vec<InducingLabel>,
    pub warnings: Vec<String>,
}

/// Traces one fix commit to its inducing labels.
pub fn szz_trace(
    fix: &Commit,
    history: &ProjectHistory,
    provider: &dyn BlameProvider,
    opts: &LabelOptions,
) -> Result<TraceOutcome> {
    let mut warnings = Vec::new();
    let Some(parent) = fix.parents.first() else {
        return Ok(TraceOutcome {
            labels: Vec::new(),
            warnings: vec![format!(
                "fix {} has no parent; nothing to blame",
                fix.hash
            )],
        });
    };

    let by_hash: HashMap<&str, &Commit> = history
        .commits
        .iter()
        .map(|c| (c.hash.as_str(), c))
        .collect();

    // BTreeMap keeps label output order stable
    let mut evidence: BTreeMap<(String, String), u64> = BTreeMap::new();
    for ch in &fix.changes {
        if !is_traceable(ch, opts) {
            continue;
        }
        let path = blame_path(ch);
        let deleted = provider.deleted_lines(parent, &fix.hash, path, &ch.path)?;
        let kept: Vec<DeletedLine> = deleted
            .into_iter()
            .filter(|l| !opts.line_filter || l.kind == LineKind::Code)
            .collect();
        if kept.is_empty() {
            continue;
        }
        let blame = provider.blame(parent, path)?;
        let by_line: HashMap<u32, &str> = blame
            .iter()
            .map(|r| (r.line_number, r.origin_hash.as_str()))
            .collect();
        for line in kept {
            let Some(origin) = by_line.get(&line.number) else {
                return Err(Error::Labeling {
                    fix: fix.hash.clone(),
                    path: path.to_string(),
                    msg: format!("blame has no entry for line {}", line.number),
                });
            };
            match by_hash.get(origin) {
                Some(inducing) if inducing.timestamp <= fix.timestamp => {
                    *evidence
                        .entry((origin.to_string(), ch.canonical_id.clone()))
                        .or_insert(0) += 1;
                }
                Some(_) => warnings.push(format!(
                    "dropped label {origin}->{}: inducing commit is dated after the fix",
                    fix.hash
                )),
                None => warnings.push(format!(
                    "dropped label {origin}->{}: origin commit not in history",
                    fix.hash
                )),
            }
        }
    }

    let labels = evidence
        .into_iter()
        .map(|((inducing_hash, canonical_id), line_evidence)| InducingLabel {
            inducing_hash,
            canonical_id,
            fix_hash: fix.hash.clone(),
            line_evidence,
        })
        .collect();
    Ok(TraceOutcome { labels, warnings })
}

/// Full labeling pass: identify fixes, trace each, pool the labels.
pub fn label_history(
    history: &ProjectHistory,
    provider: &dyn BlameProvider,
    opts: &LabelOptions,
) -> Result<(Vec<FixCommit>, Vec<InducingLabel>, Vec<String>)> {
    let fixes = identify_fix_commits(history, opts);
    let by_hash: HashMap<&str, &Commit> = history
        .commits
        .iter()
        .map(|c| (c.hash.as_str(), c))
        .collect();
    let mut labels = Vec::new();
    let mut warnings = Vec::new();
    for fix in &fixes {
        let commit = by_hash
            .get(fix.hash.as_str())
            .expect("fix hashes come from the history");
        let outcome = szz_trace(commit, history, provider, opts)?;
        labels.extend(outcome.labels);
        warnings.extend(outcome.warnings);
    }
    Ok((fixes, labels, warnings))
}

// ---------------------------------------------------------------------------
// Defect assignment for dataset rows

/// (canonical_id, inducing commit hash) pairs that are defective at the
/// change level.
#[must_use]
pub fn jit_defective_set(labels: &[InducingLabel]) -> HashSet<(String, String)> {
    labels
        .iter()
        .map(|l| (l.canonical_id.clone(), l.inducing_hash.clone()))
        .collect()
}

/// (canonical_id, release index) pairs that are defective at the release
/// level: a file is defective in every release containing one of its
/// inducing commits. Requires releases to be assigned.
#[must_use]
pub fn release_defective_set(
    labels: &[InducingLabel],
    history: &ProjectHistory,
) -> HashSet<(String, u32)> {
    let release_by_hash: HashMap<&str, u32> = history
        .commits
        .iter()
        .enumerate()
        .map(|(i, c)| (c.hash.as_str(), history.release_of(i)))
        .collect();
    labels
        .iter()
        .filter_map(|l| {
            release_by_hash
                .get(l.inducing_hash.as_str())
                .filter(|r| **r > 0)
                .map(|r| (l.canonical_id.clone(), *r))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Live provider over a git checkout

pub struct GitBlameProvider {
    git: Git,
}

impl GitBlameProvider {
    #[must_use]
    pub fn new(git: Git) -> Self {
        GitBlameProvider { git }
    }
}

impl BlameProvider for GitBlameProvider {
    fn blame(&self, commit: &str, path: &str) -> Result<Vec<BlameRecord>> {
        let raw = self
            .git
            .blame_porcelain(commit, path)
            .map_err(|e| Error::Labeling {
                fix: commit.to_string(),
                path: path.to_string(),
                msg: e.to_string(),
            })?;
        Ok(parse_blame_porcelain(&raw, commit, path))
    }

    fn deleted_lines(
        &self,
        parent: &str,
        fix: &str,
        old_path: &str,
        new_path: &str,
    ) -> Result<Vec<DeletedLine>> {
        let paths = if old_path == new_path {
            vec![old_path]
        } else {
            vec![old_path, new_path]
        };
        let diff = self.git.diff_u0(parent, fix, &paths)?;
        let numbers = old_side_lines(&diff, old_path);
        if numbers.is_empty() {
            return Ok(Vec::new());
        }
        let text = snapshot(&self.git, parent, old_path)?;
        let kinds = classify_lines(&text);
        Ok(numbers
            .into_iter()
            .map(|n| DeletedLine {
                number: n,
                kind: kinds
                    .get(n as usize - 1)
                    .copied()
                    .unwrap_or(LineKind::Code),
            })
            .collect())
    }
}

/// Pulls (final line -> origin) pairs out of porcelain blame output.
/// Header lines are `<40-hex> <orig line> <final line> [<group size>]`.
fn parse_blame_porcelain(raw: &str, at_commit: &str, path: &str) -> Vec<BlameRecord> {
    let mut records = Vec::new();
    for line in raw.lines() {
        let mut parts = line.split(' ');
        let (Some(hash), Some(_orig), Some(final_line)) =
            (parts.next(), parts.next(), parts.next())
        else {
            continue;
        };
        if hash.len() != 40 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            continue;
        }
        let Ok(number) = final_line.parse::<u32>() else {
            continue;
        };
        records.push(BlameRecord {
            file: path.to_string(),
            at_commit: at_commit.to_string(),
            line_number: number,
            origin_hash: hash.to_string(),
            deleted_in: None,
            kind: None,
        });
    }
    records
}

/// Old-side line numbers removed by the diff, taken from `@@ -a,b +c,d @@`
/// hunk headers of the file's section.
fn old_side_lines(diff: &str, old_path: &str) -> Vec<u32> {
    let mut lines = Vec::new();
    let mut in_target = false;
    for line in diff.lines() {
        if let Some(rest) = line.strip_prefix("--- ") {
            let shown = rest.strip_prefix("a/").unwrap_or(rest);
            in_target = shown == old_path;
            continue;
        }
        if !in_target || !line.starts_with("@@") {
            continue;
        }
        let Some(old_part) = line.split(' ').nth(1) else {
            continue;
        };
        let old_part = old_part.trim_start_matches('-');
        let (start, count) = match old_part.split_once(',') {
            Some((s, c)) => (s.parse::<u32>(), c.parse::<u32>()),
            None => (old_part.parse::<u32>(), Ok(1)),
        };
        if let (Ok(start), Ok(count)) = (start, count) {
            for n in start..start + count {
                lines.push(n);
            }
        }
    }
    lines
}

// ---------------------------------------------------------------------------
// Offline provider over a blame dump (JSON lines of BlameRecord)

pub struct DumpBlameProvider {
    by_file: HashMap<(String, String), Vec<BlameRecord>>,
}

impl DumpBlameProvider {
    pub fn from_reader<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut by_file: HashMap<(String, String), Vec<BlameRecord>> = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: BlameRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
            by_file
                .entry((rec.at_commit.clone(), rec.file.clone()))
                .or_default()
                .push(rec);
        }
        Ok(DumpBlameProvider { by_file })
    }
}

impl BlameProvider for DumpBlameProvider {
    fn blame(&self, commit: &str, path: &str) -> Result<Vec<BlameRecord>> {
        self.by_file
            .get(&(commit.to_string(), path.to_string()))
            .cloned()
            .ok_or_else(|| Error::Labeling {
                fix: commit.to_string(),
                path: path.to_string(),
                msg: "no blame records in dump".into(),
            })
    }

    fn deleted_lines(
        &self,
        parent: &str,
        fix: &str,
        path: &str,
        _new_path: &str,
    ) -> Result<Vec<DeletedLine>> {
        let records = self.blame(parent, path)?;
        Ok(records
            .iter()
            .filter(|r| r.deleted_in.as_deref() == Some(fix))
            .map(|r| DeletedLine {
                number: r.line_number,
                kind: match r.kind.as_deref() {
                    Some("comment") => LineKind::Comment,
                    Some("blank") => LineKind::Blank,
                    _ => LineKind::Code,
                },
            })
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Labels CSV

pub fn write_labels_csv<W: Write>(labels: &[InducingLabel], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["inducing_hash", "canonical_id", "fix_hash", "line_evidence"])?;
    for l in labels {
        wtr.write_record([
            l.inducing_hash.as_str(),
            l.canonical_id.as_str(),
            l.fix_hash.as_str(),
            &l.line_evidence.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_labels_csv<R: Read>(reader: R, source_name: &str) -> Result<Vec<InducingLabel>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let head = rdr.headers()?;
        let expect = ["inducing_hash", "canonical_id", "fix_hash", "line_evidence"];
        if head.iter().ne(expect) {
            return Err(Error::parse(
                source_name,
                1,
                format!("expected header {expect:?}"),
            ));
        }
    }
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 4 {
            return Err(Error::parse(source_name, line, "expected 4 columns"));
        }
        let evidence: u64 = rec[3]
            .parse()
            .map_err(|_| Error::parse(source_name, line, "bad line_evidence"))?;
        labels.push(InducingLabel {
            inducing_hash: rec[0].to_string(),
            canonical_id: rec[1].to_string(),
            fix_hash: rec[2].to_string(),
            line_evidence: evidence,
        });
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repo_mining::Release;

    fn opts() -> LabelOptions {
        LabelOptions::default()
    }

    #[test]
    fn keyword_matching_is_whole_word_and_case_insensitive() {
        let kw = opts().keywords;
        assert_eq!(match_fix_message("Fix NPE in parser", &kw), vec!["fix"]);
        assert!(match_fix_message("prefix handling refactor", &kw).is_empty());
        assert_eq!(match_fix_message("closes #42: null check", &kw), vec!["#42"]);
        assert_eq!(
            match_fix_message("Fixed the bug, fixes everything", &kw),
            vec!["fixed", "bug", "fixes"]
        );
        assert!(match_fix_message("bugfix roundup", &kw).is_empty());
    }

    #[test]
    fn adding_keywords_never_removes_matches() {
        let base = opts().keywords;
        let mut extended = base.clone();
        extended.push("oops".into());
        for msg in ["fix it", "an oops moment", "nothing here", "closes #7"] {
            let a = match_fix_message(msg, &base);
            let b = match_fix_message(msg, &extended);
            for m in &a {
                assert!(b.contains(m), "{msg:?} lost match {m}");
            }
        }
    }

    // -- mock provider ------------------------------------------------------

    struct MockProvider {
        blames: HashMap<(String, String), Vec<(u32, &'static str)>>,
        deleted: HashMap<(String, String), Vec<DeletedLine>>,
    }

    impl MockProvider {
        fn new() -> Self {
            MockProvider {
                blames: HashMap::new(),
                deleted: HashMap::new(),
            }
        }

        fn with_blame(mut self, commit: &str, path: &str, lines: &[(u32, &'static str)]) -> Self {
            self.blames
                .insert((commit.into(), path.into()), lines.to_vec());
            self
        }

        fn with_deleted(mut self, fix: &str, path: &str, lines: &[DeletedLine]) -> Self {
            self.deleted.insert((fix.into(), path.into()), lines.to_vec());
            self
        }
    }

    impl BlameProvider for MockProvider {
        fn blame(&self, commit: &str, path: &str) -> Result<Vec<BlameRecord>> {
            let lines = self
                .blames
                .get(&(commit.to_string(), path.to_string()))
                .cloned()
                .unwrap_or_default();
            Ok(lines
                .into_iter()
                .map(|(n, origin)| BlameRecord {
                    file: path.to_string(),
                    at_commit: commit.to_string(),
                    line_number: n,
                    origin_hash: origin.to_string(),
                    deleted_in: None,
                    kind: None,
                })
                .collect())
        }

        fn deleted_lines(
            &self,
            _parent: &str,
            fix: &str,
            path: &str,
            _new_path: &str,
        ) -> Result<Vec<DeletedLine>> {
            Ok(self
                .deleted
                .get(&(fix.to_string(), path.to_string()))
                .cloned()
                .unwrap_or_default())
        }
    }

    fn mk_commit(hash: &str, parents: &[&str], ts: i64, msg: &str, changes: Vec<FileChange>) -> Commit {
        Commit {
            hash: hash.into(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            author: "dev@example.com".into(),
            timestamp: ts,
            message: msg.into(),
            changes,
        }
    }

    fn modify(path: &str, added: u64, deleted: u64) -> FileChange {
        FileChange {
            path: path.into(),
            old_path: None,
            added,
            deleted,
            kind: ChangeKind::Modify,
            binary: false,
            canonical_id: String::new(),
        }
    }

    fn add(path: &str, added: u64) -> FileChange {
        FileChange {
            path: path.into(),
            old_path: None,
            added,
            deleted: 0,
            kind: ChangeKind::Add,
            binary: false,
            canonical_id: String::new(),
        }
    }

    fn code(n: u32) -> DeletedLine {
        DeletedLine {
            number: n,
            kind: LineKind::Code,
        }
    }

    fn history_of(commits: Vec<Commit>) -> ProjectHistory {
        ProjectHistory::from_commits(commits)
    }

    #[test]
    fn single_deleted_line_yields_one_label() {
        let hist = history_of(vec![
            mk_commit("aaa", &[], 10, "seed", vec![add("X.java", 3)]),
            mk_commit("bbb", &["aaa"], 20, "grow", vec![modify("X.java", 1, 0)]),
            mk_commit("ccc", &["bbb"], 30, "fix the thing", vec![modify("X.java", 1, 1)]),
        ]);
        let provider = MockProvider::new()
            .with_blame("bbb", "X.java", &[(1, "aaa"), (2, "aaa"), (3, "aaa"), (4, "bbb")])
            .with_deleted("ccc", "X.java", &[code(2)]);
        let fix = hist.commits.iter().find(|c| c.hash == "ccc").unwrap();
        let out = szz_trace(fix, &hist, &provider, &opts()).unwrap();
        assert_eq!(
            out.labels,
            vec![InducingLabel {
                inducing_hash: "aaa".into(),
                canonical_id: "X.java".into(),
                fix_hash: "ccc".into(),
                line_evidence: 1,
            }]
        );
    }

    #[test]
    fn pure_addition_fix_yields_no_labels() {
        let hist = history_of(vec![
            mk_commit("aaa", &[], 10, "seed", vec![add("X.java", 3)]),
            mk_commit("ccc", &["aaa"], 30, "fix by adding a guard", vec![modify("X.java", 2, 0)]),
        ]);
        let provider = MockProvider::new().with_blame("aaa", "X.java", &[(1, "aaa")]);
        let fix = hist.commits.iter().find(|c| c.hash == "ccc").unwrap();
        let out = szz_trace(fix, &hist, &provider, &opts()).unwrap();
        assert!(out.labels.is_empty());
    }

    #[test]
    fn evidence_aggregates_per_origin() {
        let hist = history_of(vec![
            mk_commit("aaa", &[], 10, "seed", vec![add("X.java", 5)]),
            mk_commit("bbb", &["aaa"], 20, "grow", vec![modify("X.java", 2, 0)]),
            mk_commit("ccc", &["bbb"], 30, "fix overlap", vec![modify("X.java", 0, 3)]),
        ]);
        let provider = MockProvider::new()
            .with_blame(
                "bbb",
                "X.java",
                &[(1, "aaa"), (2, "aaa"), (3, "aaa"), (4, "bbb"), (5, "bbb")],
            )
            .with_deleted("ccc", "X.java", &[code(1), code(3), code(4)]);
        let fix = hist.commits.iter().find(|c| c.hash == "ccc").unwrap();
        let mut labels = szz_trace(fix, &hist, &provider, &opts()).unwrap().labels;
        labels.sort_by(|a, b| a.inducing_hash.cmp(&b.inducing_hash));
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[0].inducing_hash, "aaa");
        assert_eq!(labels[0].line_evidence, 2);
        assert_eq!(labels[1].inducing_hash, "bbb");
        assert_eq!(labels[1].line_evidence, 1);
    }

    #[test]
    fn line_filter_skips_blank_and_comment_lines() {
        let hist = history_of(vec![
            mk_commit("aaa", &[], 10, "seed", vec![add("X.java", 4)]),
            mk_commit("ccc", &["aaa"], 30, "fix spacing", vec![modify("X.java", 0, 3)]),
        ]);
        let deleted = [
            DeletedLine { number: 1, kind: LineKind::Comment },
            DeletedLine { number: 2, kind: LineKind::Blank },
            DeletedLine { number: 3, kind: LineKind::Code },
        ];
        let provider = MockProvider::new()
            .with_blame("aaa", "X.java", &[(1, "aaa"), (2, "aaa"), (3, "aaa"), (4, "aaa")])
            .with_deleted("ccc", "X.java", &deleted);
        let fix = hist.commits.iter().find(|c| c.hash == "ccc").unwrap();

        let filtered = szz_trace(fix, &hist, &provider, &opts()).unwrap().labels;
        assert_eq!(filtered.len(), 1);
        assert_eq!(filtered[0].line_evidence, 1);

        let mut raw_opts = opts();
        raw_opts.line_filter = false;
        let raw = szz_trace(fix, &hist, &provider, &raw_opts).unwrap().labels;
        assert_eq!(raw[0].line_evidence, 3);
    }

    #[test]
    fn root_fix_is_skipped_with_warning() {
        let hist = history_of(vec![mk_commit(
            "aaa",
            &[],
            10,
            "fix everything at the start",
            vec![modify("X.java", 1, 1)],
        )]);
        let provider = MockProvider::new();
        let fix = &hist.commits[0];
        let out = szz_trace(fix, &hist, &provider, &opts()).unwrap();
        assert!(out.labels.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn non_java_and_added_files_are_not_traced() {
        let hist = history_of(vec![
            mk_commit("aaa", &[], 10, "seed", vec![add("notes.txt", 3), add("X.java", 3)]),
            mk_commit(
                "ccc",
                &["aaa"],
                30,
                "fix docs and code",
                vec![modify("notes.txt", 1, 1), add("New.java", 5)],
            ),
        ]);
        let provider = MockProvider::new();
        let fix = hist.commits.iter().find(|c| c.hash == "ccc").unwrap();
        let out = szz_trace(fix, &hist, &provider, &opts()).unwrap();
        assert!(out.labels.is_empty());
    }

    #[test]
    fn label_rows_at_jit_and_release_levels() {
        let mut hist = history_of(vec![
            mk_commit("aaa", &[], 10, "seed", vec![add("X.java", 3)]),
            mk_commit("bbb", &["aaa"], 120, "grow", vec![modify("X.java", 1, 0)]),
            mk_commit("ccc", &["bbb"], 260, "fix it", vec![modify("X.java", 1, 1)]),
        ]);
        hist.assign_releases(vec![
            Release { tag: "r1".into(), date: 100, index: 1 },
            Release { tag: "r2".into(), date: 200, index: 2 },
            Release { tag: "r3".into(), date: 300, index: 3 },
        ])
        .unwrap();
        let labels = vec![InducingLabel {
            inducing_hash: "bbb".into(),
            canonical_id: "X.java".into(),
            fix_hash: "ccc".into(),
            line_evidence: 1,
        }];
        let jit = jit_defective_set(&labels);
        assert!(jit.contains(&("X.java".into(), "bbb".into())));
        assert!(!jit.contains(&("X.java".into(), "aaa".into())));

        // bbb sits in release 2: rows {r1 clean, r2 defective, r3 clean}
        let rel = release_defective_set(&labels, &hist);
        assert!(!rel.contains(&("X.java".into(), 1)));
        assert!(rel.contains(&("X.java".into(), 2)));
        assert!(!rel.contains(&("X.java".into(), 3)));
    }

    #[test]
    fn labels_csv_round_trips() {
        let labels = vec![InducingLabel {
            inducing_hash: "aa".into(),
            canonical_id: "f.java".into(),
            fix_hash: "cc".into(),
            line_evidence: 3,
        }];
        let mut buf = Vec::new();
        write_labels_csv(&labels, &mut buf).unwrap();
        let back = read_labels_csv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, labels);
    }

    #[test]
    fn dump_provider_answers_both_queries() {
        let dump = concat!(
            "{\"file\":\"X.java\",\"at_commit\":\"p\",\"line_number\":1,\"origin_hash\":\"aaa\"}\n",
            "{\"file\":\"X.java\",\"at_commit\":\"p\",\"line_number\":2,\"origin_hash\":\"bbb\",\"deleted_in\":\"fix\",\"kind\":\"comment\"}\n",
            "{\"file\":\"X.java\",\"at_commit\":\"p\",\"line_number\":3,\"origin_hash\":\"bbb\",\"deleted_in\":\"fix\"}\n",
        );
        let provider = DumpBlameProvider::from_reader(dump.as_bytes(), "mem").unwrap();
        let blame = provider.blame("p", "X.java").unwrap();
        assert_eq!(blame.len(), 3);
        let deleted = provider.deleted_lines("p", "fix", "X.java", "X.java").unwrap();
        assert_eq!(deleted.len(), 2);
        assert_eq!(deleted[0].kind, LineKind::Comment);
        assert_eq!(deleted[1].kind, LineKind::Code);
    }

    #[test]
    fn old_side_lines_parses_hunks() {
        let diff = "\
diff --git a/X.java b/X.java
index 111..222 100644
--- a/X.java
+++ b/X.java
@@ -2 +2 @@ context
-old line
+new line
@@ -5,2 +5,0 @@ context
-gone one
-gone two
@@ -9,0 +8,1 @@ context
+pure insertion
";
        assert_eq!(old_side_lines(diff, "X.java"), vec![2, 5, 6]);
        assert!(old_side_lines(diff, "Y.java").is_empty());
    }
}

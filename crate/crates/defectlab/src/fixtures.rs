//! Scripted fixture repositories with pinned authors, dates and edits.
//!
//! Every builder produces the same commit hashes on every run (content,
//! parents, identities and both date fields are fixed), which keeps the
//! end-to-end tests and the determinism checks honest. Tests locate
//! commits through [`BuiltRepo::hash`] by message rather than hardcoding
//! hashes.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gitio::Git;
use crate::repo_mining::Release;

pub struct BuiltRepo {
    pub git: Git,
    /// commit message -> hash, in no particular order
    pub by_message: HashMap<String, String>,
}

impl BuiltRepo {
    /// Hash of the commit whose message starts with `prefix`.
    pub fn hash(&self, prefix: &str) -> Result<&str> {
        self.by_message
            .iter()
            .find(|(m, _)| m.starts_with(prefix))
            .map(|(_, h)| h.as_str())
            .ok_or_else(|| Error::Config(format!("no fixture commit with message {prefix:?}")))
    }
}

struct RepoBuilder {
    git: Git,
    by_message: HashMap<String, String>,
}

impl RepoBuilder {
    fn new(dir: &Path) -> Result<Self> {
        Ok(RepoBuilder {
            git: Git::init(dir)?,
            by_message: HashMap::new(),
        })
    }

    fn write(&self, path: &str, lines: &[String]) -> Result<()> {
        let full = self.git.workdir().join(path);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut body = lines.join("\n");
        body.push('\n');
        std::fs::write(full, body)?;
        Ok(())
    }

    fn rename(&self, old: &str, new: &str) -> Result<()> {
        let to = self.git.workdir().join(new);
        if let Some(parent) = to.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::rename(self.git.workdir().join(old), to)?;
        Ok(())
    }

    fn commit(&mut self, name: &str, email: &str, ts: i64, msg: &str) -> Result<String> {
        self.git.run(["add", "-A"])?;
        let date = format!("{ts} +0000");
        self.git.run_with_env(
            ["commit", "-q", "--allow-empty", "-m", msg],
            [
                ("GIT_AUTHOR_NAME", name),
                ("GIT_AUTHOR_EMAIL", email),
                ("GIT_AUTHOR_DATE", date.as_str()),
                ("GIT_COMMITTER_NAME", name),
                ("GIT_COMMITTER_EMAIL", email),
                ("GIT_COMMITTER_DATE", date.as_str()),
            ],
        )?;
        let hash = self.git.run_str(["rev-parse", "HEAD"])?.trim().to_string();
        self.by_message.insert(msg.to_string(), hash.clone());
        Ok(hash)
    }

    fn merge(&mut self, branch: &str, name: &str, email: &str, ts: i64, msg: &str) -> Result<String> {
        let date = format!("{ts} +0000");
        self.git.run_with_env(
            ["merge", "--no-ff", "-q", "-m", msg, branch],
            [
                ("GIT_AUTHOR_NAME", name),
                ("GIT_AUTHOR_EMAIL", email),
                ("GIT_AUTHOR_DATE", date.as_str()),
                ("GIT_COMMITTER_NAME", name),
                ("GIT_COMMITTER_EMAIL", email),
                ("GIT_COMMITTER_DATE", date.as_str()),
            ],
        )?;
        let hash = self.git.run_str(["rev-parse", "HEAD"])?.trim().to_string();
        self.by_message.insert(msg.to_string(), hash.clone());
        Ok(hash)
    }

    fn done(self) -> BuiltRepo {
        BuiltRepo {
            git: self.git,
            by_message: self.by_message,
        }
    }
}

fn lines(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

const DAY: i64 = 86_400;

// ---------------------------------------------------------------------------
// 1. Basic three-commit repo (known edit counts, one rename)

/// Three commits: create `src/A.java` (3 lines), edit it (+2/-1), rename it
/// to `src/B.java` while adding a text file.
pub fn build_basic_repo(dir: &Path) -> Result<BuiltRepo> {
    let t0 = 1_609_459_200; // 2021-01-01
    let mut b = RepoBuilder::new(dir)?;

    b.write(
        "src/A.java",
        &lines(&["public class A {", "    int x = 1;", "}"]),
    )?;
    b.commit("Ann", "ann@example.com", t0, "create module a")?;

    b.write(
        "src/A.java",
        &lines(&[
            "public class A {",
            "    int x = 2;",
            "    int y = 3;",
            "    int z = 4;",
            "}",
        ]),
    )?;
    b.commit("Ann", "ann@example.com", t0 + DAY, "grow module a")?;

    b.rename("src/A.java", "src/B.java")?;
    b.write("docs/notes.txt", &lines(&["design notes"]))?;
    b.commit("Ben", "ben@example.com", t0 + 2 * DAY, "move module a aside")?;

    Ok(b.done())
}

// ---------------------------------------------------------------------------
// 2. Merge repo (one two-parent commit)

pub fn build_merge_repo(dir: &Path) -> Result<BuiltRepo> {
    let t0 = 1_612_137_600; // 2021-02-01
    let mut b = RepoBuilder::new(dir)?;

    b.write("base.java", &lines(&["class Base {}"]))?;
    b.commit("Ann", "ann@example.com", t0, "lay the base")?;

    b.git.run(["checkout", "-q", "-b", "feature"])?;
    b.write("feat.java", &lines(&["class Feat {}"]))?;
    b.commit("Ben", "ben@example.com", t0 + DAY, "sketch the feature")?;

    b.git.run(["checkout", "-q", "main"])?;
    b.write("main.java", &lines(&["class MainLine {}"]))?;
    b.commit("Ann", "ann@example.com", t0 + 2 * DAY, "extend the main line")?;

    b.merge("feature", "Ann", "ann@example.com", t0 + 3 * DAY, "bring in the feature")?;

    Ok(b.done())
}

// ---------------------------------------------------------------------------
// 3. Defect-labeling repo: 12 commits, one planted defect, one fix

/// The planted defect enters in "introduce subtraction support" (a wrong
/// operator). The fix deletes that line plus a blank line and a pure
/// comment line added later by someone else; line filtering must keep the
/// comment author from being blamed. The calculator file is also renamed
/// between defect and fix, so blame has to follow the rename.
pub fn build_szz_repo(dir: &Path) -> Result<BuiltRepo> {
    let t0 = 1_609_459_200; // 2021-01-01
    let carol = ("Carol", "carol@example.com");
    let dave = ("Dave", "dave@example.com");
    let mut b = RepoBuilder::new(dir)?;
    let at = |i: i64| t0 + i * DAY;

    b.write("README.md", &lines(&["# calcproj", "", "usage notes"]))?;
    b.commit(carol.0, carol.1, at(1), "add project readme")?;

    b.write(
        "Calc.java",
        &lines(&[
            "// calculator core",
            "public class Calc {",
            "    public int add(int a, int b) {",
            "        return a + b;",
            "    }",
            "    public int mul(int a, int b) {",
            "        return a * b;",
            "    }",
            "    // end of arithmetic",
            "}",
        ]),
    )?;
    b.commit(carol.0, carol.1, at(2), "introduce calculator module")?;

    b.write(
        "Calc.java",
        &lines(&[
            "// calculator core",
            "public class Calc {",
            "    public int add(int a, int b) {",
            "        return a + b;",
            "    }",
            "    public int mul(int a, int b) {",
            "        return a * b;",
            "    }",
            "    public int sub(int a, int b) {",
            "        return a + b;",
            "    }",
            "    // end of arithmetic",
            "}",
        ]),
    )?;
    b.commit(dave.0, dave.1, at(3), "introduce subtraction support")?;

    b.write(
        "Util.java",
        &lines(&[
            "public class Util {",
            "    public static int clamp(int v, int lo, int hi) {",
            "        return Math.max(lo, Math.min(hi, v));",
            "    }",
            "    // helpers end",
            "}",
        ]),
    )?;
    b.commit(carol.0, carol.1, at(4), "add utility helpers")?;

    b.rename("Calc.java", "Calculator.java")?;
    b.write(
        "Calculator.java",
        &lines(&[
            "// calculator core",
            "public class Calculator {",
            "    public int add(int a, int b) {",
            "        return a + b;",
            "    }",
            "    public int mul(int a, int b) {",
            "        return a * b;",
            "    }",
            "    public int sub(int a, int b) {",
            "        return a + b;",
            "    }",
            "    // end of arithmetic",
            "}",
        ]),
    )?;
    b.commit(carol.0, carol.1, at(5), "move calculator to clearer name")?;

    b.write(
        "Util.java",
        &lines(&[
            "public class Util {",
            "    public static int clamp(int v, int lo, int hi) {",
            "        return Math.min(hi, Math.max(lo, v));",
            "    }",
            "    // helpers end",
            "}",
        ]),
    )?;
    b.commit(dave.0, dave.1, at(6), "tune clamp boundaries")?;

    b.write(
        "Calculator.java",
        &lines(&[
            "// calculator core",
            "public class Calculator {",
            "    public int add(int a, int b) {",
            "        return a + b;",
            "    }",
            "    public int mul(int a, int b) {",
            "        return a * b;",
            "    }",
            "",
            "    // subtraction entry point",
            "    public int sub(int a, int b) {",
            "        return a + b;",
            "    }",
            "    // end of arithmetic",
            "}",
        ]),
    )?;
    b.commit(carol.0, carol.1, at(7), "document subtraction")?;

    b.write(
        "README.md",
        &lines(&["# calcproj", "", "usage notes", "", "see Calculator for the api"]),
    )?;
    b.commit(dave.0, dave.1, at(8), "expand readme")?;

    b.write(
        "Util.java",
        &lines(&[
            "public class Util {",
            "    public static int clamp(int v, int lo, int hi) {",
            "        return Math.min(hi, Math.max(lo, v));",
            "    }",
            "    public static int abs(int v) {",
            "        return v < 0 ? -v : v;",
            "    }",
            "    // helpers end",
            "}",
        ]),
    )?;
    b.commit(carol.0, carol.1, at(9), "add abs helper")?;

    b.write(
        "Calculator.java",
        &lines(&[
            "// calculator core",
            "public class Calculator {",
            "    public int add(int a, int b) {",
            "        return a + b;",
            "    }",
            "    public int mul(int a, int b) {",
            "        return a * b;",
            "    }",
            "    public int sub(int a, int b) {",
            "        return a - b;",
            "    }",
            "    // end of arithmetic",
            "}",
        ]),
    )?;
    b.commit(dave.0, dave.1, at(10), "fix #12: subtraction used wrong operator")?;

    b.write(
        "Util.java",
        &lines(&[
            "public class Util {",
            "    public static int clamp(int v, int lo, int hi) {",
            "        return Math.min(hi, Math.max(lo, v));",
            "    }",
            "    public static int abs(int v) {",
            "        return v < 0 ? -v : v;",
            "    }",
            "    public static int square(int v) {",
            "        return v * v;",
            "    }",
            "    // helpers end",
            "}",
        ]),
    )?;
    b.commit(carol.0, carol.1, at(11), "add square helper")?;

    b.write(
        "README.md",
        &lines(&[
            "# calcproj",
            "",
            "usage notes",
            "",
            "see Calculator for the api",
            "release steps live in the wiki",
        ]),
    )?;
    b.commit(dave.0, dave.1, at(12), "note release steps")?;

    Ok(b.done())
}

// ---------------------------------------------------------------------------
// 4. Change-metrics repo: 6 commits, 3 files, 2 authors, 2 releases

/// Edit counts here back the hand-computed metric table in the acceptance
/// suite; do not alter contents without re-deriving that table.
///
/// Timeline (10-day ticks from 2020-01-01, all UTC):
///   c1 alice  core/Main.java      +100
///   c2 bob    core/Util.java +20, core/Main.java +4/-2
///   c3 alice  core/Util.java +5/-5
///   c4 bob    app/App.java   +8,  core/Main.java +2/-1
///   c5 alice  app/App.java   +3/-2
///   c6 alice  core/Main.java +1/-1, app/App.java +2
/// Releases: r1 = 2020-02-01 (c1..c3), r2 = 2020-04-01 (c4..c6).
pub fn build_process_repo(dir: &Path) -> Result<BuiltRepo> {
    let alice = ("Alice", "alice@example.com");
    let bob = ("Bob", "bob@example.com");
    let mut b = RepoBuilder::new(dir)?;

    let m = |ids: &[u32]| -> Vec<String> {
        ids.iter().map(|i| format!("int m{i:04} = {i};")).collect()
    };
    let u = |ids: &[u32]| -> Vec<String> {
        ids.iter().map(|i| format!("int u{i:04} = {i};")).collect()
    };
    let a = |ids: &[u32]| -> Vec<String> {
        ids.iter().map(|i| format!("int a{i:04} = {i};")).collect()
    };
    let seq = |from: u32, to: u32| -> Vec<u32> { (from..=to).collect() };

    // c1: Main.java lines m1..m100
    b.write("core/Main.java", &m(&seq(1, 100)))?;
    b.commit(alice.0, alice.1, process_ts(0), "start the core")?;

    // c2: Util.java u1..u20; Main drops m3,m4 gains m101..m104
    let mut main_ids: Vec<u32> = seq(1, 100).into_iter().filter(|i| *i != 3 && *i != 4).collect();
    main_ids.extend(seq(101, 104));
    b.write("core/Util.java", &u(&seq(1, 20)))?;
    b.write("core/Main.java", &m(&main_ids))?;
    b.commit(bob.0, bob.1, process_ts(10), "add utilities and touch the core")?;

    // c3: Util drops u1..u5 gains u21..u25
    let util_ids: Vec<u32> = seq(6, 25);
    b.write("core/Util.java", &u(&util_ids))?;
    b.commit(alice.0, alice.1, process_ts(20), "rework utility internals")?;

    // c4: App.java a1..a8; Main drops m5 gains m105,m106
    let mut main_ids: Vec<u32> = main_ids.into_iter().filter(|i| *i != 5).collect();
    main_ids.extend([105, 106]);
    b.write("app/App.java", &a(&seq(1, 8)))?;
    b.write("core/Main.java", &m(&main_ids))?;
    b.commit(bob.0, bob.1, process_ts(40), "bring up the app layer")?;

    // c5: App drops a1,a2 gains a9..a11
    let mut app_ids: Vec<u32> = seq(3, 8);
    app_ids.extend(seq(9, 11));
    b.write("app/App.java", &a(&app_ids))?;
    b.commit(alice.0, alice.1, process_ts(60), "polish the app layer")?;

    // c6: Main drops m6 gains m107; App gains a12,a13
    let mut main_ids: Vec<u32> = main_ids.into_iter().filter(|i| *i != 6).collect();
    main_ids.push(107);
    app_ids.extend([12, 13]);
    b.write("core/Main.java", &m(&main_ids))?;
    b.write("app/App.java", &a(&app_ids))?;
    b.commit(alice.0, alice.1, process_ts(80), "final round of touches")?;

    Ok(b.done())
}

// ---------------------------------------------------------------------------
// 5. Pipeline repo (enough labeled defects for stratified 5x5 CV)

/// Around thirty commits over three Java files. Twelve commits each inject
/// one faulty line that a later "fix bug" commit removes, so labeling
/// yields twelve inducing pairs spread across files and authors, with two
/// tags (v1.0, v2.0) for a release schedule.
pub fn build_pipeline_repo(dir: &Path) -> Result<BuiltRepo> {
    let authors = [("Alice", "alice@example.com"), ("Bob", "bob@example.com")];
    let files = ["core/A.java", "core/B.java", "util/C.java"];
    let mut b = RepoBuilder::new(dir)?;
    let t = |days: i64| 1_609_459_200 + days * DAY; // 2021-01-01

    let base = |tag: &str| -> Vec<String> {
        (1..=8).map(|i| format!("int {tag}{i:02} = {i};")).collect()
    };
    let mut content: Vec<Vec<String>> = vec![base("a"), base("b"), base("c")];
    b.write(files[0], &content[0])?;
    b.write(files[1], &content[1])?;
    b.commit(authors[0].0, authors[0].1, t(0), "create core")?;
    b.write(files[2], &content[2])?;
    b.commit(authors[0].0, authors[0].1, t(1), "create util")?;

    // Interleaved inject/fix/refactor schedule, ordered by timestamp.
    #[derive(Clone, Copy)]
    enum Step {
        Inject(usize),
        Fix(usize),
        Refactor(usize),
    }
    let mut steps: Vec<(i64, Step)> = Vec::new();
    for i in 0..12usize {
        let day = 3 + 5 * i as i64;
        steps.push((day, Step::Inject(i)));
        steps.push((day + 8, Step::Fix(i)));
        if i % 3 == 1 {
            steps.push((day + 2, Step::Refactor(i)));
        }
    }
    steps.sort_by_key(|(day, _)| *day);

    for (day, step) in steps {
        match step {
            Step::Inject(i) => {
                let f = i % 3;
                let (name, email) = authors[i % 2];
                content[f].push(format!("int bug{i:02} = compute({i});"));
                b.write(files[f], &content[f])?;
                if i % 4 == 0 {
                    // Occasionally a second file rides along.
                    let g = (f + 1) % 3;
                    content[g].push(format!("int extra{i:02} = {i};"));
                    b.write(files[g], &content[g])?;
                }
                b.commit(name, email, t(day), &format!("add feature {i}"))?;
            }
            Step::Fix(i) => {
                let f = i % 3;
                let (name, email) = authors[(i + 1) % 2];
                let needle = format!("int bug{i:02} ");
                content[f].retain(|l| !l.starts_with(&needle));
                b.write(files[f], &content[f])?;
                b.commit(name, email, t(day), &format!("fix bug {i} in {}", files[f]))?;
            }
            Step::Refactor(i) => {
                let (name, email) = authors[i % 2];
                content[2][0] = format!("int c01 = {};", 100 + i);
                b.write(files[2], &content[2])?;
                b.commit(name, email, t(day), &format!("refactor {i}"))?;
            }
        }
    }
    let at = |b: &RepoBuilder, msg: &str| -> Result<String> {
        b.by_message
            .get(msg)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no commit {msg:?}")))
    };
    let v1 = at(&b, "add feature 5")?;
    let v2 = at(&b, "fix bug 11 in util/C.java")?;
    b.git.run(["tag", "v1.0", v1.as_str()])?;
    b.git.run(["tag", "v2.0", v2.as_str()])?;
    Ok(b.done())
}

/// 2020-01-01 plus `days`, unix seconds UTC.
#[must_use]
pub fn process_ts(days: i64) -> i64 {
    1_577_836_800 + days * DAY
}

/// Release schedule matching [`build_process_repo`].
#[must_use]
pub fn process_repo_releases() -> Vec<Release> {
    vec![
        Release {
            tag: "r1".into(),
            date: 1_580_515_200, // 2020-02-01
            index: 1,
        },
        Release {
            tag: "r2".into(),
            date: 1_585_699_200, // 2020-04-01
            index: 2,
        },
    ]
}

/// Writes all fixture repositories under `out`, plus the release CSV for
/// the change-metrics repo. Returns the created repo paths.
pub fn write_all(out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let basic = out.join("basic");
    let merge = out.join("merge");
    let szz = out.join("defect");
    let process = out.join("metrics");
    let pipeline = out.join("pipeline");
    build_basic_repo(&basic)?;
    build_merge_repo(&merge)?;
    build_szz_repo(&szz)?;
    build_process_repo(&process)?;
    build_pipeline_repo(&pipeline)?;
    let mut releases = String::from("tag,date\n");
    releases.push_str("r1,2020-02-01\n");
    releases.push_str("r2,2020-04-01\n");
    std::fs::write(out.join("metrics-releases.csv"), releases)?;
    Ok(vec![basic, merge, szz, process, pipeline])
}

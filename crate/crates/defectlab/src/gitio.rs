//! Thin subprocess wrapper around the `git` binary.
//!
//! Everything that talks to a real repository goes through [`Git`] so the
//! rest of the crate only sees strings and bytes. The binary can be
//! overridden with the `DEFECTLAB_GIT` environment variable.

use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::error::{Error, Result};

/// Environment variable naming the version-control binary to invoke.
pub const GIT_BIN_ENV: &str = "DEFECTLAB_GIT";

fn git_binary() -> PathBuf {
    std::env::var_os(GIT_BIN_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("git"))
}

/// Handle to one on-disk repository.
#[derive(Debug, Clone)]
pub struct Git {
    bin: PathBuf,
    repo: PathBuf,
}

impl Git {
    /// Opens an existing repository, verifying that `git rev-parse` accepts it.
    pub fn open(repo: impl Into<PathBuf>) -> Result<Self> {
        let git = Git {
            bin: git_binary(),
            repo: repo.into(),
        };
        git.run(["rev-parse", "--git-dir"])?;
        Ok(git)
    }

    /// Initialises a new repository at `repo` (used by fixture builders).
    pub fn init(repo: impl Into<PathBuf>) -> Result<Self> {
        let repo = repo.into();
        std::fs::create_dir_all(&repo)?;
        let git = Git {
            bin: git_binary(),
            repo,
        };
        git.run(["init", "-q", "-b", "main"])?;
        git.run(["config", "user.name", "fixture"])?;
        git.run(["config", "user.email", "fixture@example.com"])?;
        Ok(git)
    }

    #[must_use]
    pub fn workdir(&self) -> &Path {
        &self.repo
    }

    /// Runs git with `args`, returning stdout bytes. Non-zero exit becomes
    /// [`Error::Mining`] carrying stderr.
    pub fn run<I, S>(&self, args: I) -> Result<Vec<u8>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
    {
        self.run_with_env(args, std::iter::empty::<(&str, &str)>())
    }

    /// Like [`Git::run`] but with extra environment variables (fixture
    /// builders pin author/committer dates through these).
    pub fn run_with_env<I, S, E, K, V>(&self, args: I, envs: E) -> Result<Vec<u8>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
        E: IntoIterator<Item = (K, V)>,
        K: AsRef<OsStr>,
        V: AsRef<OsStr>,
    {
        let mut cmd = Command::new(&self.bin);
        cmd.arg("-C").arg(&self.repo).args(args).envs(envs);
        let out = cmd
            .output()
            .map_err(|e| Error::Mining(format!("failed to spawn {}: {e}", self.bin.display())))?;
        if !out.status.success() {
            return Err(Error::Mining(format!(
                "git exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(out.stdout)
    }

    /// Runs git and decodes stdout as UTF-8, replacing invalid sequences.
    pub fn run_str<I, S>(&self, args: I) -> Result<String>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
    {
        Ok(String::from_utf8_lossy(&self.run(args)?).into_owned())
    }

    /// True when the repository has at least one commit on HEAD.
    pub fn has_commits(&self) -> bool {
        self.run(["rev-parse", "--verify", "-q", "HEAD"]).is_ok()
    }

    /// Full history of HEAD with per-file counts and status letters,
    /// rename detection on. Records are delimited with control characters
    /// so commit messages cannot be confused with structure.
    pub fn log_numstat_raw(&self) -> Result<String> {
        self.run_str([
            "log",
            "--numstat",
            "--raw",
            "-M",
            "--no-color",
            "--date=raw",
            "--pretty=format:%x01%H%x02%P%x02%ae%x02%an%x02%at%x02%B%x03",
        ])
    }

    /// Blames `path` as of `commit` in porcelain format.
    pub fn blame_porcelain(&self, commit: &str, path: &str) -> Result<String> {
        self.run_str(["blame", "--porcelain", commit, "--", path])
    }

    /// Zero-context diff between two commits, limited to `paths`. Rename
    /// detection stays on so a renamed file diffs against its old self.
    pub fn diff_u0(&self, old: &str, new: &str, paths: &[&str]) -> Result<String> {
        let mut args = vec!["diff", "-U0", "-M", "--no-color", old, new, "--"];
        args.extend_from_slice(paths);
        self.run_str(args)
    }

    /// File contents at a commit.
    pub fn show_file(&self, commit: &str, path: &str) -> Result<Vec<u8>> {
        self.run([String::from("show"), format!("{commit}:{path}")])
            .map_err(|e| Error::Snapshot {
                commit: commit.to_string(),
                path: path.to_string(),
                msg: e.to_string(),
            })
    }

    /// Tags with their creation time (committer date for annotated tags),
    /// oldest first.
    pub fn tags(&self) -> Result<Vec<(String, i64)>> {
        let out = self.run_str([
            "for-each-ref",
            "--sort=creatordate",
            "--format=%(refname:short)\t%(creatordate:unix)",
            "refs/tags",
        ])?;
        out.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (name, date) = l.split_once('\t').ok_or_else(|| {
                    Error::Mining(format!("malformed tag line: {l:?}"))
                })?;
                let ts = date.trim().parse::<i64>().map_err(|_| {
                    Error::Mining(format!("bad tag timestamp in {l:?}"))
                })?;
                Ok((name.to_string(), ts))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_rejects_non_repo() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Git::open(dir.path()).is_err());
    }

    #[test]
    fn init_then_open_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        Git::init(dir.path()).unwrap();
        let git = Git::open(dir.path()).unwrap();
        assert!(git.run(["status", "--porcelain"]).is_ok());
    }

    #[test]
    fn run_reports_stderr_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let git = Git::init(dir.path()).unwrap();
        let err = git.run(["rev-parse", "no-such-ref"]).unwrap_err();
        assert!(matches!(err, Error::Mining(_)));
    }
}

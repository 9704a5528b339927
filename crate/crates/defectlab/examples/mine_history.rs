//! Mine a git repository into the JSON-lines history dump.
//!
//! Pass a repository path, or run bare to mine a generated fixture:
//!     cargo run --example mine_history -- /path/to/repo

use defectlab::gitio::Git;
use defectlab::repo_mining::{mine_repo, write_dump, ProjectHistory};

fn main() -> defectlab::Result<()> {
    let arg = std::env::args().nth(1);
    let _keep;
    let git = match &arg {
        Some(path) => Git::open(path)?,
        None => {
            let dir = tempfile::tempdir()?;
            let built = defectlab::fixtures::build_pipeline_repo(dir.path())?;
            _keep = dir;
            built.git
        }
    };

    let commits = mine_repo(&git)?;
    println!("{} commits mined from {}", commits.len(), git.workdir().display());

    let hist = ProjectHistory::from_commits(commits);
    let changes: usize = hist.commits.iter().map(|c| c.changes.len()).sum();
    let merges = hist.commits.iter().filter(|c| c.is_merge()).count();
    println!("{changes} file changes, {merges} merges");

    if let Some(c) = hist.commits.first() {
        println!("\noldest commit {}:", &c.hash[..10.min(c.hash.len())]);
        println!("  author    {}", c.author);
        println!("  message   {}", c.message.lines().next().unwrap_or(""));
        for ch in &c.changes {
            println!("  {:>6?} +{:<4} -{:<4} {}", ch.kind, ch.added, ch.deleted, ch.path);
        }
    }

    let mut buf = Vec::new();
    write_dump(&hist.commits, &mut buf)?;
    println!("\ndump is {} bytes of JSON lines; first record:", buf.len());
    let text = String::from_utf8_lossy(&buf);
    println!("{}", text.lines().next().unwrap_or(""));
    Ok(())
}

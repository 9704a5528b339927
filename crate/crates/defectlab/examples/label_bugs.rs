//! Trace fix commits back to the changes that introduced the defect.
//!
//! Builds the planted-defect fixture, finds the fix by its message
//! keywords, and blames each deleted line to its origin.

use defectlab::fixtures::build_szz_repo;
use defectlab::labeling::{label_history, GitBlameProvider, LabelOptions};
use defectlab::repo_mining::{mine_repo, ProjectHistory};

fn main() -> defectlab::Result<()> {
    let dir = tempfile::tempdir()?;
    let repo = build_szz_repo(dir.path())?;
    let hist = ProjectHistory::from_commits(mine_repo(&repo.git)?);
    println!("{} commits in the fixture", hist.commits.len());

    let expected = repo.hash("introduce subtraction support")?.to_string();
    let opts = LabelOptions::default();
    let provider = GitBlameProvider::new(repo.git);
    let (fixes, labels, warnings) = label_history(&hist, &provider, &opts)?;

    for fix in &fixes {
        println!(
            "fix {}: matched {:?}",
            &fix.hash[..10],
            fix.matched_keywords
        );
    }
    for label in &labels {
        println!(
            "inducing {} touched {} (evidence: {} deleted lines)",
            &label.inducing_hash[..10],
            label.canonical_id,
            label.line_evidence
        );
    }
    for w in &warnings {
        println!("warning: {w}");
    }

    assert_eq!(labels.len(), 1);
    assert!(labels[0].inducing_hash.starts_with(&expected));
    println!("\nthe one planted defect was recovered exactly");
    Ok(())
}

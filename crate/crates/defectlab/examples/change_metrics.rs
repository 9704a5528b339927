//! Compute the 21 change-history metrics on the hand-traceable fixture.

use std::collections::HashSet;

use defectlab::fixtures::{build_process_repo, process_repo_releases};
use defectlab::process_metrics::{compute_process_rows, ProcessOptions, PROCESS_METRICS};
use defectlab::repo_mining::{mine_repo, ProjectHistory};

fn main() -> defectlab::Result<()> {
    let dir = tempfile::tempdir()?;
    let repo = build_process_repo(dir.path())?;
    let mut hist = ProjectHistory::from_commits(mine_repo(&repo.git)?);
    hist.assign_releases(process_repo_releases())?;

    // No labels here; defectiveness is orthogonal to the metrics.
    let rows = compute_process_rows(&hist, &HashSet::new(), &ProcessOptions::default());
    println!(
        "{} rows over {} commits; metrics: {}",
        rows.len(),
        hist.commits.len(),
        PROCESS_METRICS.join(" ")
    );

    for row in &rows {
        println!("\n{} at {} (release {}):", row.file, &row.commit[..10], row.release);
        let named: Vec<String> = PROCESS_METRICS
            .iter()
            .zip(row.feature_values())
            .map(|(n, v)| format!("{n}={v:.3}"))
            .collect();
        for chunk in named.chunks(7) {
            println!("  {}", chunk.join("  "));
        }
    }
    Ok(())
}

//! The whole pipeline in one sitting: repository -> history dump -> defect
//! labels -> metric tables -> dataset -> cross-validated experiment.

use std::collections::HashSet;
use std::fs::File;

use defectlab::dataset::{assemble, write_dataset_csv, Granularity, Level, Mode};
use defectlab::experiments::run_experiment;
use defectlab::fixtures::build_pipeline_repo;
use defectlab::labeling::{self, GitBlameProvider, LabelOptions};
use defectlab::process_metrics::{compute_process_rows, ProcessOptions};
use defectlab::product_metrics::compute_for_history;
use defectlab::repo_mining::{mine_repo, ProjectHistory, Release};

fn main() -> defectlab::Result<()> {
    let tmp = tempfile::tempdir()?;
    let repo = build_pipeline_repo(&tmp.path().join("repo"))?;

    // 1. Mine and attach the release schedule from the repo's tags.
    let mut hist = ProjectHistory::from_commits(mine_repo(&repo.git)?);
    let releases: Vec<Release> = repo
        .git
        .tags()?
        .into_iter()
        .enumerate()
        .map(|(i, (tag, date))| Release { tag, date, index: i as u32 + 1 })
        .collect();
    hist.assign_releases(releases)?;
    println!("mined {} commits across {} releases", hist.commits.len(), 2);

    // 2. Label bug-inducing changes.
    let opts = LabelOptions::default();
    let provider = GitBlameProvider::new(defectlab::gitio::Git::open(repo.git.workdir())?);
    let (_, labels, _) = labeling::label_history(&hist, &provider, &opts)?;
    println!("{} inducing (file, commit) pairs", labels.len());

    // 3. Metric tables.
    let defective: HashSet<(String, String)> = labeling::jit_defective_set(&labels);
    let process = compute_process_rows(&hist, &defective, &ProcessOptions::default());
    let product = compute_for_history(&repo.git, &hist, &[".java".into()])?;
    println!("{} process rows, {} product rows", process.len(), product.len());

    // 4. One combined-mode dataset at change level.
    let (ds, report) = assemble(
        "pipeline",
        &process,
        Some(&product),
        Mode::Combined,
        Granularity::File,
        Level::Jit,
    )?;
    println!(
        "dataset: {} rows x {} features ({} dropped in join), {:.0}% defective",
        ds.len(),
        ds.n_features(),
        report.dropped_join,
        100.0 * ds.defect_ratio()
    );

    // 5. Cross-validated experiment over the one-project corpus.
    let work = tmp.path().join("exp");
    std::fs::create_dir_all(&work)?;
    write_dataset_csv(&ds, File::create(work.join("pipeline.csv"))?)?;
    std::fs::write(
        work.join("config.txt"),
        "projects = pipeline.csv\nmodes = P, P+C\nlearners = nb, rf\n\
         split = cv\nrepeats = 5\nfolds = 5\nseed = 17\n",
    )?;
    let out = work.join("out");
    let summary = run_experiment(&work.join("config.txt"), &[1, 2], &out)?;
    println!("computed stages: {:?}", summary.ran);

    let results = std::fs::read_to_string(out.join("rq1_results.csv"))?;
    println!("{} result rows; variance table:", results.lines().count() - 1);
    print!("{}", std::fs::read_to_string(out.join("rq2_variance.csv"))?);
    Ok(())
}

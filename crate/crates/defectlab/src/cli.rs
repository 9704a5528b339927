//! Command-line entry point: one subcommand per pipeline stage, with file
//! handoff between stages and no hidden state.
//!
//! Exit codes: 0 success, 1 validation problem (including usage errors),
//! 2 runtime failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::dataset::{self, Granularity, Level, Mode};
use crate::error::{Error, Result};
use crate::evaluation::{self, Measure, MEASURES};
use crate::experiments;
use crate::gitio::Git;
use crate::labeling::{self, GitBlameProvider, LabelOptions};
use crate::process_metrics::{self, ProcessOptions};
use crate::product_metrics;
use crate::repo_mining;
use crate::{fixtures, stats, synth};

#[derive(Parser)]
#[command(
    name = "defectlab",
    version,
    about = "Defect-prediction workbench: mine, label, measure, assemble, experiment, rank, report",
    propagate_version = true
)]
struct Cli {
    /// Base seed for stages that draw randomness directly (fixtures, rank).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Experiment config file (fallback for `experiment --config`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dump a git repository's full history as JSON lines
    Mine {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a releases CSV, or derive one from a repository's tags
    Releases {
        /// Releases CSV (header tag,date) to validate and normalize.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Repository whose tags become the release list.
        #[arg(long)]
        repo: Option<PathBuf>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label bug-inducing changes by tracing fixes back through blame
    Label {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fix-keyword list, one per line; defaults to the built-in set.
        #[arg(long)]
        keywords: Option<PathBuf>,
        /// Keep blank/comment-only deleted lines when tracing.
        #[arg(long)]
        no_line_filter: bool,
    },
    /// Compute metric tables from a history dump
    Metrics {
        #[command(subcommand)]
        which: MetricsCmd,
    },
    /// Join metric tables into a model-ready dataset CSV
    Assemble {
        #[arg(long)]
        process: PathBuf,
        #[arg(long)]
        product: Option<PathBuf>,
        /// P, C, or P+C.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        granularity: String,
        #[arg(long)]
        level: String,
        #[arg(long)]
        out: PathBuf,
        /// Project name; defaults to the process file's stem.
        #[arg(long)]
        project: Option<String>,
    },
    /// Run research questions over a corpus of dataset CSVs
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Which questions: "3", "1,2,5", or a range "1..8".
        #[arg(long, default_value = "1..8")]
        rq: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scott-Knott ranking of learner/mode groups from a results CSV
    Rank {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        measure: String,
        /// Whether larger or smaller values win: max | min.
        #[arg(long)]
        direction: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a results CSV (and optional rank CSV) as markdown
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        ranks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Materialize the test git repositories and synthetic corpora
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Change-history metrics, one row per (file, commit)
    Process {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional releases CSV; without it every row reports release 0.
        #[arg(long)]
        releases: Option<PathBuf>,
    },
    /// Static code metrics from file snapshots
    Product {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Merge rows from an external tool's CSV over the native ones.
        #[arg(long)]
        import: Option<PathBuf>,
    },
}

/// Parses argv and executes; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        // Ignore "already built": only the first call can win in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Mine { repo, out } => cmd_mine(&repo, &out),
        Cmd::Releases { file, repo, out } => cmd_releases(file.as_deref(), repo.as_deref(), out.as_deref()),
        Cmd::Label { history, repo, out, keywords, no_line_filter } => {
            cmd_label(&history, &repo, &out, keywords.as_deref(), no_line_filter)
        }
        Cmd::Metrics { which } => match which {
            MetricsCmd::Process { history, labels, out, releases } => {
                cmd_metrics_process(&history, &labels, &out, releases.as_deref())
            }
            MetricsCmd::Product { history, repo, out, import } => {
                cmd_metrics_product(&history, &repo, &out, import.as_deref())
            }
        },
        Cmd::Assemble { process, product, mode, granularity, level, out, project } => {
            cmd_assemble(&process, product.as_deref(), &mode, &granularity, &level, &out, project)
        }
        Cmd::Experiment { config, rq, out } => {
            let config = config
                .or(cli.config)
                .ok_or_else(|| Error::Config("experiment needs --config".into()))?;
            let rqs = parse_rq_list(&rq)?;
            let summary = experiments::run_experiment(&config, &rqs, &out)?;
            for s in &summary.ran {
                println!("{s}: computed");
            }
            for s in &summary.reused {
                println!("{s}: up to date, reused");
            }
            println!("manifest: {}", summary.manifest_path.display());
            Ok(())
        }
        Cmd::Rank { results, measure, direction, out } => {
            cmd_rank(&results, &measure, &direction, &out, cli.seed)
        }
        Cmd::Report { results, ranks, out } => cmd_report(&results, ranks.as_deref(), &out),
        Cmd::Fixtures { out } => cmd_fixtures(&out, cli.seed),
    }
}

fn cmd_mine(repo: &Path, out: &Path) -> Result<()> {
    let git = Git::open(repo)?;
    let commits = repo_mining::mine_repo(&git)?;
    repo_mining::write_dump(&commits, File::create(out)?)?;
    println!("mined {} commits -> {}", commits.len(), out.display());
    Ok(())
}

fn format_release_date(ts: i64) -> String {
    chrono::DateTime::from_timestamp(ts, 0)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| ts.to_string())
}

fn cmd_releases(file: Option<&Path>, repo: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let entries: Vec<(String, i64)> = match (file, repo) {
        (Some(f), _) => repo_mining::read_releases_file(f)?
            .into_iter()
            .map(|r| (r.tag, r.date))
            .collect(),
        (None, Some(r)) => Git::open(r)?.tags()?,
        (None, None) => {
            return Err(Error::Config("releases needs --file or --repo".into()))
        }
    };
    let mut buf = String::from("tag,date\n");
    for (tag, ts) in &entries {
        buf.push_str(&format!("{tag},{}\n", format_release_date(*ts)));
    }
    match out {
        Some(p) => std::fs::write(p, &buf)?,
        None => print!("{buf}"),
    }
    eprintln!("{} releases", entries.len());
    Ok(())
}

fn read_keyword_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let words: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    if words.is_empty() {
        return Err(Error::Config(format!(
            "keyword file {} has no keywords",
            path.display()
        )));
    }
    Ok(words)
}

fn load_history(path: &Path) -> Result<repo_mining::ProjectHistory> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    repo_mining::parse_dump(BufReader::new(file), &path.display().to_string())
}

fn cmd_label(
    history: &Path,
    repo: &Path,
    out: &Path,
    keywords: Option<&Path>,
    no_line_filter: bool,
) -> Result<()> {
    let hist = load_history(history)?;
    let mut opts = LabelOptions::default();
    if let Some(k) = keywords {
        opts.keywords = read_keyword_file(k)?;
    }
    opts.line_filter = !no_line_filter;
    let provider = GitBlameProvider::new(Git::open(repo)?);
    let (fixes, labels, warnings) = labeling::label_history(&hist, &provider, &opts)?;
    labeling::write_labels_csv(&labels, File::create(out)?)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} fix commits, {} inducing labels -> {}",
        fixes.len(),
        labels.len(),
        out.display()
    );
    Ok(())
}

fn cmd_metrics_process(
    history: &Path,
    labels: &Path,
    out: &Path,
    releases: Option<&Path>,
) -> Result<()> {
    let mut hist = load_history(history)?;
    if let Some(r) = releases {
        hist.assign_releases(repo_mining::read_releases_file(r)?)?;
    }
    let label_rows = labeling::read_labels_csv(
        File::open(labels)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", labels.display())))?,
        &labels.display().to_string(),
    )?;
    let defective = labeling::jit_defective_set(&label_rows);
    let rows = process_metrics::compute_process_rows(&hist, &defective, &ProcessOptions::default());
    process_metrics::write_process_csv(&rows, File::create(out)?)?;
    println!("{} process rows -> {}", rows.len(), out.display());
    Ok(())
}

fn cmd_metrics_product(
    history: &Path,
    repo: &Path,
    out: &Path,
    import: Option<&Path>,
) -> Result<()> {
    let hist = load_history(history)?;
    let git = Git::open(repo)?;
    let mut rows = product_metrics::compute_for_history(&git, &hist, &[".java".into()])?;
    if let Some(path) = import {
        let file = File::open(path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let outcome = product_metrics::import_product_csv(file, &path.display().to_string())?;
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        let imported = outcome.rows.len();
        rows = product_metrics::merge_imports(rows, outcome.rows);
        println!("imported {imported} rows from {}", path.display());
    }
    product_metrics::write_product_csv(&rows, File::create(out)?)?;
    println!("{} product rows -> {}", rows.len(), out.display());
    Ok(())
}

fn cmd_assemble(
    process: &Path,
    product: Option<&Path>,
    mode: &str,
    granularity: &str,
    level: &str,
    out: &Path,
    project: Option<String>,
) -> Result<()> {
    let mode = Mode::parse(mode)?;
    let granularity = Granularity::parse(granularity)?;
    let level = Level::parse(level)?;
    let project = project.unwrap_or_else(|| {
        process
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "project".into())
    });
    let process_rows = process_metrics::read_process_csv(
        File::open(process)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", process.display())))?,
        &process.display().to_string(),
    )?;
    let product_rows = match product {
        Some(p) => {
            let file = File::open(p)
                .map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
            let outcome = product_metrics::import_product_csv(file, &p.display().to_string())?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            Some(outcome.rows)
        }
        None => None,
    };
    let (ds, report) = dataset::assemble(
        &project,
        &process_rows,
        product_rows.as_deref(),
        mode,
        granularity,
        level,
    )?;
    dataset::write_dataset_csv(&ds, File::create(out)?)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    println!(
        "{} rows ({} features, {} dropped in join) -> {}",
        ds.len(),
        ds.n_features(),
        report.dropped_join,
        out.display()
    );
    Ok(())
}

/// Accepts "3", "1,2,5", "1..8", and "2-4".
fn parse_rq_list(text: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let bad = |t: &str| Error::Config(format!("cannot read rq selector {t:?}"));
    for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let range = token
            .split_once("..")
            .or_else(|| token.split_once('-'));
        match range {
            Some((a, b)) => {
                let (a, b): (u8, u8) = (
                    a.trim().parse().map_err(|_| bad(token))?,
                    b.trim().parse().map_err(|_| bad(token))?,
                );
                if a > b {
                    return Err(bad(token));
                }
                out.extend(a..=b);
            }
            None => out.push(token.parse().map_err(|_| bad(token))?),
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty rq selector".into()));
    }
    Ok(out)
}

fn cmd_rank(results: &Path, measure: &str, direction: &str, out: &Path, seed: u64) -> Result<()> {
    let measure = Measure::parse(measure)?;
    let smaller_is_better = match direction {
        "min" => true,
        "max" => false,
        other => {
            return Err(Error::Config(format!(
                "direction must be max or min, got {other:?}"
            )))
        }
    };
    let rows = evaluation::read_results_csv(
        File::open(results)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", results.display())))?,
        &results.display().to_string(),
    )?;
    let ranked = experiments::rank_results(&rows, measure, smaller_is_better, seed)?;
    stats::write_rank_csv(&ranked, File::create(out)?)?;
    for g in &ranked {
        println!("rank {}: {} (median {:.4})", g.rank, g.name, g.median);
    }
    Ok(())
}

fn markdown_table(w: &mut impl Write, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    writeln!(w, "| {} |", header.join(" | "))?;
    writeln!(w, "|{}", "---|".repeat(header.len()))?;
    for row in rows {
        writeln!(w, "| {} |", row.join(" | "))?;
    }
    Ok(())
}

fn cmd_report(results: &Path, ranks: Option<&Path>, out: &Path) -> Result<()> {
    let rows = evaluation::read_results_csv(
        File::open(results)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", results.display())))?,
        &results.display().to_string(),
    )?;
    let mut md = Vec::new();
    writeln!(md, "# Results report\n")?;
    let projects: std::collections::BTreeSet<&str> =
        rows.iter().map(|r| r.project.as_str()).collect();
    writeln!(
        md,
        "{} evaluation rows over {} projects.\n",
        rows.len(),
        projects.len()
    )?;

    writeln!(md, "## Median over per-project medians (IQR)\n")?;
    let report = experiments::variance_report(&rows, &MEASURES);
    let mut combos: Vec<String> = Vec::new();
    for r in &report {
        let key = format!("{}/{}", r.learner.as_str(), r.mode.as_str());
        if !combos.contains(&key) {
            combos.push(key);
        }
    }
    let mut table = Vec::new();
    for combo in &combos {
        let mut cells = vec![combo.clone()];
        for m in MEASURES {
            let cell = report
                .iter()
                .find(|r| {
                    format!("{}/{}", r.learner.as_str(), r.mode.as_str()) == *combo
                        && r.measure == m
                })
                .map(|r| format!("{:.3} ({:.3})", r.median, r.iqr))
                .unwrap_or_else(|| "-".into());
            cells.push(cell);
        }
        table.push(cells);
    }
    let mut header = vec!["group"];
    header.extend(MEASURES.iter().map(|m| m.as_str()));
    markdown_table(&mut md, &header, &table)?;

    let undefined: usize = rows
        .iter()
        .map(|r| MEASURES.iter().filter(|&&m| r.result.get(m).is_none()).count())
        .sum();
    let plural = if undefined == 1 { "value" } else { "values" };
    writeln!(md, "\n{undefined} undefined measure {plural} across all rows.\n")?;

    if let Some(path) = ranks {
        writeln!(md, "## Ranks\n")?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        let body: Vec<Vec<String>> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        markdown_table(&mut md, &header, &body)?;
    }
    std::fs::write(out, &md)?;
    println!("report -> {}", out.display());
    Ok(())
}

fn write_corpus_with_config(
    dir: &Path,
    corpus: &[dataset::Dataset],
    seed: u64,
) -> Result<usize> {
    let paths = synth::write_corpus(dir, corpus)?;
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let config = format!(
        "projects = {}\nmodes = P, C, P+C\nlearners = nb, lr, svm, rf\n\
         split = cv\nrepeats = 5\nfolds = 5\nseed = {seed}\n",
        names.join(", ")
    );
    std::fs::write(dir.join("config.txt"), config)?;
    Ok(paths.len())
}

fn cmd_fixtures(out: &Path, seed: u64) -> Result<()> {
    let repo_dir = out.join("repos");
    let built = fixtures::write_all(&repo_dir)?;
    for p in &built {
        println!("repo: {}", p.display());
    }
    let corpus_dir = out.join("corpus");
    for (name, corpus) in [
        ("rq2", synth::rq2_corpus(seed)),
        ("process_signal", synth::process_signal_corpus(seed, 6)),
        ("stagnant", synth::stagnant_corpus(seed, 4)),
        ("heterogeneous", synth::heterogeneous_corpus(seed, 10)),
    ] {
        let dir = corpus_dir.join(name);
        let n = write_corpus_with_config(&dir, &corpus, seed)?;
        println!("corpus: {} ({n} projects)", dir.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rq_selectors_cover_singles_lists_and_ranges() {
        assert_eq!(parse_rq_list("3").unwrap(), vec![3]);
        assert_eq!(parse_rq_list("1,2,5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_rq_list("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_rq_list("2-4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_rq_list("1, 3..4").unwrap(), vec![1, 3, 4]);
        assert!(parse_rq_list("").is_err());
        assert!(parse_rq_list("8..1").is_err());
        assert!(parse_rq_list("x").is_err());
    }

    #[test]
    fn help_and_bad_usage_exit_codes() {
        assert_eq!(run(["defectlab", "--help"]), 0);
        assert_eq!(run(["defectlab", "--version"]), 0);
        assert_eq!(run(["defectlab", "bogus"]), 1);
        assert_eq!(run(["defectlab", "rank", "--nonsense"]), 1);
        assert_eq!(run::<[&str; 1], &str>(["defectlab"]), 1);
    }

    #[test]
    fn keyword_files_skip_blanks_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kw.txt");
        std::fs::write(&path, "# custom\nfix\n\n  crash  \n").unwrap();
        assert_eq!(read_keyword_file(&path).unwrap(), ["fix", "crash"]);
        std::fs::write(&path, "# only comments\n").unwrap();
        assert!(read_keyword_file(&path).is_err());
    }

    #[test]
    fn release_dates_render_as_iso_utc() {
        assert_eq!(format_release_date(0), "1970-01-01T00:00:00Z");
        assert_eq!(format_release_date(1_577_836_800), "2020-01-01T00:00:00Z");
    }
}

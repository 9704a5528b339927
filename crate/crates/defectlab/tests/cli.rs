//! End-to-end pipeline through the command-line surface: fixture repo ->
//! mine -> releases -> label -> metrics -> assemble -> experiment ->
//! rank -> report, all in-process via the same dispatch the binary uses.

use std::path::Path;

use defectlab::cli::run;

fn ok(args: &[&str]) {
    let mut argv = vec!["defectlab"];
    argv.extend_from_slice(args);
    let code = run(argv.clone());
    assert_eq!(code, 0, "exit {code} for {argv:?}");
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn full_pipeline_on_fixture_repo() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let fixtures = dir.join("fixtures");
    ok(&["fixtures", "--out", &s(&fixtures)]);
    let repo = fixtures.join("repos").join("pipeline");
    assert!(repo.join(".git").exists());
    for corpus in ["rq2", "process_signal", "stagnant", "heterogeneous"] {
        let config = fixtures.join("corpus").join(corpus).join("config.txt");
        assert!(config.exists(), "{corpus} corpus config missing");
    }

    let dump = dir.join("history.jsonl");
    ok(&["mine", "--repo", &s(&repo), "--out", &s(&dump)]);
    assert!(dump.metadata().unwrap().len() > 0);

    let releases = dir.join("releases.csv");
    ok(&["releases", "--repo", &s(&repo), "--out", &s(&releases)]);
    let rel_text = read(&releases);
    assert!(rel_text.starts_with("tag,date\n"));
    assert!(rel_text.contains("v1.0,") && rel_text.contains("v2.0,"));
    // The normalizing path accepts its own output.
    ok(&["releases", "--file", &s(&releases)]);

    let labels = dir.join("labels.csv");
    ok(&["label", "--history", &s(&dump), "--repo", &s(&repo), "--out", &s(&labels)]);
    assert_eq!(read(&labels).lines().count(), 1 + 12, "12 inducing labels");

    let process = dir.join("process.csv");
    ok(&[
        "metrics", "process",
        "--history", &s(&dump),
        "--labels", &s(&labels),
        "--releases", &s(&releases),
        "--out", &s(&process),
    ]);
    let process_text = read(&process);
    assert!(process_text.starts_with("file,commit,release,"));
    let defective = process_text
        .lines()
        .filter(|l| l.ends_with(",true"))
        .count();
    assert_eq!(defective, 12);

    let product = dir.join("product.csv");
    ok(&[
        "metrics", "product",
        "--history", &s(&dump),
        "--repo", &s(&repo),
        "--out", &s(&product),
    ]);

    let dataset = dir.join("solo.csv");
    ok(&[
        "assemble",
        "--process", &s(&process),
        "--product", &s(&product),
        "--mode", "P+C",
        "--granularity", "file",
        "--level", "jit",
        "--project", "solo",
        "--out", &s(&dataset),
    ]);
    assert!(read(&dataset).lines().count() > 20);

    let config = dir.join("exp.conf");
    std::fs::write(
        &config,
        "projects = solo.csv\nmodes = P, P+C\nlearners = nb, rf\n\
         split = cv\nrepeats = 5\nfolds = 5\nseed = 17\n",
    )
    .unwrap();
    let out1 = dir.join("out1");
    ok(&["experiment", "--config", &s(&config), "--rq", "1,2", "--out", &s(&out1)]);

    let results = read(&out1.join("rq1_results.csv"));
    let rows: Vec<&str> = results.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 2 * 25, "modes x learners x (5x5 folds)");
    for learner in ["nb", "rf"] {
        for mode in ["P", "P+C"] {
            let cell = rows
                .iter()
                .filter(|l| {
                    let f: Vec<&str> = l.split(',').collect();
                    f[1] == mode && f[4] == learner
                })
                .count();
            assert_eq!(cell, 25, "{learner}/{mode} cross-val rows");
        }
    }
    assert_eq!(read(&out1.join("rq1_skips.csv")).lines().count(), 1, "no skips");

    // Same config into a fresh directory: byte-identical tables.
    let out2 = dir.join("out2");
    ok(&["experiment", "--config", &s(&config), "--rq", "1,2", "--out", &s(&out2)]);
    for f in ["rq1_results.csv", "rq1_skips.csv", "rq2_variance.csv"] {
        assert_eq!(
            std::fs::read(out1.join(f)).unwrap(),
            std::fs::read(out2.join(f)).unwrap(),
            "{f} differs"
        );
    }

    let ranks = dir.join("ranks.csv");
    ok(&[
        "rank",
        "--results", &s(&out1.join("rq1_results.csv")),
        "--measure", "auc",
        "--direction", "max",
        "--out", &s(&ranks),
    ]);
    let rank_text = read(&ranks);
    assert!(rank_text.starts_with("group,rank,median,a12_vs_next,p\n"));
    assert_eq!(rank_text.lines().count(), 1 + 4, "one row per learner/mode");

    let report = dir.join("report.md");
    ok(&[
        "report",
        "--results", &s(&out1.join("rq1_results.csv")),
        "--ranks", &s(&ranks),
        "--out", &s(&report),
    ]);
    let md = read(&report);
    assert!(md.starts_with("# Results report"));
    assert!(md.contains("| group |"));
    assert!(md.contains("nb/P"));
}

#[test]
fn validation_failures_exit_one_runtime_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();

    // Unreadable inputs are validation problems.
    let missing = s(&dir.join("nope.csv"));
    let out = s(&dir.join("out.csv"));
    assert_eq!(
        run(["defectlab", "rank", "--results", &missing, "--measure", "auc", "--direction", "max", "--out", &out]),
        1
    );
    assert_eq!(
        run(["defectlab", "rank", "--results", &missing, "--measure", "auc", "--direction", "sideways", "--out", &out]),
        1
    );
    assert_eq!(run(["defectlab", "releases"]), 1, "needs --file or --repo");
    assert_eq!(
        run(["defectlab", "experiment", "--out", &s(&dir.join("o"))]),
        1,
        "experiment without any --config"
    );

    // A directory that is not a repository fails at runtime.
    let not_repo = dir.join("plain");
    std::fs::create_dir(&not_repo).unwrap();
    assert_eq!(
        run(["defectlab", "mine", "--repo", &s(&not_repo), "--out", &s(&dir.join("d.jsonl"))]),
        2
    );
}

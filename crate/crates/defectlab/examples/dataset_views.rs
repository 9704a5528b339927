//! One history, four views: change level vs release level, file vs
//! package granularity, and the process/product/combined column splits.

use defectlab::dataset::{aggregate_packages, aggregate_releases, Mode};
use defectlab::experiments::filter_mode;
use defectlab::synth::{labeled_project, SynthSpec};

fn main() -> defectlab::Result<()> {
    let jit = labeled_project(&SynthSpec {
        name: "views".into(),
        rows: 240,
        files: 40,
        releases: 4,
        ..SynthSpec::default()
    });
    let show = |label: &str, ds: &defectlab::dataset::Dataset| {
        println!(
            "{label:<22} {:>4} rows  {:>2} features  {} / {} / {}  defect {:.2}",
            ds.len(),
            ds.n_features(),
            ds.mode.as_str(),
            ds.granularity.as_str(),
            ds.level.as_str(),
            ds.defect_ratio()
        );
    };
    show("change level", &jit);

    // Release view: one row per (file, release), medians over the rows,
    // defective if any member row was.
    let release = aggregate_releases(&jit);
    show("release level", &release);

    // Package view: rows grouped by directory within each commit.
    let package = aggregate_packages(&jit);
    show("package granularity", &package);

    // Column families carve the combined matrix without copying labels.
    for mode in [Mode::Process, Mode::Product] {
        let sub = filter_mode(&jit, mode)?;
        show(&format!("columns: {}", mode.as_str()), &sub);
    }

    let names: Vec<&str> = package.meta.iter().map(|m| m.name.as_str()).take(3).collect();
    println!("\nfirst package names: {names:?}");
    Ok(())
}

//! Class rebalancing: minority oversampling with synthetic neighbors.
//!
//! Shows the contract that matters downstream: classes end exactly
//! balanced, synthetic rows interpolate real minority rows, and the test
//! side is never touched.

use defectlab::dataset::{smote, ResampleConfig};
use defectlab::synth::{labeled_project, SynthSpec};

fn main() -> defectlab::Result<()> {
    let ds = labeled_project(&SynthSpec {
        name: "demo".into(),
        rows: 200,
        defect_ratio: 0.15,
        ..SynthSpec::default()
    });
    let before = ds.y.iter().filter(|&&y| y).count();
    println!(
        "before: {} rows, {before} defective ({:.1}%)",
        ds.len(),
        100.0 * ds.defect_ratio()
    );

    let balanced = smote(&ds, &ResampleConfig { k: 5, seed: 7 })?;
    let after = balanced.y.iter().filter(|&&y| y).count();
    println!(
        "after:  {} rows, {after} defective ({:.1}%)",
        balanced.len(),
        100.0 * balanced.defect_ratio()
    );
    assert_eq!(after * 2, balanced.len(), "exact balance");

    // Original rows come first and are bit-identical.
    assert_eq!(balanced.x[..ds.len()], ds.x[..]);
    let synthetic = balanced.len() - ds.len();
    println!("{synthetic} synthetic minority rows appended; originals untouched");

    // A synthetic row sits between two minority parents, so its la value
    // lies inside the minority range.
    let la = ds.feature_index("la").expect("la column");
    let minority: Vec<f64> = ds
        .x
        .iter()
        .zip(&ds.y)
        .filter(|(_, &y)| y)
        .map(|(r, _)| r[la])
        .collect();
    let (lo, hi) = (
        minority.iter().copied().fold(f64::INFINITY, f64::min),
        minority.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    for row in &balanced.x[ds.len()..] {
        assert!(row[la] >= lo && row[la] <= hi);
    }
    println!("every synthetic la value is inside the minority envelope [{lo:.2}, {hi:.2}]");
    Ok(())
}

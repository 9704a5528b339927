//! Fit the four learners on one project and score a held-out fold.

use defectlab::dataset::{make_splits, preprocess, smote, ResampleConfig, SplitKind};
use defectlab::evaluation::{evaluate, MEASURES};
use defectlab::learners::{fit, LearnerKind, ModelSpec};
use defectlab::synth::{labeled_project, SynthSpec};

fn main() -> defectlab::Result<()> {
    let ds = labeled_project(&SynthSpec {
        name: "demo".into(),
        rows: 300,
        noise: 0.15,
        ..SynthSpec::default()
    });

    let plan = make_splits(&ds, &SplitKind::CrossVal { repeats: 1, folds: 5 }, 42)?;
    let split = &plan.splits[0];
    let (train, test, report) = preprocess(&ds.subset(&split.train), &ds.subset(&split.test))?;
    println!(
        "fold {}: {} train rows, {} test rows, {} constant columns dropped",
        split.name,
        train.len(),
        test.len(),
        report.dropped.len()
    );
    let train = smote(&train, &ResampleConfig { k: 5, seed: 1 })?;

    print!("{:<6}", "model");
    for m in MEASURES {
        print!("{:>10}", m.as_str());
    }
    println!();
    for kind in LearnerKind::ALL {
        let model = fit(&ModelSpec::new(kind, 42), &train)?;
        let scores = model.score_all(&test)?;
        let pred = test
            .x
            .iter()
            .map(|row| model.predict(row))
            .collect::<defectlab::Result<Vec<bool>>>()?;
        let result = evaluate(&scores, &pred, &test.y, &test.effort)?;
        print!("{:<6}", kind.as_str());
        for m in MEASURES {
            match result.get(m) {
                Some(v) => print!("{v:>10.3}"),
                None => print!("{:>10}", "undef"),
            }
        }
        println!();
    }
    Ok(())
}

//! Rank learner/metric-family groups across a corpus with the
//! bootstrap-gated Scott-Knott procedure.
//!
//! Groups whose value distributions are statistically indistinguishable
//! share a rank; rank 1 is best.

use defectlab::dataset::{Mode, SplitKind};
use defectlab::evaluation::Measure;
use defectlab::experiments::{run_performance_on, rank_results, ExperimentConfig, Rq6Reading};
use defectlab::learners::LearnerKind;
use defectlab::synth;

fn main() -> defectlab::Result<()> {
    // Ten projects whose defect signal lives in the change metrics.
    let corpus: Vec<_> = synth::process_signal_corpus(5, 10)
        .into_iter()
        .map(|d| (d.meta[0].project.clone(), d))
        .collect();

    let cfg = ExperimentConfig {
        projects: Vec::new(), // datasets handed over in memory below
        modes: vec![Mode::Process, Mode::Product],
        learners: vec![LearnerKind::Rf, LearnerKind::Lr],
        split: SplitKind::CrossVal { repeats: 1, folds: 5 },
        seed: 42,
        measures: vec![Measure::Auc],
        small_samples: 20,
        small_size: 5,
        rq6_reading: Rq6Reading::Score,
    };
    let out = run_performance_on(&corpus, &cfg);
    println!("{} evaluation rows, {} skips", out.rows.len(), out.skips.len());

    for measure in [Measure::Auc, Measure::Recall] {
        let ranked = rank_results(&out.rows, measure, measure.smaller_is_better(), cfg.seed)?;
        println!("\n{} (higher is better):", measure.as_str());
        for g in &ranked {
            let vs_next = match (g.a12_vs_next, g.p_vs_next) {
                (Some(a), Some(p)) => format!("  vs next: a12={a:.2} p={p:.3}"),
                _ => String::new(),
            };
            println!("  rank {} {:<8} median {:.3}{vs_next}", g.rank, g.name, g.median);
        }
    }
    Ok(())
}

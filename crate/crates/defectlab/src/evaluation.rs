//! The six test-set measures: recall, precision, pf, AUC, Popt20, IFA.
//!
//! A measure either has a value or is explicitly undefined (zero
//! denominator, missing class, degenerate ranking). Undefined stays
//! undefined all the way into the results CSV; nothing is coerced to 0.

use std::io::{Read, Write};

use crate::dataset::{Granularity, Level, Mode};
use crate::error::{Error, Result};
use crate::learners::LearnerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

pub fn confusion(pred: &[bool], y: &[bool]) -> Result<ConfusionMatrix> {
    if pred.len() != y.len() || y.is_empty() {
        return Err(Error::Score(
            "predictions and labels must be equal-length and non-empty".into(),
        ));
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&p, &t) in pred.iter().zip(y) {
        match (p, t) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

impl ConfusionMatrix {
    #[must_use]
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    #[must_use]
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    #[must_use]
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// False alarm rate: clean rows wrongly flagged.
    #[must_use]
    pub fn pf(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Rank-based AUC (Mann-Whitney with average ranks for ties); equal to the
/// trapezoidal area under the ROC curve. All-tied scores with both classes
/// present give exactly 0.5; a missing class makes the measure undefined.
#[must_use]
pub fn auc(scores: &[f64], y: &[bool]) -> Option<f64> {
    let pos = y.iter().filter(|&&b| b).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let rank = crate::stats::average_ranks(scores);
    let pos_rank_sum: f64 = (0..y.len()).filter(|&i| y[i]).map(|i| rank[i]).sum();
    let p = pos as f64;
    let n = neg as f64;
    Some((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// The effort-aware inspection order: score descending, then effort
/// ascending (smaller files first among equals), then row id.
#[must_use]
pub fn inspection_order(scores: &[f64], effort: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(effort[a].total_cmp(&effort[b]))
            .then(a.cmp(&b))
    });
    idx
}

/// Fraction of all defects found within the first 20% of total effort.
/// The row whose effort crosses the budget boundary is still inspected.
#[must_use]
pub fn popt20(scores: &[f64], y: &[bool], effort: &[f64]) -> Option<f64> {
    let defects = y.iter().filter(|&&b| b).count();
    if defects == 0 {
        return None;
    }
    if effort.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return None;
    }
    let total: f64 = effort.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let budget = 0.20 * total;
    let mut spent = 0.0;
    let mut found = 0usize;
    for i in inspection_order(scores, effort) {
        let after = spent + effort[i];
        // Inspected iff the row starts inside the budget or ends exactly
        // on it; the first row to cross the line is included.
        if spent < budget || after <= budget {
            if y[i] {
                found += 1;
            }
        } else {
            break;
        }
        spent = after;
    }
    Some(found as f64 / defects as f64)
}

/// Clean rows ranked ahead of the first defective row, in the same order
/// popt20 walks.
#[must_use]
pub fn ifa(scores: &[f64], y: &[bool], effort: &[f64]) -> Option<u64> {
    if !y.iter().any(|&b| b) {
        return None;
    }
    let mut alarms = 0;
    for i in inspection_order(scores, effort) {
        if y[i] {
            return Some(alarms);
        }
        alarms += 1;
    }
    unreachable!("a defective row exists");
}

// ---------------------------------------------------------------------------
// Bundled result

pub const MEASURES: [Measure; 6] = [
    Measure::Recall,
    Measure::Precision,
    Measure::Pf,
    Measure::Auc,
    Measure::Popt20,
    Measure::Ifa,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Recall,
    Precision,
    Pf,
    Auc,
    Popt20,
    Ifa,
}

impl Measure {
    #[must_use]
    pub fn as_str(&self) -> &'static str {
        match self {
            Measure::Recall => "recall",
            Measure::Precision => "precision",
            Measure::Pf => "pf",
            Measure::Auc => "auc",
            Measure::Popt20 => "popt20",
            Measure::Ifa => "ifa",
        }
    }

    pub fn parse(s: &str) -> Result<Measure> {
        MEASURES
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown measure {s:?}")))
    }

    /// pf and ifa improve downward; the other four upward.
    #[must_use]
    pub fn smaller_is_better(&self) -> bool {
        matches!(self, Measure::Pf | Measure::Ifa)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalResult {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub pf: Option<f64>,
    pub auc: Option<f64>,
    pub popt20: Option<f64>,
    pub ifa: Option<u64>,
}

impl EvalResult {
    #[must_use]
    pub fn get(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::Recall => self.recall,
            Measure::Precision => self.precision,
            Measure::Pf => self.pf,
            Measure::Auc => self.auc,
            Measure::Popt20 => self.popt20,
            Measure::Ifa => self.ifa.map(|v| v as f64),
        }
    }

    /// Names of the measures that came out undefined.
    #[must_use]
    pub fn undefined(&self) -> Vec<&'static str> {
        MEASURES
            .iter()
            .filter(|m| self.get(**m).is_none())
            .map(|m| m.as_str())
            .collect()
    }
}

/// Computes all six measures for one evaluated split.
///
/// Unlike the raw [`auc`] operation (where all-tied scores are a valid
/// 0.5), a constant scorer here flags AUC undefined: a ranking that cannot
/// order anything carries no signal and must not pass as mediocre-but-real.
pub fn evaluate(scores: &[f64], pred: &[bool], y: &[bool], effort: &[f64]) -> Result<EvalResult> {
    if scores.len() != y.len() || pred.len() != y.len() || effort.len() != y.len() {
        return Err(Error::Score("mismatched evaluation array lengths".into()));
    }
    let cm = confusion(pred, y)?;
    let degenerate = scores.windows(2).all(|w| w[0] == w[1]);
    Ok(EvalResult {
        recall: cm.recall(),
        precision: cm.precision(),
        pf: cm.pf(),
        auc: if degenerate { None } else { auc(scores, y) },
        popt20: popt20(scores, y, effort),
        ifa: ifa(scores, y, effort),
    })
}

// ---------------------------------------------------------------------------
// Results CSV

pub const RESULTS_HEADER: &str =
    "project,mode,granularity,level,learner,fold_or_release,recall,precision,pf,auc,popt20,ifa,flags";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub project: String,
    pub mode: Mode,
    pub granularity: Granularity,
    pub level: Level,
    pub learner: LearnerKind,
    pub fold_or_release: String,
    pub result: EvalResult,
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RESULTS_HEADER.split(','))?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.project.as_str(),
            r.mode.as_str(),
            r.granularity.as_str(),
            r.level.as_str(),
            r.learner.as_str(),
            r.fold_or_release.as_str(),
            &cell(r.result.recall),
            &cell(r.result.precision),
            &cell(r.result.pf),
            &cell(r.result.auc),
            &cell(r.result.popt20),
            &r.result.ifa.map(|v| v.to_string()).unwrap_or_default(),
            &r.result.undefined().join(";"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(reader: R, source_name: &str) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected: Vec<&str> = RESULTS_HEADER.split(',').collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(source_name, 1, "unexpected results header"));
    }
    let parse_opt = |s: &str, line: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>()
            .map(Some)
            .map_err(|e| Error::parse(source_name, line, format!("bad value {s:?}: {e}")))
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != expected.len() {
            return Err(Error::parse(source_name, line, "wrong field count"));
        }
        rows.push(ResultRow {
            project: rec[0].to_string(),
            mode: Mode::parse(&rec[1])?,
            granularity: Granularity::parse(&rec[2])?,
            level: Level::parse(&rec[3])?,
            learner: LearnerKind::parse(&rec[4])?,
            fold_or_release: rec[5].to_string(),
            result: EvalResult {
                recall: parse_opt(&rec[6], line)?,
                precision: parse_opt(&rec[7], line)?,
                pf: parse_opt(&rec[8], line)?,
                auc: parse_opt(&rec[9], line)?,
                popt20: parse_opt(&rec[10], line)?,
                ifa: if rec[11].is_empty() {
                    None
                } else {
                    Some(rec[11].parse().map_err(|e| {
                        Error::parse(source_name, line, format!("bad ifa: {e}"))
                    })?)
                },
            },
        });
    }
    Ok(rows)
}

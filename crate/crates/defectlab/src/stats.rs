//! Ranking statistics: Scott-Knott bi-clustering gated by a mean-centered
//! bootstrap and the A12 effect size, plus Spearman rank correlation.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[must_use]
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[must_use]
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Average ranks (1-based); tied values share the mean of their positions.
#[must_use]
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

// ---------------------------------------------------------------------------
// Effect size and significance

/// Vargha-Delaney A12: probability a draw from x exceeds a draw from y,
/// ties counting half.
#[must_use]
pub fn a12(x: &[f64], y: &[f64]) -> f64 {
    let mut wins = 0.0;
    for a in x {
        for b in y {
            wins += match a.total_cmp(b) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    wins / (x.len() * y.len()) as f64
}

/// Two-sided bootstrap test of the mean difference under a mean-centered
/// null: both samples are shifted to the pooled mean, resampled with
/// replacement B times, and p is the share of replicate |mean gaps| at
/// least as large as the observed one.
#[must_use]
pub fn bootstrap_sig(x: &[f64], y: &[f64], b: usize, alpha: f64, seed: u64) -> (bool, f64) {
    let observed = (mean(x) - mean(y)).abs();
    let pooled = (x.iter().sum::<f64>() + y.iter().sum::<f64>()) / (x.len() + y.len()) as f64;
    let xs: Vec<f64> = x.iter().map(|v| v - mean(x) + pooled).collect();
    let ys: Vec<f64> = y.iter().map(|v| v - mean(y) + pooled).collect();
    let hits: usize = (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = crate::rng::stream(seed, rep);
            let mx = (0..xs.len())
                .map(|_| xs[rng.random_range(0..xs.len())])
                .sum::<f64>()
                / xs.len() as f64;
            let my = (0..ys.len())
                .map(|_| ys[rng.random_range(0..ys.len())])
                .sum::<f64>()
                / ys.len() as f64;
            usize::from((mx - my).abs() >= observed)
        })
        .sum();
    let p = hits as f64 / b as f64;
    (p < alpha, p)
}

// ---------------------------------------------------------------------------
// Scott-Knott

#[derive(Debug, Clone, PartialEq)]
pub struct RankGroup {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedGroup {
    pub name: String,
    /// 1 = best.
    pub rank: u32,
    pub median: f64,
    /// Effect size against the next group in ranked order; empty for the
    /// last group.
    pub a12_vs_next: Option<f64>,
    pub p_vs_next: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkConfig {
    pub boots: usize,
    pub alpha: f64,
    pub a12_threshold: f64,
    pub seed: u64,
    /// pf and ifa rank upward from the smallest medians.
    pub smaller_is_better: bool,
}

impl Default for SkConfig {
    fn default() -> Self {
        SkConfig {
            boots: 1000,
            alpha: 0.10,
            a12_threshold: 0.6,
            seed: 0,
            smaller_is_better: false,
        }
    }
}

/// Recursive bi-clustering into ranks.
///
/// Groups are sorted best-first by median (direction-aware, name breaks
/// ties); each segment splits at the boundary maximizing
/// E-delta = (ms/ls)(m.mu - l.mu)^2 + (ns/ls)(n.mu - l.mu)^2
/// over the pooled values, and the split stands only when the bootstrap
/// finds the two sides' means significantly different AND the pooled A12
/// effect (in whichever direction) reaches the threshold. Segments that
/// cannot split share one rank.
pub fn scott_knott(groups: &[RankGroup], cfg: &SkConfig) -> Result<Vec<RankedGroup>> {
    if groups.is_empty() {
        return Err(Error::Stats("no groups to rank".into()));
    }
    if let Some(g) = groups.iter().find(|g| g.values.is_empty()) {
        return Err(Error::Stats(format!("group {:?} has no values", g.name)));
    }
    let mut sorted: Vec<&RankGroup> = groups.iter().collect();
    sorted.sort_by(|a, b| {
        let (ma, mb) = (median(&a.values), median(&b.values));
        let ord = if cfg.smaller_is_better {
            ma.total_cmp(&mb)
        } else {
            mb.total_cmp(&ma)
        };
        ord.then_with(|| a.name.cmp(&b.name))
    });

    let mut ranks = vec![0u32; sorted.len()];
    let mut next_rank = 1u32;
    segment_ranks(&sorted, 0..sorted.len(), cfg, &mut ranks, &mut next_rank);

    let mut out = Vec::with_capacity(sorted.len());
    for (i, g) in sorted.iter().enumerate() {
        let (a, p) = if i + 1 < sorted.len() {
            let next = sorted[i + 1];
            let (_, p) = bootstrap_sig(&g.values, &next.values, cfg.boots, cfg.alpha, cfg.seed);
            (Some(a12(&g.values, &next.values)), Some(p))
        } else {
            (None, None)
        };
        out.push(RankedGroup {
            name: g.name.clone(),
            rank: ranks[i],
            median: median(&g.values),
            a12_vs_next: a,
            p_vs_next: p,
        });
    }
    Ok(out)
}

fn segment_ranks(
    sorted: &[&RankGroup],
    span: std::ops::Range<usize>,
    cfg: &SkConfig,
    ranks: &mut [u32],
    next_rank: &mut u32,
) {
    if span.len() <= 1 {
        if let Some(i) = span.clone().next() {
            ranks[i] = *next_rank;
            *next_rank += 1;
        }
        return;
    }
    if let Some(cut) = best_split(sorted, span.clone(), cfg) {
        segment_ranks(sorted, span.start..cut, cfg, ranks, next_rank);
        segment_ranks(sorted, cut..span.end, cfg, ranks, next_rank);
    } else {
        for i in span {
            ranks[i] = *next_rank;
        }
        *next_rank += 1;
    }
}

/// Finds the E-delta-maximal boundary and applies the dual gate; returns
/// the cut index (groups before it go left) or None to keep one rank.
fn best_split(
    sorted: &[&RankGroup],
    span: std::ops::Range<usize>,
    cfg: &SkConfig,
) -> Option<usize> {
    // Prefix sums over pooled values make each boundary O(1).
    let mut prefix_sum = vec![0.0];
    let mut prefix_n = vec![0usize];
    for i in span.clone() {
        let g = sorted[i];
        prefix_sum.push(prefix_sum.last().unwrap() + g.values.iter().sum::<f64>());
        prefix_n.push(prefix_n.last().unwrap() + g.values.len());
    }
    let ls = *prefix_n.last().unwrap() as f64;
    let l_mean = prefix_sum.last().unwrap() / ls;

    let mut best: Option<(f64, usize)> = None;
    for b in 1..span.len() {
        let ms = prefix_n[b] as f64;
        let ns = ls - ms;
        let m_mean = prefix_sum[b] / ms;
        let n_mean = (prefix_sum.last().unwrap() - prefix_sum[b]) / ns;
        let e_delta =
            ms / ls * (m_mean - l_mean).powi(2) + ns / ls * (n_mean - l_mean).powi(2);
        if best.is_none_or(|(e, _)| e_delta > e) {
            best = Some((e_delta, b));
        }
    }
    let (_, cut) = best?;

    let left: Vec<f64> = span
        .clone()
        .take(cut)
        .flat_map(|i| sorted[i].values.iter().copied())
        .collect();
    let right: Vec<f64> = span
        .clone()
        .skip(cut)
        .flat_map(|i| sorted[i].values.iter().copied())
        .collect();
    let (significant, _) = bootstrap_sig(&left, &right, cfg.boots, cfg.alpha, cfg.seed);
    let effect = a12(&left, &right);
    let effect = effect.max(1.0 - effect);
    if significant && effect >= cfg.a12_threshold {
        Some(span.start + cut)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Spearman

/// Spearman rho: Pearson correlation of average ranks. Undefined when a
/// vector has no rank variance.
#[must_use]
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Two-sided p-value for Spearman rho via the t approximation with n-2
/// degrees of freedom; exact +/-1 maps to p = 0.
#[must_use]
pub fn spearman_p(rho: f64, n: usize) -> Option<f64> {
    if n < 3 || !(-1.0..=1.0).contains(&rho) {
        return None;
    }
    if rho.abs() >= 1.0 {
        return Some(0.0);
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some(2.0 * (1.0 - dist.cdf(t.abs())))
}

// ---------------------------------------------------------------------------
// Rank CSV

pub const RANK_HEADER: &str = "group,rank,median,a12_vs_next,p";

pub fn write_rank_csv<W: Write>(rows: &[RankedGroup], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RANK_HEADER.split(','))?;
    for r in rows {
        wtr.write_record([
            r.name.as_str(),
            &r.rank.to_string(),
            &format!("{}", r.median),
            &r.a12_vs_next.map(|v| format!("{v}")).unwrap_or_default(),
            &r.p_vs_next.map(|v| format!("{v}")).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

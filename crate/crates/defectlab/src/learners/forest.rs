//! Random forest with seeded, schedule-independent tree construction.
//!
//! Tree t draws every random decision from stream (seed, t), so building
//! trees in parallel, serially, or in any order yields the same forest.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Draw n rows with replacement per tree; off means every tree sees the
    /// full training set (used for single-tree baselines).
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        pos: u32,
        neg: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Arena with the root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    /// True when the leaf holding x voted defective; exact ties vote
    /// defective so a never-trainable 50/50 leaf errs toward recall.
    #[must_use]
    pub fn vote(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { pos, neg } => return pos >= neg,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Mean impurity-decrease share per feature; sums to 1 when any tree
    /// split at all.
    pub importances: Vec<f64>,
    pub n_features: usize,
}

impl Forest {
    /// Fraction of trees voting defective.
    #[must_use]
    pub fn vote_fraction(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.vote(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

pub fn fit(x: &[Vec<f64>], y: &[bool], params: &ForestParams, seed: u64) -> Forest {
    let n_features = x[0].len();
    let built: Vec<(Tree, Vec<f64>)> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = crate::rng::stream(seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
            } else {
                (0..x.len()).collect()
            };
            build_tree(x, y, rows, &mut rng)
        })
        .collect();

    let mut importances = vec![0.0; n_features];
    for (_, imp) in &built {
        for (total, v) in importances.iter_mut().zip(imp) {
            *total += v;
        }
    }
    for v in &mut importances {
        *v /= params.trees as f64;
    }
    let sum: f64 = importances.iter().sum();
    if sum > 0.0 {
        for v in &mut importances {
            *v /= sum;
        }
    }
    Forest {
        trees: built.into_iter().map(|(t, _)| t).collect(),
        importances,
        n_features,
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

/// Builds one tree; returns it with the per-feature sum of weighted
/// impurity decreases (weights relative to the tree's own sample count).
fn build_tree(
    x: &[Vec<f64>],
    y: &[bool],
    rows: Vec<usize>,
    rng: &mut ChaCha12Rng,
) -> (Tree, Vec<f64>) {
    let n_features = x[0].len();
    let n_total = rows.len() as f64;
    let mtry = (n_features as f64).sqrt().floor().max(1.0) as usize;
    let mut nodes: Vec<Node> = Vec::new();
    let mut importances = vec![0.0; n_features];
    // Work items carry the rows of a node already allocated in the arena.
    let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
    nodes.push(Node::Leaf { pos: 0, neg: 0 });
    stack.push((0, rows));

    while let Some((slot, rows)) = stack.pop() {
        let pos = rows.iter().filter(|&&i| y[i]).count();
        let total = rows.len();
        let node_gini = gini(pos, total);
        let as_leaf = Node::Leaf {
            pos: pos as u32,
            neg: (total - pos) as u32,
        };
        if pos == 0 || pos == total || total < 2 {
            nodes[slot] = as_leaf;
            continue;
        }

        // Random feature subset first; if nothing there improves impurity,
        // sweep the remaining features so a usable split is never missed.
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);
        let best = find_best_split(x, y, &rows, &order[..mtry], node_gini)
            .or_else(|| find_best_split(x, y, &rows, &order[mtry..], node_gini));
        let Some(best) = best else {
            nodes[slot] = as_leaf;
            continue;
        };

        importances[best.feature] += (total as f64 / n_total) * best.decrease;
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| x[i][best.feature] <= best.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { pos: 0, neg: 0 });
        let right = nodes.len();
        nodes.push(Node::Leaf { pos: 0, neg: 0 });
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        stack.push((left, left_rows));
        stack.push((right, right_rows));
    }
    (Tree { nodes }, importances)
}

fn find_best_split(
    x: &[Vec<f64>],
    y: &[bool],
    rows: &[usize],
    features: &[usize],
    node_gini: f64,
) -> Option<BestSplit> {
    let total = rows.len();
    let mut best: Option<BestSplit> = None;
    // Deterministic scan order regardless of how the subset was sampled.
    let mut features: Vec<usize> = features.to_vec();
    features.sort_unstable();
    for feature in features {
        let mut vals: Vec<(f64, bool)> = rows.iter().map(|&i| (x[i][feature], y[i])).collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let total_pos = vals.iter().filter(|(_, l)| *l).count();
        let mut left_pos = 0usize;
        let mut left_n = 0usize;
        for w in 0..total - 1 {
            if vals[w].1 {
                left_pos += 1;
            }
            left_n += 1;
            if vals[w].0 == vals[w + 1].0 {
                continue;
            }
            let right_n = total - left_n;
            let right_pos = total_pos - left_pos;
            let weighted = (left_n as f64 * gini(left_pos, left_n)
                + right_n as f64 * gini(right_pos, right_n))
                / total as f64;
            let decrease = node_gini - weighted;
            if decrease > 1e-12 && best.as_ref().is_none_or(|b| decrease > b.decrease) {
                best = Some(BestSplit {
                    feature,
                    threshold: (vals[w].0 + vals[w + 1].0) / 2.0,
                    decrease,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn striped(n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        // Feature 0 separates perfectly; feature 1 is constant.
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64, 3.0]).collect();
        let y: Vec<bool> = (0..n).map(|i| i >= n / 2).collect();
        (x, y)
    }

    #[test]
    fn perfect_split_claims_all_importance() {
        let (x, y) = striped(40);
        let forest = fit(&x, &y, &ForestParams::default(), 5);
        assert!(forest.importances[0] > 0.99);
        let sum: f64 = forest.importances.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(forest.vote_fraction(row) > 0.5, label);
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = striped(30);
        let a = fit(&x, &y, &ForestParams::default(), 9);
        let b = fit(&x, &y, &ForestParams::default(), 9);
        assert_eq!(a, b);
        let c = fit(&x, &y, &ForestParams::default(), 10);
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn vote_fraction_counts_trees() {
        let leaf_pos = Tree {
            nodes: vec![Node::Leaf { pos: 1, neg: 0 }],
        };
        let leaf_neg = Tree {
            nodes: vec![Node::Leaf { pos: 0, neg: 1 }],
        };
        let forest = Forest {
            trees: vec![leaf_pos.clone(), leaf_pos, leaf_neg],
            importances: vec![],
            n_features: 1,
        };
        assert!((forest.vote_fraction(&[0.0]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unsplittable_duplicates_become_a_mixed_leaf() {
        let x = vec![vec![1.0], vec![1.0]];
        let y = vec![true, false];
        let forest = fit(
            &x,
            &y,
            &ForestParams {
                trees: 1,
                bootstrap: false,
            },
            0,
        );
        assert_eq!(
            forest.trees[0].nodes,
            vec![Node::Leaf { pos: 1, neg: 1 }]
        );
        assert!(forest.importances.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicating_a_row_keeps_clean_predictions() {
        let (mut x, mut y) = striped(20);
        let forest = fit(&x, &y, &ForestParams::default(), 3);
        let probe = x[3].clone();
        assert!(!forest.vote_fraction(&probe).is_nan());
        let before = forest.vote_fraction(&probe) > 0.5;
        x.push(x[7].clone());
        y.push(y[7]);
        let forest2 = fit(&x, &y, &ForestParams::default(), 3);
        let after = forest2.vote_fraction(&probe) > 0.5;
        assert_eq!(before, after);
        assert!(!after, "probe sits in the clean half");
    }
}

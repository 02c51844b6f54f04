//! Bagged decision trees with random per-split feature subsets and Gini
//! splitting.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga_select::Chromosome;
use crate::linear_model::resolve_mask;
use crate::panel::LabeledDataset;
use crate::seeding::derive_seed_indexed;

/// Forest hyperparameters: 100 trees, depth 4, split at >= 2 samples,
/// minimum parent impurity 1e-7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_impurity_split: f64,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 100,
            max_depth: 4,
            min_samples_split: 2,
            min_impurity_split: 1e-7,
            seed: 0,
        }
    }
}

impl RfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 {
            return Err(Error::Contract("n_trees and max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// Decision-tree node: an internal split or a leaf holding the training
/// positive fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        positive_fraction: f64,
        samples: usize,
    },
}

impl TreeNode {
    fn score(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { positive_fraction, .. } => *positive_fraction,
            TreeNode::Internal { feature, threshold, left, right } => {
                if row[*feature] < *threshold {
                    left.score(row)
                } else {
                    right.score(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Trained forest; scores are means of per-tree leaf positive fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    trees: Vec<TreeNode>,
    mask: Vec<usize>,
    input_dim: usize,
    cfg: RfConfig,
}

impl RfModel {
    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn config(&self) -> &RfConfig {
        &self.cfg
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    let q = 1.0 - p;
    1.0 - p * p - q * q
}

/// Best Gini split over the candidate features, scanning midpoints between
/// consecutive distinct sorted values. Returns (feature, threshold,
/// impurity decrease), or None when the node is pure, too small, or below
/// the impurity gate. Ties break toward the lowest feature index, then the
/// lowest threshold.
pub fn best_split(
    x: &[&[f64]],
    y: &[u8],
    candidates: &[usize],
    min_samples_split: usize,
    min_impurity_split: f64,
) -> Option<(usize, f64, f64)> {
    let n = y.len();
    if n < 2 || n < min_samples_split || candidates.is_empty() {
        return None;
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    let parent = gini(positives, n);
    if parent <= min_impurity_split {
        return None;
    }
    let mut sorted_candidates = candidates.to_vec();
    sorted_candidates.sort_unstable();
    sorted_candidates.dedup();

    let mut best: Option<(usize, f64, f64)> = None;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for &feature in &sorted_candidates {
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| x[a][feature].partial_cmp(&x[b][feature]).unwrap());
        let mut left_pos = 0usize;
        for split_at in 1..n {
            let prev = order[split_at - 1];
            if y[prev] == 1 {
                left_pos += 1;
            }
            let (lo, hi) = (x[prev][feature], x[order[split_at]][feature]);
            if lo == hi {
                continue;
            }
            let threshold = lo + (hi - lo) / 2.0;
            let left_n = split_at;
            let right_n = n - split_at;
            let right_pos = positives - left_pos;
            let weighted = (left_n as f64 * gini(left_pos, left_n)
                + right_n as f64 * gini(right_pos, right_n))
                / n as f64;
            let decrease = parent - weighted;
            let better = match best {
                None => true,
                Some((bf, bt, bd)) => {
                    decrease > bd
                        || (decrease == bd && (feature < bf || (feature == bf && threshold < bt)))
                }
            };
            if better {
                best = Some((feature, threshold, decrease));
            }
        }
    }
    best
}

fn grow_tree(
    x: &[&[f64]],
    y: &[u8],
    rows: &[usize],
    depth: usize,
    n_candidates: usize,
    width: usize,
    cfg: &RfConfig,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let positives = rows.iter().filter(|&&i| y[i] == 1).count();
    let leaf = || TreeNode::Leaf {
        positive_fraction: positives as f64 / rows.len() as f64,
        samples: rows.len(),
    };
    if depth >= cfg.max_depth
        || rows.len() < cfg.min_samples_split
        || gini(positives, rows.len()) <= cfg.min_impurity_split
    {
        return leaf();
    }
    // fresh feature subset at every split (partial Fisher-Yates)
    let mut pool: Vec<usize> = (0..width).collect();
    for k in 0..n_candidates.min(width) {
        let j = rng.gen_range(k..width);
        pool.swap(k, j);
    }
    let candidates = &pool[..n_candidates.min(width)];

    let node_x: Vec<&[f64]> = rows.iter().map(|&i| x[i]).collect();
    let node_y: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
    match best_split(&node_x, &node_y, candidates, cfg.min_samples_split, cfg.min_impurity_split) {
        None => leaf(),
        Some((feature, threshold, _)) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x[i][feature] < threshold);
            let left = grow_tree(x, y, &left_rows, depth + 1, n_candidates, width, cfg, rng);
            let right = grow_tree(x, y, &right_rows, depth + 1, n_candidates, width, cfg, rng);
            TreeNode::Internal {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

/// Bootstrap row indices for one tree, reproducible from (seed, tree index).
pub fn bootstrap_rows(seed: u64, tree_index: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(seed, "rf-bootstrap", tree_index as u64));
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Train a forest: each tree grows on its own bootstrap resample with
/// ceil(sqrt(width)) candidate features at every split. Trees are seeded
/// independently, so parallel training gives the same forest as sequential.
pub fn train_rf(
    train: &LabeledDataset,
    cfg: &RfConfig,
    mask: Option<&Chromosome>,
) -> Result<RfModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    if !train.has_both_classes() {
        return Err(Error::Training("training set contains a single class".into()));
    }
    let input_dim = train.n_features();
    let mask_idx = resolve_mask(input_dim, mask)?;
    let width = mask_idx.len();
    let n_candidates = (width as f64).sqrt().ceil() as usize;
    let masked: Vec<Vec<f64>> = train
        .x
        .iter()
        .map(|row| mask_idx.iter().map(|&j| row[j]).collect())
        .collect();
    let refs: Vec<&[f64]> = masked.iter().map(Vec::as_slice).collect();
    let n = train.len();

    let trees: Vec<TreeNode> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|tree_index| {
            let rows = bootstrap_rows(cfg.seed, tree_index, n);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(
                cfg.seed,
                "rf-grow",
                tree_index as u64,
            ));
            grow_tree(&refs, &train.y, &rows, 0, n_candidates, width, cfg, &mut rng)
        })
        .collect();

    Ok(RfModel {
        trees,
        mask: mask_idx,
        input_dim,
        cfg: cfg.clone(),
    })
}

/// Score rows as the mean over trees of the leaf positive fraction reached.
pub fn predict_rf(model: &RfModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len());
    let mut masked = vec![0.0; model.mask.len()];
    for row in rows {
        if row.len() != model.input_dim {
            return Err(Error::Shape {
                expected: model.input_dim,
                found: row.len(),
            });
        }
        for (slot, &j) in masked.iter_mut().zip(&model.mask) {
            *slot = row[j];
        }
        let total: f64 = model.trees.iter().map(|t| t.score(&masked)).sum();
        out.push(total / model.trees.len() as f64);
    }
    Ok(out)
}

// SPDX-License-Identifier: Apache-2.0

//! Binary CART classifier with Gini impurity.

use serde::{Deserialize, Serialize};

use super::{MlError, Prediction};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until every leaf is pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probabilities: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    /// Root at index 0.
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl DecisionTreeModel {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    config: TreeConfig,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0, 0];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Lowest weighted child impurity; ties keep the earliest (feature, threshold).
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let min_leaf = self.config.min_samples_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.cols() {
            order.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]).then(a.cmp(&b)));
            let total = self.counts(&order);
            let mut left = [0usize; 2];
            for pos in 0..n - 1 {
                left[self.y[order[pos]]] += 1;
                let lo = self.x[(order[pos], f)];
                let hi = self.x[(order[pos + 1], f)];
                if lo == hi {
                    continue;
                }
                let nl = pos + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let score = (nl as f64 * gini(left) + nr as f64 * gini(right)) / n as f64;
                if best.map_or(true, |(s, _, _)| score < s - 1e-15) {
                    best = Some((score, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let n = idx.len() as f64;
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            probabilities: [counts[0] as f64 / n, counts[1] as f64 / n],
        });
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_ok = self.config.max_depth.map_or(true, |d| depth < d);
        if pure || !depth_ok {
            return slot;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[(i, feature)] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

/// Greedy CART with midpoint thresholds.
///
/// Impure nodes are split even when no candidate lowers the impurity, so an
/// unlimited-depth tree fits every consistent training set exactly.
pub fn fit_tree(x: &Matrix, y: &[usize], config: TreeConfig) -> Result<DecisionTreeModel, MlError> {
    if y.is_empty() || x.rows() == 0 {
        return Err(MlError::EmptyDataset);
    }
    if x.rows() != y.len() {
        return Err(MlError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(MlError::LabelOutOfRange(bad));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFiniteInput);
    }
    let mut b = Builder {
        x,
        y,
        config,
        nodes: Vec::new(),
    };
    b.grow((0..y.len()).collect(), 0);
    Ok(DecisionTreeModel {
        nodes: b.nodes,
        n_features: x.cols(),
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
    })
}

pub fn tree_predict(model: &DecisionTreeModel, x: &[f64]) -> Result<Prediction, MlError> {
    if x.len() != model.n_features {
        return Err(MlError::DimensionMismatch {
            expected: model.n_features,
            got: x.len(),
        });
    }
    let mut i = 0;
    loop {
        match &model.nodes[i] {
            TreeNode::Leaf { probabilities } => return Ok(Prediction::from_probabilities(*probabilities)),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => i = if x[*feature] <= *threshold { *left } else { *right },
        }
    }
}

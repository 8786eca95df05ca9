//! Binary decision tree over nominal features.
//!
//! Splits test `feature == category` against the rest and are chosen by gain
//! ratio among candidates whose information gain is at least the average
//! gain, as C4.5 does. Leaves convert their (weighted) class counts into
//! Laplace-corrected probabilities `(n_k + 1) / (n + K)`.

use serde::{Deserialize, Serialize};

use super::naive_bayes::{category, nominal_arities};
use super::normalized_weights;
use crate::data::Dataset;
use crate::{Error, ProbabilisticModel, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf_weight: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 12,
            min_leaf_weight: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: Vec<f64>,
        probs: Vec<f64>,
    },
    Split {
        feature: usize,
        category: usize,
        /// child for rows with `x[feature] == category`
        equal: usize,
        other: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_classes: usize,
    pub arities: Vec<usize>,
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { equal, other, .. } => 1 + walk(nodes, *equal).max(walk(nodes, *other)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

fn entropy(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

fn laplace(counts: &[f64]) -> Vec<f64> {
    let n: f64 = counts.iter().sum();
    let k = counts.len() as f64;
    counts.iter().map(|c| (c + 1.0) / (n + k)).collect()
}

struct Builder<'a> {
    data: &'a Dataset,
    arities: Vec<usize>,
    k: usize,
    cfg: TreeConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// `items` are `(row, target, weight)`.
    fn build(&mut self, items: &[(usize, usize, f64)], depth: usize) -> usize {
        let mut counts = vec![0.0; self.k];
        for &(_, y, w) in items {
            counts[y] += w;
        }
        let total: f64 = counts.iter().sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            probs: laplace(&counts),
            counts: counts.clone(),
        });
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if depth >= self.cfg.max_depth || pure || total < 2.0 * self.cfg.min_leaf_weight {
            return id;
        }
        let Some((feature, cat)) = self.best_split(items, &counts) else {
            return id;
        };
        let (eq, ne): (Vec<_>, Vec<_>) = items
            .iter()
            .partition(|&&(r, _, _)| self.data.value(r, feature) as usize == cat);
        let equal = self.build(&eq, depth + 1);
        let other = self.build(&ne, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            category: cat,
            equal,
            other,
        };
        id
    }

    fn best_split(&self, items: &[(usize, usize, f64)], counts: &[f64]) -> Option<(usize, usize)> {
        let total: f64 = counts.iter().sum();
        let base = entropy(counts);
        // (gain, ratio, feature, category)
        let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::new();
        for (f, &arity) in self.arities.iter().enumerate() {
            if arity < 2 {
                continue;
            }
            let mut per_cat = vec![vec![0.0; self.k]; arity];
            for &(r, y, w) in items {
                per_cat[self.data.value(r, f) as usize][y] += w;
            }
            for (c, left) in per_cat.iter().enumerate() {
                let nl: f64 = left.iter().sum();
                let nr = total - nl;
                if nl < self.cfg.min_leaf_weight || nr < self.cfg.min_leaf_weight {
                    continue;
                }
                let right: Vec<f64> = counts.iter().zip(left).map(|(t, l)| (t - l).max(0.0)).collect();
                let gain = base - (nl * entropy(left) + nr * entropy(&right)) / total;
                if gain <= 1e-12 {
                    continue;
                }
                let split_info = entropy(&[nl, nr]);
                candidates.push((gain, gain / split_info, f, c));
            }
        }
        if candidates.is_empty() {
            return None;
        }
        let mean_gain = candidates.iter().map(|c| c.0).sum::<f64>() / candidates.len() as f64;
        let mut best: Option<(f64, usize, usize)> = None;
        for &(gain, ratio, f, c) in &candidates {
            if gain + 1e-12 < mean_gain {
                continue;
            }
            if best.is_none_or(|b| ratio > b.0 + 1e-12) {
                best = Some((ratio, f, c));
            }
        }
        best.map(|(_, f, c)| (f, c))
    }
}

pub fn tree_fit(data: &Dataset, labeled_idx: &[usize], weights: &[f64], max_depth: usize) -> Result<TreeModel> {
    let targets = labeled_idx
        .iter()
        .map(|&i| data.require_label(i))
        .collect::<Result<Vec<_>>>()?;
    let cfg = TreeConfig {
        max_depth,
        ..TreeConfig::default()
    };
    TreeModel::fit(data, labeled_idx, &targets, weights, cfg)
}

pub fn tree_predict_proba(model: &TreeModel, row: &[f64]) -> Result<Vec<f64>> {
    model.predict_proba(row)
}

impl TreeModel {
    pub fn fit(data: &Dataset, rows: &[usize], targets: &[usize], weights: &[f64], cfg: TreeConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if rows.len() != targets.len() || rows.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "rows, targets and weights differ in length".into(),
            ));
        }
        let arities = nominal_arities(data)?;
        let k = data.n_classes();
        if let Some(&y) = targets.iter().find(|&&y| y >= k) {
            return Err(Error::InvalidArgument(format!("target {y} >= n_classes {k}")));
        }
        let w = normalized_weights(weights)?;
        let mut items: Vec<(usize, usize, f64)> = rows
            .iter()
            .zip(targets)
            .zip(&w)
            .map(|((&r, &y), &w)| (r, y, w))
            .collect();
        items.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut builder = Builder {
            data,
            arities: arities.clone(),
            k,
            cfg,
            nodes: Vec::new(),
        };
        builder.build(&items, 0);
        Ok(TreeModel {
            n_classes: k,
            arities,
            nodes: builder.nodes,
        })
    }
}

impl ProbabilisticModel for TreeModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.arities.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.arities.len()
            )));
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { probs, .. } => return Ok(probs.clone()),
                Node::Split {
                    feature,
                    category: c,
                    equal,
                    other,
                } => {
                    let v = category(row, *feature, self.arities[*feature])?;
                    i = if v == *c { *equal } else { *other };
                }
            }
        }
    }
}

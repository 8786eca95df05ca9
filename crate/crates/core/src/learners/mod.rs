//! Base classifiers and the probit family.

mod biprobit;
pub(crate) mod naive_bayes;
mod nn;
pub mod normal;
mod persist;
mod probit;
mod tree;

pub use biprobit::{
    biprobit_fit, biprobit_gradient, biprobit_log_likelihood, biprobit_predict_proba, BiprobitConfig,
    BivariateProbitModel,
};
pub use naive_bayes::{nb_fit, nb_predict_proba, NaiveBayesModel};
pub use nn::nn1_assign;
pub use normal::{bvn_cdf, inverse_mills};
pub use persist::{ModelDocument, MODEL_FORMAT_VERSION};
pub use probit::{probit_fit, probit_gradient, probit_log_likelihood, probit_predict_proba, ProbitModel};
pub use tree::{tree_fit, tree_predict_proba, Node, TreeConfig, TreeModel};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, ProbabilisticModel, Result};

/// A weighted, nominal-feature classifier that the semi-supervised wrappers
/// can refit on arbitrary row subsets and targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum BaseLearner {
    #[default]
    NaiveBayes,
    Tree(TreeConfig),
}

impl BaseLearner {
    pub fn tree() -> Self {
        BaseLearner::Tree(TreeConfig::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseLearner::NaiveBayes => "naive_bayes",
            BaseLearner::Tree(_) => "tree",
        }
    }

    /// Fits on `rows` of `data` with explicit `targets` (which need not be
    /// the dataset's own labels) and non-negative `weights`.
    pub fn fit(&self, data: &Dataset, rows: &[usize], targets: &[usize], weights: &[f64]) -> Result<FittedModel> {
        Ok(match self {
            BaseLearner::NaiveBayes => FittedModel::NaiveBayes(NaiveBayesModel::fit(data, rows, targets, weights)?),
            BaseLearner::Tree(cfg) => FittedModel::Tree(TreeModel::fit(data, rows, targets, weights, *cfg)?),
        })
    }

    /// Unit-weight fit against the dataset labels of `rows`.
    pub fn fit_labeled(&self, data: &Dataset, rows: &[usize]) -> Result<FittedModel> {
        let targets = rows
            .iter()
            .map(|&i| data.require_label(i))
            .collect::<Result<Vec<_>>>()?;
        self.fit(data, rows, &targets, &vec![1.0; rows.len()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", content = "model", rename_all = "snake_case")]
pub enum FittedModel {
    NaiveBayes(NaiveBayesModel),
    Tree(TreeModel),
}

impl ProbabilisticModel for FittedModel {
    fn n_classes(&self) -> usize {
        match self {
            FittedModel::NaiveBayes(m) => m.n_classes(),
            FittedModel::Tree(m) => m.n_classes(),
        }
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedModel::NaiveBayes(m) => m.predict_proba(row),
            FittedModel::Tree(m) => m.predict_proba(row),
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Rescales weights to sum to their count. The total is accumulated in
/// sorted order so the result does not depend on row order.
pub(crate) fn normalized_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidArgument(format!("invalid weight {w}")));
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    let scale = weights.len() as f64 / total;
    Ok(weights.iter().map(|w| w * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_normalize_to_count() {
        let w = normalized_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(w, vec![0.5, 1.5]);
        assert!(normalized_weights(&[0.0, 0.0]).is_err());
        assert!(normalized_weights(&[1.0, -1.0]).is_err());
        assert!(normalized_weights(&[f64::NAN]).is_err());
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.3, 0.3]), 1);
    }
}

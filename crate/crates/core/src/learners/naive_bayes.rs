use serde::{Deserialize, Serialize};

use super::normalized_weights;
use crate::data::Dataset;
use crate::{Error, ProbabilisticModel, Result};

/// Multinomial Naive Bayes over nominal features with add-one smoothing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub priors: Vec<f64>,
    /// `conditionals[feature][class][category]`
    pub conditionals: Vec<Vec<Vec<f64>>>,
}

/// Fits on the labeled rows `idx` using the dataset's own labels.
pub fn nb_fit(data: &Dataset, idx: &[usize], weights: &[f64]) -> Result<NaiveBayesModel> {
    let targets = idx.iter().map(|&i| data.require_label(i)).collect::<Result<Vec<_>>>()?;
    NaiveBayesModel::fit(data, idx, &targets, weights)
}

pub fn nb_predict_proba(model: &NaiveBayesModel, row: &[f64]) -> Result<Vec<f64>> {
    model.predict_proba(row)
}

impl NaiveBayesModel {
    /// Weighted fit of `rows` against `targets`.
    ///
    /// Weights are rescaled to sum to the number of rows before counting, so
    /// the model only depends on relative weights. With total weight `W`,
    /// class weight `W_k` and per-category weight `W_kc` the estimates are
    /// `(W_k + 1) / (W + K)` and `(W_kc + 1) / (W_k + arity)`.
    pub fn fit(data: &Dataset, rows: &[usize], targets: &[usize], weights: &[f64]) -> Result<Self> {
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
        let w = normalized_weights(weights)?;

        // fixed summation order regardless of input order
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| {
            (rows[a], targets[a])
                .cmp(&(rows[b], targets[b]))
                .then(w[a].total_cmp(&w[b]))
        });

        let mut class_w = vec![0.0; k];
        let mut counts: Vec<Vec<Vec<f64>>> = arities.iter().map(|&a| vec![vec![0.0; a]; k]).collect();
        for &o in &order {
            let (r, y, wt) = (rows[o], targets[o], w[o]);
            if y >= k {
                return Err(Error::InvalidArgument(format!("target {y} >= n_classes {k}")));
            }
            class_w[y] += wt;
            for (f, &v) in data.row(r).iter().enumerate() {
                counts[f][y][v as usize] += wt;
            }
        }
        let total: f64 = class_w.iter().sum();
        let priors = class_w.iter().map(|c| (c + 1.0) / (total + k as f64)).collect();
        let conditionals = counts
            .into_iter()
            .zip(&arities)
            .map(|(per_class, &a)| {
                per_class
                    .into_iter()
                    .zip(&class_w)
                    .map(|(cats, &wk)| cats.into_iter().map(|c| (c + 1.0) / (wk + a as f64)).collect())
                    .collect()
            })
            .collect();
        Ok(NaiveBayesModel { priors, conditionals })
    }
}

pub(crate) fn nominal_arities(data: &Dataset) -> Result<Vec<usize>> {
    data.meta()
        .iter()
        .enumerate()
        .map(|(f, kind)| {
            kind.arity().ok_or(Error::FeatureKind {
                index: f,
                expected: "nominal",
                found: "continuous",
            })
        })
        .collect()
}

pub(crate) fn category(row: &[f64], f: usize, arity: usize) -> Result<usize> {
    let v = row[f];
    if v >= 0.0 && v.fract() == 0.0 && (v as usize) < arity {
        Ok(v as usize)
    } else {
        Err(Error::CategoryOutOfRange {
            feature: f,
            value: v,
            arity,
        })
    }
}

/// Normalizes log-scores into probabilities.
pub(crate) fn softmax_logs(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

impl ProbabilisticModel for NaiveBayesModel {
    fn n_classes(&self) -> usize {
        self.priors.len()
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.conditionals.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.conditionals.len()
            )));
        }
        let mut logs: Vec<f64> = self.priors.iter().map(|p| p.ln()).collect();
        for (f, per_class) in self.conditionals.iter().enumerate() {
            let c = category(row, f, per_class[0].len())?;
            for (l, table) in logs.iter_mut().zip(per_class) {
                *l += table[c].ln();
            }
        }
        Ok(softmax_logs(&logs))
    }
}

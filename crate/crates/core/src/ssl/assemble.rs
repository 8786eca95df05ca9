//! ASSEMBLE: AdaBoost over labeled rows and pseudo-labeled unlabeled rows.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledSplit};
use crate::learners::{argmax, nn1_assign, BaseLearner, FittedModel};
use crate::rng::stream;
use crate::{Error, ProbabilisticModel, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoInit {
    /// Nearest labeled neighbour.
    Nn1,
    /// Majority class of the labeled rows.
    Class0,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembleConfig {
    pub alpha: f64,
    pub init: PseudoInit,
    pub t_max: usize,
    pub beta: f64,
    pub base: BaseLearner,
    pub seed: u64,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig {
            alpha: 1.0,
            init: PseudoInit::Nn1,
            t_max: 50,
            beta: 0.9,
            base: BaseLearner::NaiveBayes,
            seed: 0,
        }
    }
}

impl AssembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidArgument(format!("beta {} outside (0, 1)", self.beta)));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        Ok(())
    }
}

/// Step weight used when a base model makes no weighted error.
pub fn zero_error_weight() -> f64 {
    0.5 * 1e6f64.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembleModel {
    pub models: Vec<FittedModel>,
    pub weights: Vec<f64>,
    pub n_classes: usize,
    /// Pseudo-labels of the unlabeled rows at initialization.
    pub initial_pseudo: Vec<usize>,
    /// Weighted errors of the accepted iterations, then the stopping one if any.
    pub errors: Vec<f64>,
}

impl ProbabilisticModel for AssembleModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// `Σ w_t p_t / Σ w_t`
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_classes];
        let total: f64 = self.weights.iter().sum();
        for (m, w) in self.models.iter().zip(&self.weights) {
            for (o, p) in out.iter_mut().zip(m.predict_proba(row)?) {
                *o += w * p;
            }
        }
        for o in &mut out {
            *o /= total;
        }
        Ok(out)
    }
}

/// Majority class of the labeled rows, lowest class on ties.
pub fn majority_class(data: &Dataset, labeled: &[usize]) -> Result<usize> {
    let mut counts = vec![0usize; data.n_classes()];
    for &i in labeled {
        counts[data.require_label(i)?] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    Ok(best)
}

pub fn assemble_fit(data: &Dataset, split: &LabeledSplit, cfg: &AssembleConfig) -> Result<AssembleModel> {
    assemble_fit_observed(data, split, cfg, |_, _| {})
}

/// [`assemble_fit`] that hands every sampling distribution `D_t` (indexed
/// over labeled rows first, then unlabeled rows) to `observe`.
pub fn assemble_fit_observed(
    data: &Dataset,
    split: &LabeledSplit,
    cfg: &AssembleConfig,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<AssembleModel> {
    cfg.validate()?;
    let labeled = split.labeled();
    let unlabeled = split.unlabeled();
    if labeled.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let (l, u) = (labeled.len(), unlabeled.len());
    let pseudo = match cfg.init {
        PseudoInit::Nn1 => nn1_assign(data, labeled, unlabeled)?,
        PseudoInit::Class0 => vec![majority_class(data, labeled)?; u],
    };
    // rows 0..l are labeled, l..l+u unlabeled
    let rows: Vec<usize> = labeled.iter().chain(unlabeled).copied().collect();
    let mut targets: Vec<usize> = labeled
        .iter()
        .map(|&i| data.require_label(i))
        .collect::<Result<Vec<_>>>()?;
    targets.extend_from_slice(&pseudo);
    let cost: Vec<f64> = (0..l + u)
        .map(|i| if i < l { cfg.alpha } else { 1.0 - cfg.alpha })
        .collect();
    let mut dist: Vec<f64> = (0..l + u)
        .map(|i| {
            if u == 0 {
                1.0 / l as f64
            } else if i < l {
                cfg.beta / l as f64
            } else {
                (1.0 - cfg.beta) / u as f64
            }
        })
        .collect();

    let k = data.n_classes();
    let mut rng = stream(cfg.seed, "assemble");
    let mut model = AssembleModel {
        models: Vec::new(),
        weights: Vec::new(),
        n_classes: k,
        initial_pseudo: pseudo,
        errors: Vec::new(),
    };
    // running Σ w_t p_t(x_i) over all rows
    let mut scores = vec![vec![0.0; k]; l + u];
    for t in 0..cfg.t_max {
        observe(t, &dist);
        let sampler = WeightedIndex::new(&dist).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let picks: Vec<usize> = (0..l).map(|_| sampler.sample(&mut rng)).collect();
        let fitted = cfg.base.fit(
            data,
            &picks.iter().map(|&p| rows[p]).collect::<Vec<_>>(),
            &picks.iter().map(|&p| targets[p]).collect::<Vec<_>>(),
            &vec![1.0; l],
        )?;
        let probs: Vec<Vec<f64>> = rows
            .iter()
            .map(|&r| fitted.predict_proba(data.row(r)))
            .collect::<Result<_>>()?;
        let wrong: Vec<bool> = probs.iter().zip(&targets).map(|(p, &y)| argmax(p) != y).collect();
        let num: f64 = (0..l + u).filter(|&i| wrong[i]).map(|i| dist[i] * cost[i]).sum();
        let den: f64 = (0..l + u).map(|i| dist[i] * cost[i]).sum();
        let eps = num / den;
        model.errors.push(eps);
        if eps >= 0.5 {
            if t == 0 {
                model.models.push(fitted);
                model.weights.push(1.0);
            }
            break;
        }
        let w = if eps == 0.0 {
            zero_error_weight()
        } else {
            0.5 * ((1.0 - eps) / eps).ln()
        };
        for (s, p) in scores.iter_mut().zip(&probs) {
            for (a, b) in s.iter_mut().zip(p) {
                *a += w * b;
            }
        }
        model.models.push(fitted);
        model.weights.push(w);

        for i in l..l + u {
            targets[i] = argmax(&scores[i]);
        }
        let mut total = 0.0;
        for i in 0..l + u {
            let margin = if argmax(&probs[i]) == targets[i] { 1.0 } else { -1.0 };
            dist[i] *= (-w * margin).exp();
            total += dist[i];
        }
        for d in &mut dist {
            *d /= total;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureKind;

    fn toy() -> (Dataset, LabeledSplit) {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64, (i % 2) as f64]).collect();
        let labels: Vec<Option<usize>> = (0..30)
            .map(|i| if i < 12 { Some(usize::from(i % 3 != 0)) } else { None })
            .collect();
        let d = Dataset::new(
            "toy",
            vec![FeatureKind::Nominal { arity: 3 }, FeatureKind::Nominal { arity: 2 }],
            rows,
            labels,
            2,
        )
        .unwrap();
        let s = LabeledSplit::from_labels(&d);
        (d, s)
    }

    #[test]
    fn class0_init_uses_majority() {
        let (d, s) = toy();
        let cfg = AssembleConfig {
            init: PseudoInit::Class0,
            t_max: 3,
            ..AssembleConfig::default()
        };
        let m = assemble_fit(&d, &s, &cfg).unwrap();
        assert!(m.initial_pseudo.iter().all(|&c| c == 1));
    }

    #[test]
    fn ensemble_probabilities_are_distributions() {
        let (d, s) = toy();
        let cfg = AssembleConfig {
            alpha: 0.7,
            t_max: 10,
            ..AssembleConfig::default()
        };
        let m = assemble_fit(&d, &s, &cfg).unwrap();
        assert!(!m.models.is_empty());
        for r in d.rows() {
            let p = m.predict_proba(r).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_distribution_stays_valid() {
        let (d, s) = toy();
        let cfg = AssembleConfig {
            alpha: 0.4,
            t_max: 20,
            ..AssembleConfig::default()
        };
        let mut seen = 0;
        assemble_fit_observed(&d, &s, &cfg, |_, dist| {
            seen += 1;
            assert!(dist.iter().all(|&p| p >= 0.0));
            assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        })
        .unwrap();
        assert!(seen >= 1);
    }

    #[test]
    fn invalid_config_rejected() {
        let (d, s) = toy();
        for cfg in [
            AssembleConfig {
                alpha: 0.0,
                ..Default::default()
            },
            AssembleConfig {
                beta: 1.0,
                ..Default::default()
            },
            AssembleConfig {
                t_max: 0,
                ..Default::default()
            },
        ] {
            assert!(assemble_fit(&d, &s, &cfg).is_err());
        }
    }
}

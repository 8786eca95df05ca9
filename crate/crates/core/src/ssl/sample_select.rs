//! Sample-Select: model the labeling process and hand its posterior to the
//! outcome model as an extra feature.

use serde::{Deserialize, Serialize};

use crate::data::{bin_of, mdl_cuts, Dataset, FeatureKind, LabeledSplit};
use crate::learners::{BaseLearner, FittedModel};
use crate::{Error, ProbabilisticModel, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSelectModel {
    /// Predicts the labeled indicator (class 1 = labeled).
    pub selection: FittedModel,
    /// Cut points binning the selection posterior into the extra feature.
    pub cuts: Vec<f64>,
    pub outcome: FittedModel,
}

impl SampleSelectModel {
    pub fn selection_score(&self, row: &[f64]) -> Result<f64> {
        Ok(self.selection.predict_proba(row)?[1])
    }

    /// `row` with the binned selection posterior appended.
    pub fn augment_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut out = row.to_vec();
        out.push(bin_of(self.selection_score(row)?, &self.cuts) as f64);
        Ok(out)
    }

    /// Every row of `data` with the derived feature appended.
    pub fn augment(&self, data: &Dataset) -> Result<Dataset> {
        let column = data
            .rows()
            .map(|r| Ok(bin_of(self.selection_score(r)?, &self.cuts) as f64))
            .collect::<Result<Vec<_>>>()?;
        data.append_feature(
            "p_labeled",
            FeatureKind::Nominal {
                arity: self.cuts.len() + 1,
            },
            &column,
        )
    }
}

impl ProbabilisticModel for SampleSelectModel {
    fn n_classes(&self) -> usize {
        self.outcome.n_classes()
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.outcome.predict_proba(&self.augment_row(row)?)
    }
}

pub fn sample_select_fit(data: &Dataset, split: &LabeledSplit, base: &BaseLearner) -> Result<SampleSelectModel> {
    let labeled = split.labeled();
    if labeled.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if split.unlabeled().is_empty() {
        return Err(Error::InvalidSplit(
            "labeled indicator is constant: no unlabeled rows".into(),
        ));
    }
    let mut indicator_data = data.clone();
    indicator_data.set_n_classes(2);
    let all: Vec<usize> = (0..data.n_rows()).collect();
    let indicator: Vec<usize> = split.indicator().into_iter().map(usize::from).collect();
    let selection = base.fit(&indicator_data, &all, &indicator, &vec![1.0; all.len()])?;

    let scores = labeled
        .iter()
        .map(|&i| Ok(selection.predict_proba(data.row(i))?[1]))
        .collect::<Result<Vec<_>>>()?;
    let targets = labeled
        .iter()
        .map(|&i| data.require_label(i))
        .collect::<Result<Vec<_>>>()?;
    let cuts = mdl_cuts(&scores, &targets, data.n_classes());
    let mut model = SampleSelectModel {
        selection,
        cuts,
        outcome: FittedModel::NaiveBayes(Default::default()),
    };
    let augmented = model.augment(data)?;
    model.outcome = base.fit(&augmented, labeled, &targets, &vec![1.0; labeled.len()])?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Dataset, LabeledSplit) {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 4) as f64, (i % 3 % 2) as f64]).collect();
        let labels: Vec<Option<usize>> = (0..60)
            .map(|i| (i % 5 != 0).then_some(usize::from(i % 4 >= 2)))
            .collect();
        let d = Dataset::new(
            "ss",
            vec![FeatureKind::Nominal { arity: 4 }, FeatureKind::Nominal { arity: 2 }],
            rows,
            labels,
            2,
        )
        .unwrap();
        let s = LabeledSplit::from_labels(&d);
        (d, s)
    }

    #[test]
    fn augmentation_adds_one_feature_and_keeps_the_rest() {
        let (d, s) = toy();
        let m = sample_select_fit(&d, &s, &BaseLearner::NaiveBayes).unwrap();
        let a = m.augment(&d).unwrap();
        assert_eq!(a.n_features(), d.n_features() + 1);
        for i in 0..d.n_rows() {
            let (orig, aug) = (d.row(i), a.row(i));
            assert_eq!(
                orig.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                aug[..2].iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            let p = m.selection_score(orig).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        let p = m.predict_proba(d.row(0)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn all_labeled_is_error() {
        let (d, _) = toy();
        let d = d.with_labels(vec![Some(0); 60]).unwrap();
        let s = LabeledSplit::all_labeled(&d).unwrap();
        assert!(sample_select_fit(&d, &s, &BaseLearner::NaiveBayes).is_err());
    }
}

//! Tabular datasets, labeled/unlabeled partitions and discretization.

mod csv;
mod discretize;

pub use self::csv::{load_table, parse_table, save_table, write_table};
pub use self::discretize::{apply_cuts, bin_of, discretize_mdl, mdl_cuts, DiscretizationMap};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    /// Category indices `0..arity`. Columns produced by discretization may
    /// carry a single bin; loaded columns always have `arity >= 2`.
    Nominal {
        arity: usize,
    },
}

impl FeatureKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, FeatureKind::Continuous)
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            FeatureKind::Continuous => None,
            FeatureKind::Nominal { arity } => Some(*arity),
        }
    }

    pub(crate) fn describe(&self) -> &'static str {
        match self {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Nominal { .. } => "nominal",
        }
    }
}

/// Immutable feature table with optional class labels.
///
/// Values are stored row-major. Nominal values are category indices held as
/// `f64`. Continuous columns may hold `NaN` for a missing value; only the
/// target binarization step consumes those, every learner rejects them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    class_name: String,
    meta: Vec<FeatureKind>,
    values: Vec<f64>,
    labels: Vec<Option<usize>>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        meta: Vec<FeatureKind>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Option<usize>>,
        n_classes: usize,
    ) -> Result<Self> {
        let width = meta.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(name, meta, values, labels, n_classes)
    }

    pub fn from_flat(
        name: impl Into<String>,
        meta: Vec<FeatureKind>,
        values: Vec<f64>,
        labels: Vec<Option<usize>>,
        n_classes: usize,
    ) -> Result<Self> {
        let feature_names = (0..meta.len()).map(|f| format!("x{f}")).collect();
        let data = Dataset {
            name: name.into(),
            feature_names,
            class_name: "class".to_string(),
            meta,
            values,
            labels,
            n_classes,
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        let width = self.meta.len();
        if self.n_classes < 2 {
            return Err(Error::InvalidDataset("need at least two classes".into()));
        }
        if width == 0 {
            if !self.values.is_empty() {
                return Err(Error::InvalidDataset("values without features".into()));
            }
        } else if self.values.len() != self.labels.len() * width {
            return Err(Error::InvalidDataset(format!(
                "{} values for {} rows of width {width}",
                self.values.len(),
                self.labels.len()
            )));
        }
        if self.feature_names.len() != width {
            return Err(Error::InvalidDataset("feature name count mismatch".into()));
        }
        for (f, kind) in self.meta.iter().enumerate() {
            if let FeatureKind::Nominal { arity } = *kind {
                if arity == 0 {
                    return Err(Error::InvalidDataset(format!("feature {f} has arity 0")));
                }
                for i in 0..self.n_rows() {
                    let v = self.value(i, f);
                    if !(v >= 0.0 && v.fract() == 0.0 && (v as usize) < arity) {
                        return Err(Error::CategoryOutOfRange {
                            feature: f,
                            value: v,
                            arity,
                        });
                    }
                }
            }
        }
        for (i, y) in self.labels.iter().enumerate() {
            if let Some(y) = y {
                if *y >= self.n_classes {
                    return Err(Error::InvalidDataset(format!(
                        "row {i}: label {y} >= n_classes {}",
                        self.n_classes
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn with_feature_names(mut self, names: Vec<String>, class_name: String) -> Result<Self> {
        if names.len() != self.meta.len() {
            return Err(Error::InvalidDataset("feature name count mismatch".into()));
        }
        self.feature_names = names;
        self.class_name = class_name;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.meta.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn meta(&self) -> &[FeatureKind] {
        &self.meta
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.meta.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.values[i * self.meta.len() + f]
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.value(i, f)).collect()
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    /// Label of row `i`, or an error naming the row when it is missing.
    pub fn require_label(&self, i: usize) -> Result<usize> {
        self.labels[i].ok_or_else(|| Error::InvalidSplit(format!("row {i} has no label")))
    }

    pub fn all_nominal(&self) -> bool {
        self.meta.iter().all(|k| !k.is_continuous())
    }

    pub fn has_missing_values(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    pub fn continuous_features(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&f| self.meta[f].is_continuous())
            .collect()
    }

    /// Same schema, replaced labels.
    pub fn with_labels(&self, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != self.n_rows() {
            return Err(Error::InvalidDataset("label count mismatch".into()));
        }
        let mut out = self.clone();
        out.labels = labels;
        out.validate()?;
        Ok(out)
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(idx.len() * self.n_features());
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            class_name: self.class_name.clone(),
            meta: self.meta.clone(),
            values,
            labels,
            n_classes: self.n_classes,
        }
    }

    /// New dataset with one extra trailing column.
    pub fn append_feature(&self, name: impl Into<String>, kind: FeatureKind, column: &[f64]) -> Result<Dataset> {
        if column.len() != self.n_rows() {
            return Err(Error::InvalidDataset("appended column length mismatch".into()));
        }
        let w = self.n_features();
        let mut values = Vec::with_capacity(self.n_rows() * (w + 1));
        for (i, &v) in column.iter().enumerate() {
            values.extend_from_slice(self.row(i));
            values.push(v);
        }
        let mut meta = self.meta.clone();
        meta.push(kind);
        let mut feature_names = self.feature_names.clone();
        feature_names.push(name.into());
        let out = Dataset {
            name: self.name.clone(),
            feature_names,
            class_name: self.class_name.clone(),
            meta,
            values,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        };
        out.validate()?;
        Ok(out)
    }

    /// Replaces the columns and schema while keeping names, labels and row
    /// count.
    pub(crate) fn with_columns(&self, meta: Vec<FeatureKind>, values: Vec<f64>) -> Result<Dataset> {
        let mut out = self.clone();
        out.meta = meta;
        out.values = values;
        out.validate()?;
        Ok(out)
    }

    /// Drops column `f`, returning the reduced dataset and the removed values.
    pub(crate) fn remove_column(&self, f: usize) -> (Dataset, Vec<f64>) {
        let w = self.n_features();
        let mut values = Vec::with_capacity(self.n_rows() * (w - 1));
        let mut removed = Vec::with_capacity(self.n_rows());
        for i in 0..self.n_rows() {
            for (g, &v) in self.row(i).iter().enumerate() {
                if g == f {
                    removed.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        let mut meta = self.meta.clone();
        meta.remove(f);
        let mut feature_names = self.feature_names.clone();
        feature_names.remove(f);
        let out = Dataset {
            name: self.name.clone(),
            feature_names,
            class_name: self.class_name.clone(),
            meta,
            values,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        };
        (out, removed)
    }

    pub(crate) fn set_n_classes(&mut self, k: usize) {
        self.n_classes = k;
    }
}

/// Disjoint labeled / unlabeled partition of a training set's rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSplit {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl LabeledSplit {
    /// Builds a split over `data`. Index lists are sorted; the split must be
    /// a partition of `0..n` and every labeled row must carry a label.
    pub fn new(data: &Dataset, mut labeled: Vec<usize>, mut unlabeled: Vec<usize>) -> Result<Self> {
        labeled.sort_unstable();
        unlabeled.sort_unstable();
        let n = data.n_rows();
        let mut seen = vec![false; n];
        for &i in labeled.iter().chain(unlabeled.iter()) {
            if i >= n {
                return Err(Error::InvalidSplit(format!("index {i} out of range")));
            }
            if seen[i] {
                return Err(Error::InvalidSplit(format!("index {i} appears twice")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidSplit("split does not cover every row".into()));
        }
        for &i in &labeled {
            data.require_label(i)?;
        }
        Ok(LabeledSplit { labeled, unlabeled })
    }

    /// Labeled iff the row carries a label.
    pub fn from_labels(data: &Dataset) -> Self {
        let (labeled, unlabeled) = (0..data.n_rows()).partition(|&i| data.label(i).is_some());
        LabeledSplit { labeled, unlabeled }
    }

    pub fn all_labeled(data: &Dataset) -> Result<Self> {
        Self::new(data, (0..data.n_rows()).collect(), Vec::new())
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn n_rows(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn labeled_fraction(&self) -> f64 {
        self.labeled.len() as f64 / self.n_rows().max(1) as f64
    }

    /// Per-row labeled indicator.
    pub fn indicator(&self) -> Vec<bool> {
        let mut s = vec![false; self.n_rows()];
        for &i in &self.labeled {
            s[i] = true;
        }
        s
    }

    /// `data` with the labels of unlabeled rows hidden.
    pub fn mask(&self, data: &Dataset) -> Result<Dataset> {
        let mut labels = data.labels().to_vec();
        for &i in &self.unlabeled {
            labels[i] = None;
        }
        data.with_labels(labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::new(
            "t",
            vec![FeatureKind::Continuous, FeatureKind::Nominal { arity: 3 }],
            vec![vec![0.5, 0.0], vec![1.5, 2.0], vec![-1.0, 1.0]],
            vec![Some(0), Some(1), None],
            2,
        )
        .unwrap()
    }

    #[test]
    fn rejects_category_out_of_range() {
        let err = Dataset::new(
            "t",
            vec![FeatureKind::Nominal { arity: 2 }],
            vec![vec![2.0]],
            vec![Some(0)],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CategoryOutOfRange { .. }));
    }

    #[test]
    fn rejects_label_out_of_range() {
        let err = Dataset::new("t", vec![FeatureKind::Continuous], vec![vec![0.0]], vec![Some(2)], 2);
        assert!(err.is_err());
    }

    #[test]
    fn split_must_partition() {
        let d = small();
        assert!(LabeledSplit::new(&d, vec![0, 1], vec![2]).is_ok());
        assert!(LabeledSplit::new(&d, vec![0, 1], vec![1, 2]).is_err());
        assert!(LabeledSplit::new(&d, vec![0], vec![2]).is_err());
        // row 2 has no label
        assert!(LabeledSplit::new(&d, vec![0, 2], vec![1]).is_err());
    }

    #[test]
    fn split_from_labels_follows_missing_marker() {
        let s = LabeledSplit::from_labels(&small());
        assert_eq!(s.labeled(), &[0, 1]);
        assert_eq!(s.unlabeled(), &[2]);
    }

    #[test]
    fn append_and_remove_column() {
        let d = small();
        let a = d
            .append_feature("p", FeatureKind::Continuous, &[0.1, 0.2, 0.3])
            .unwrap();
        assert_eq!(a.n_features(), 3);
        assert_eq!(a.row(1), &[1.5, 2.0, 0.2]);
        let (b, removed) = a.remove_column(2);
        assert_eq!(b, d);
        assert_eq!(removed, vec![0.1, 0.2, 0.3]);
    }
}

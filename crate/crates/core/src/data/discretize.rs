//! Recursive entropy discretization with the minimum-description-length
//! stopping rule (Fayyad & Irani).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind};
use crate::{Error, Result};

/// Cut points per continuous feature of the dataset the map was built from.
///
/// A value `v` falls in bin `#{c : c <= v}`: values below a cut go left,
/// values equal to or above it go right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationMap {
    source_meta: Vec<FeatureKind>,
    cuts: BTreeMap<usize, Vec<f64>>,
}

impl DiscretizationMap {
    pub fn new(source_meta: Vec<FeatureKind>, cuts: BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        let expected: Vec<usize> = (0..source_meta.len())
            .filter(|&f| source_meta[f].is_continuous())
            .collect();
        if cuts.keys().copied().collect::<Vec<_>>() != expected {
            return Err(Error::MetaMismatch);
        }
        for c in cuts.values() {
            if c.windows(2).any(|w| w[0] >= w[1]) || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "cut points must be finite and strictly increasing".into(),
                ));
            }
        }
        Ok(DiscretizationMap { source_meta, cuts })
    }

    pub fn cuts(&self, feature: usize) -> Option<&[f64]> {
        self.cuts.get(&feature).map(Vec::as_slice)
    }

    pub fn features(&self) -> impl Iterator<Item = usize> + '_ {
        self.cuts.keys().copied()
    }

    pub fn source_meta(&self) -> &[FeatureKind] {
        &self.source_meta
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

/// Bin index of `value` under `cuts`.
pub fn bin_of(value: f64, cuts: &[f64]) -> usize {
    cuts.partition_point(|&c| c <= value)
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

fn n_present(counts: &[f64]) -> usize {
    counts.iter().filter(|&&c| c > 0.0).count()
}

/// Class histogram per distinct value, values ascending.
struct Histogram {
    values: Vec<f64>,
    counts: Vec<Vec<f64>>,
}

impl Histogram {
    fn build(values: &[f64], classes: &[usize], k: usize) -> Self {
        let mut pairs: Vec<(f64, usize)> = values
            .iter()
            .zip(classes)
            .filter(|(v, _)| !v.is_nan())
            .map(|(&v, &c)| (v, c))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Histogram {
            values: Vec::new(),
            counts: Vec::new(),
        };
        for (v, c) in pairs {
            if out.values.last() != Some(&v) {
                out.values.push(v);
                out.counts.push(vec![0.0; k]);
            }
            out.counts.last_mut().unwrap()[c] += 1.0;
        }
        out
    }

    /// Whether the gap after distinct value `i` is a class boundary: the two
    /// neighbouring values are not both pure in the same class.
    fn is_boundary(&self, i: usize) -> bool {
        let single = |c: &[f64]| {
            let mut it = c.iter().enumerate().filter(|(_, &x)| x > 0.0);
            match (it.next(), it.next()) {
                (Some((j, _)), None) => Some(j),
                _ => None,
            }
        };
        match (single(&self.counts[i]), single(&self.counts[i + 1])) {
            (Some(a), Some(b)) => a != b,
            _ => true,
        }
    }

    fn split(&self, lo: usize, hi: usize, cuts: &mut Vec<f64>) {
        if hi - lo < 2 {
            return;
        }
        let k = self.counts[0].len();
        let mut total = vec![0.0; k];
        for c in &self.counts[lo..hi] {
            for (t, x) in total.iter_mut().zip(c) {
                *t += x;
            }
        }
        let n: f64 = total.iter().sum();
        let ent = entropy(&total);
        if ent == 0.0 {
            return;
        }

        let mut left = vec![0.0; k];
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for i in lo..hi - 1 {
            for (l, x) in left.iter_mut().zip(&self.counts[i]) {
                *l += x;
            }
            if !self.is_boundary(i) {
                continue;
            }
            let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let nl: f64 = left.iter().sum();
            let e = (nl * entropy(&left) + (n - nl) * entropy(&right)) / n;
            if best.as_ref().is_none_or(|b| e < b.0) {
                best = Some((e, i, left.clone()));
            }
        }
        let Some((split_ent, i, left)) = best else {
            return;
        };
        let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
        let gain = ent - split_ent;
        let (k0, k1, k2) = (
            n_present(&total) as f64,
            n_present(&left) as f64,
            n_present(&right) as f64,
        );
        let delta = (3f64.powf(k0) - 2.0).log2() - (k0 * ent - k1 * entropy(&left) - k2 * entropy(&right));
        let threshold = (n - 1.0).log2() / n + delta / n;
        if gain <= threshold {
            return;
        }
        cuts.push(0.5 * (self.values[i] + self.values[i + 1]));
        self.split(lo, i + 1, cuts);
        self.split(i + 1, hi, cuts);
    }
}

/// MDL-accepted cut points for one feature, ascending.
pub fn mdl_cuts(values: &[f64], classes: &[usize], n_classes: usize) -> Vec<f64> {
    let hist = Histogram::build(values, classes, n_classes);
    if hist.values.len() < 2 {
        return Vec::new();
    }
    let mut cuts = Vec::new();
    hist.split(0, hist.values.len(), &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

/// Builds cut points for every continuous feature from the labeled rows
/// `idx`. Features the criterion never splits get an empty cut list.
pub fn discretize_mdl(data: &Dataset, idx: &[usize]) -> Result<DiscretizationMap> {
    if idx.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let classes = idx.iter().map(|&i| data.require_label(i)).collect::<Result<Vec<_>>>()?;
    let mut cuts = BTreeMap::new();
    for f in data.continuous_features() {
        let values: Vec<f64> = idx.iter().map(|&i| data.value(i, f)).collect();
        cuts.insert(f, mdl_cuts(&values, &classes, data.n_classes()));
    }
    DiscretizationMap::new(data.meta().to_vec(), cuts)
}

/// Replaces each continuous column with its bin index. The map must have
/// been built for a dataset with the same schema, so an already discretized
/// dataset is rejected rather than binned twice.
pub fn apply_cuts(data: &Dataset, map: &DiscretizationMap) -> Result<Dataset> {
    if data.meta() != map.source_meta() {
        return Err(Error::MetaMismatch);
    }
    let meta: Vec<FeatureKind> = data
        .meta()
        .iter()
        .enumerate()
        .map(|(f, kind)| match map.cuts(f) {
            Some(c) => FeatureKind::Nominal { arity: c.len() + 1 },
            None => *kind,
        })
        .collect();
    let mut values = Vec::with_capacity(data.n_rows() * data.n_features());
    for i in 0..data.n_rows() {
        for (f, &v) in data.row(i).iter().enumerate() {
            match map.cuts(f) {
                Some(c) => {
                    if v.is_nan() {
                        return Err(Error::InvalidDataset(format!("row {i}, feature {f}: missing value")));
                    }
                    values.push(bin_of(v, c) as f64);
                }
                None => values.push(v),
            }
        }
    }
    data.with_columns(meta, values)
}

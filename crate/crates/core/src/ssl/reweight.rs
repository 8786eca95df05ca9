//! Re-weighting: extrapolate the labeled class mix of each score band onto
//! the unlabeled rows of that band.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledSplit};
use crate::learners::{BaseLearner, FittedModel};
use crate::rng::stream;
use crate::{Error, ProbabilisticModel, Result};

/// Sampling weight `(L + U) / L` of a band and the number of its `U`
/// unlabeled rows to assign to each class.
///
/// Class `k` receives `c_k U / L` rows (its weighted count minus its observed
/// count), rounded by largest remainder so the quotas add up to `U`; equal
/// remainders favour the lower class.
pub fn group_quotas(labeled_counts: &[usize], n_unlabeled: usize) -> Option<(f64, Vec<usize>)> {
    let l: usize = labeled_counts.iter().sum();
    if l == 0 {
        return None;
    }
    let weight = (l + n_unlabeled) as f64 / l as f64;
    // exact integer arithmetic: c_k U = q_k L + r_k
    let mut quotas: Vec<usize> = labeled_counts.iter().map(|&c| c * n_unlabeled / l).collect();
    let rem: Vec<usize> = labeled_counts.iter().map(|&c| c * n_unlabeled % l).collect();
    let short = n_unlabeled - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..labeled_counts.len()).collect();
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    for &k in order.iter().take(short) {
        quotas[k] += 1;
    }
    Some((weight, quotas))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub labeled: usize,
    pub unlabeled: usize,
    /// `None` for a band without labeled rows.
    pub weight: Option<f64>,
    pub quotas: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReweightResult {
    /// `(row, class)` for every unlabeled row given a label.
    pub added: Vec<(usize, usize)>,
    pub bands: Vec<BandSummary>,
    pub edges: Vec<f64>,
    pub model: FittedModel,
}

impl ReweightResult {
    /// Labeled rows followed by the newly labeled ones.
    pub fn expanded(&self, data: &Dataset, split: &LabeledSplit) -> Result<Vec<(usize, usize)>> {
        let mut out = split
            .labeled()
            .iter()
            .map(|&i| Ok((i, data.require_label(i)?)))
            .collect::<Result<Vec<_>>>()?;
        out.extend_from_slice(&self.added);
        Ok(out)
    }
}

impl ProbabilisticModel for ReweightResult {
    fn n_classes(&self) -> usize {
        self.model.n_classes()
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.model.predict_proba(row)
    }
}

/// Equal-frequency band edges over the labeled scores: the last score of
/// each of the first `n_bins - 1` chunks of the sorted list, deduplicated.
pub fn band_edges(labeled_scores: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = labeled_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let l = sorted.len();
    let mut edges: Vec<f64> = (1..n_bins)
        .filter_map(|j| {
            let end = j * l / n_bins;
            (end >= 1 && end < l).then(|| sorted[end - 1])
        })
        .collect();
    edges.dedup();
    edges
}

/// Band of `score`: the number of edges strictly below it. Scores outside
/// the labeled range fall into the end bands.
pub fn band_of(score: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e < score)
}

pub fn reweight_expand(
    data: &Dataset,
    split: &LabeledSplit,
    base: &BaseLearner,
    n_bins: usize,
    seed: u64,
) -> Result<ReweightResult> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be at least 1".into()));
    }
    let labeled = split.labeled();
    if labeled.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let targets = labeled
        .iter()
        .map(|&i| data.require_label(i))
        .collect::<Result<Vec<_>>>()?;
    let initial = base.fit(data, labeled, &targets, &vec![1.0; labeled.len()])?;
    let score = |i: usize| -> Result<f64> { Ok(initial.predict_proba(data.row(i))?[1]) };
    let l_scores = labeled.iter().map(|&i| score(i)).collect::<Result<Vec<_>>>()?;
    let edges = band_edges(&l_scores, n_bins);
    let n_bands = edges.len() + 1;
    let k = data.n_classes();

    let mut counts = vec![vec![0usize; k]; n_bands];
    for (s, &y) in l_scores.iter().zip(&targets) {
        counts[band_of(*s, &edges)][y] += 1;
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bands];
    for &u in split.unlabeled() {
        members[band_of(score(u)?, &edges)].push(u);
    }

    let mut rng = stream(seed, "reweight");
    let mut added = Vec::new();
    let mut bands = Vec::with_capacity(n_bands);
    for (band, mut rows) in members.into_iter().enumerate() {
        let l_j: usize = counts[band].iter().sum();
        let Some((weight, quotas)) = group_quotas(&counts[band], rows.len()) else {
            bands.push(BandSummary {
                labeled: 0,
                unlabeled: rows.len(),
                weight: None,
                quotas: vec![0; k],
            });
            continue;
        };
        rows.shuffle(&mut rng);
        let mut it = rows.iter();
        for (c, &q) in quotas.iter().enumerate() {
            added.extend(it.by_ref().take(q).map(|&r| (r, c)));
        }
        bands.push(BandSummary {
            labeled: l_j,
            unlabeled: rows.len(),
            weight: Some(weight),
            quotas,
        });
    }
    added.sort_unstable();

    let mut rows: Vec<usize> = labeled.to_vec();
    let mut ys = targets;
    for &(r, c) in &added {
        rows.push(r);
        ys.push(c);
    }
    let model = base.fit(data, &rows, &ys, &vec![1.0; rows.len()])?;
    Ok(ReweightResult {
        added,
        bands,
        edges,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_band_example() {
        let (w, q) = group_quotas(&[10, 90], 20).unwrap();
        assert!((w - 1.2).abs() < 1e-15);
        assert_eq!(q, vec![2, 18]);
    }

    #[test]
    fn empty_bands() {
        assert_eq!(group_quotas(&[10, 90], 0).unwrap().1, vec![0, 0]);
        assert!(group_quotas(&[0, 0], 5).is_none());
    }

    #[test]
    fn fractional_quotas_use_largest_remainder() {
        // weight 1.15: raw quotas 1.5 and 13.5, tie on remainder goes low
        let (w, q) = group_quotas(&[10, 90], 15).unwrap();
        assert!((w - 1.15).abs() < 1e-15);
        assert_eq!(q, vec![2, 13]);
        // 7 unlabeled over 3/3/4: raw 2.1, 2.1, 2.8
        assert_eq!(group_quotas(&[3, 3, 4], 7).unwrap().1, vec![2, 2, 3]);
        for u in 0..40 {
            let q = group_quotas(&[7, 11, 2], u).unwrap().1;
            assert_eq!(q.iter().sum::<usize>(), u);
        }
    }

    #[test]
    fn band_assignment() {
        let scores: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let edges = band_edges(&scores, 4);
        assert_eq!(edges, vec![0.2, 0.45, 0.7]);
        assert_eq!(band_of(-1.0, &edges), 0);
        assert_eq!(band_of(0.2, &edges), 0);
        assert_eq!(band_of(0.21, &edges), 1);
        assert_eq!(band_of(2.0, &edges), 3);
        assert!(band_edges(&scores, 1).is_empty());
    }
}

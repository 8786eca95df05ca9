use crate::data::{Dataset, FeatureKind};
use crate::{Error, Result};

/// Labels each unlabeled row with the class of its nearest labeled row.
///
/// Continuous features are z-scored with the labeled rows' mean and standard
/// deviation. Nominal features act as one-hot blocks, so a category mismatch
/// contributes 2 to the squared distance. Exact ties go to the lowest row
/// index.
pub fn nn1_assign(data: &Dataset, labeled_idx: &[usize], unlabeled_idx: &[usize]) -> Result<Vec<usize>> {
    if labeled_idx.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut labeled: Vec<usize> = labeled_idx.to_vec();
    labeled.sort_unstable();
    labeled.dedup();
    let labels = labeled
        .iter()
        .map(|&i| data.require_label(i))
        .collect::<Result<Vec<_>>>()?;

    let n = labeled.len() as f64;
    let scales: Vec<Option<(f64, f64)>> = data
        .meta()
        .iter()
        .enumerate()
        .map(|(f, kind)| match kind {
            FeatureKind::Nominal { .. } => None,
            FeatureKind::Continuous => {
                let mean = labeled.iter().map(|&i| data.value(i, f)).sum::<f64>() / n;
                let var = labeled.iter().map(|&i| (data.value(i, f) - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                Some((mean, if sd > 0.0 { sd } else { 1.0 }))
            }
        })
        .collect();

    let encode = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .zip(&scales)
            .map(|(&v, s)| match s {
                Some((m, sd)) => (v - m) / sd,
                None => v,
            })
            .collect()
    };
    let train: Vec<Vec<f64>> = labeled.iter().map(|&i| encode(data.row(i))).collect();

    let out = unlabeled_idx
        .iter()
        .map(|&u| {
            let x = encode(data.row(u));
            let mut best = (f64::INFINITY, 0usize);
            for (j, t) in train.iter().enumerate() {
                let d = distance(&x, t, &scales);
                // strict comparison keeps the earliest (lowest index) row
                if d < best.0 {
                    best = (d, j);
                }
            }
            labels[best.1]
        })
        .collect();
    Ok(out)
}

fn distance(a: &[f64], b: &[f64], scales: &[Option<(f64, f64)>]) -> f64 {
    a.iter()
        .zip(b)
        .zip(scales)
        .map(|((x, y), s)| match s {
            Some(_) => {
                let d = x - y;
                if d.is_nan() {
                    0.0
                } else {
                    d * d
                }
            }
            None => {
                if x == y {
                    0.0
                } else {
                    2.0
                }
            }
        })
        .sum()
}

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// ROC points from `(0, 0)` to `(1, 1)`, one per distinct score threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
            .sum()
    }
}

pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    if scores.len() != positive.len() {
        return Err(Error::InvalidArgument("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    // exact endpoint regardless of rounding in the divisions above
    *points.last_mut().unwrap() = (1.0, 1.0);
    Ok(RocCurve { points })
}

/// Area under the ROC curve, ties between a positive and a negative counted
/// as one half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    Ok(roc_curve(scores, positive)?.area())
}

/// `2 · auc - 1`: 1 for a perfect ranking, 0 for random, -1 for reversed.
pub fn auc_normalized(scores: &[f64], positive: &[bool]) -> Result<f64> {
    Ok(2.0 * auc(scores, positive)? - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert_eq!(
            auc_normalized(&[0.9, 0.8, 0.7, 0.6], &[true, true, false, false]).unwrap(),
            1.0
        );
        assert_eq!(
            auc_normalized(&[0.9, 0.8, 0.7, 0.6], &[false, false, true, true]).unwrap(),
            -1.0
        );
        // pairs (0.9>0.8), (0.9>0.6), (0.7<0.8), (0.7>0.6): 3 of 4
        let a = auc(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((a - 0.75).abs() < 1e-15);
        assert!((auc_normalized(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert_eq!(
            auc_normalized(&[1.0; 6], &[true, false, true, false, false, true]).unwrap(),
            0.0
        );
    }

    #[test]
    fn curve_is_monotone_with_exact_ends() {
        let c = roc_curve(&[0.3, 0.1, 0.7, 0.7, 0.2], &[true, false, false, true, true]).unwrap();
        assert_eq!(c.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
        assert!(c.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    }

    #[test]
    fn single_class_is_error() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
    }
}

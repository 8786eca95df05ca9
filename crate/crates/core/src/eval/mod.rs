//! ROC/AUC and the significance tests used for bias diagnostics and
//! technique comparison.

mod roc;
mod tests;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use roc::{auc, auc_normalized, roc_curve, RocCurve};
pub use tests::{chi2_sf, chi2_test, kolmogorov_q, kruskal_wallis, ks_two_sample, midranks, rank_sum_test, TestResult};

use crate::data::{Dataset, FeatureKind, LabeledSplit};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wtl {
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
}

impl Wtl {
    pub fn total(&self) -> usize {
        self.win + self.tie + self.loss
    }
}

impl fmt::Display for Wtl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.win, self.tie, self.loss)
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Outcome of one technique against the baseline in one dataset cell.
///
/// NaN entries (failed runs) are dropped from each sample before the
/// rank-sum test; a cell left without finite values on either side is a tie.
pub fn compare_runs(technique: &[f64], baseline: &[f64], alpha: f64) -> Result<std::cmp::Ordering> {
    use std::cmp::Ordering;
    if technique.len() != baseline.len() {
        return Err(Error::InvalidArgument(format!(
            "run counts differ: {} vs {}",
            technique.len(),
            baseline.len()
        )));
    }
    let t: Vec<f64> = technique.iter().copied().filter(|v| !v.is_nan()).collect();
    let b: Vec<f64> = baseline.iter().copied().filter(|v| !v.is_nan()).collect();
    if t.is_empty() || b.is_empty() {
        return Ok(Ordering::Equal);
    }
    let r = rank_sum_test(&t, &b)?;
    if r.p_value >= alpha {
        return Ok(Ordering::Equal);
    }
    let (mt, mb) = (median(&t), median(&b));
    Ok(if mt > mb {
        Ordering::Greater
    } else if mt < mb {
        Ordering::Less
    } else if r.statistic > t.len() as f64 * b.len() as f64 / 2.0 {
        Ordering::Greater
    } else {
        Ordering::Less
    })
}

/// Win-tie-loss counts of every technique against `baseline`.
///
/// `cells` maps a dataset cell (for example dataset and labeled fraction) to
/// per-technique run AUCs. In every cell a technique wins when the two-sided
/// rank-sum test rejects at `alpha` and its median is higher, loses when the
/// test rejects and its median is lower, and ties otherwise.
pub fn wtl_tally(
    cells: &BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    baseline: &str,
    alpha: f64,
) -> Result<BTreeMap<String, Wtl>> {
    use std::cmp::Ordering;
    let mut out: BTreeMap<String, Wtl> = BTreeMap::new();
    for (cell, per_technique) in cells {
        let Some(base) = per_technique.get(baseline) else {
            return Err(Error::InvalidArgument(format!("cell {cell} has no {baseline} runs")));
        };
        for (name, runs) in per_technique {
            if name == baseline {
                continue;
            }
            let entry = out.entry(name.clone()).or_default();
            match compare_runs(runs, base, alpha)
                .map_err(|e| Error::InvalidArgument(format!("cell {cell}, technique {name}: {e}")))?
            {
                Ordering::Greater => entry.win += 1,
                Ordering::Less => entry.loss += 1,
                Ordering::Equal => entry.tie += 1,
            }
        }
    }
    Ok(out)
}

/// Labeled-versus-unlabeled comparison of one feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureShift {
    pub feature: usize,
    pub name: String,
    /// `"ks"` for continuous features, `"chi2"` for nominal ones.
    pub test: String,
    pub result: TestResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub dataset: String,
    pub features: Vec<FeatureShift>,
}

impl BiasReport {
    pub fn n_different(&self) -> usize {
        self.features.iter().filter(|f| f.result.reject_at_05).count()
    }

    /// `"p out of q different"`
    pub fn summary(&self) -> String {
        format!("{} out of {} different", self.n_different(), self.features.len())
    }
}

/// Tests every feature for a distribution difference between the labeled
/// and unlabeled rows: KS on continuous features, chi-squared on the
/// pool-by-category table of nominal ones.
pub fn bias_report(data: &Dataset, split: &LabeledSplit) -> Result<BiasReport> {
    if split.labeled().is_empty() || split.unlabeled().is_empty() {
        return Err(Error::InvalidSplit(
            "bias report needs labeled and unlabeled rows".into(),
        ));
    }
    let features = data
        .meta()
        .iter()
        .enumerate()
        .map(|(f, kind)| {
            let lab: Vec<f64> = split.labeled().iter().map(|&i| data.value(i, f)).collect();
            let unl: Vec<f64> = split.unlabeled().iter().map(|&i| data.value(i, f)).collect();
            let (test, result) = match kind {
                FeatureKind::Continuous => ("ks", ks_two_sample(&lab, &unl)?),
                FeatureKind::Nominal { arity } => {
                    let mut table = vec![vec![0.0; *arity]; 2];
                    for (row, vals) in table.iter_mut().zip([&lab, &unl]) {
                        for &v in vals {
                            row[v as usize] += 1.0;
                        }
                    }
                    ("chi2", chi2_test(&table)?)
                }
            };
            Ok(FeatureShift {
                feature: f,
                name: data.feature_names()[f].clone(),
                test: test.to_string(),
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BiasReport {
        dataset: data.name().to_string(),
        features,
    })
}

#[cfg(test)]
mod unit {
    use super::*;

    fn cells(delta: f64, n_datasets: usize) -> BTreeMap<String, BTreeMap<String, Vec<f64>>> {
        (0..n_datasets)
            .map(|d| {
                let base: Vec<f64> = (0..10).map(|r| 0.5 + 0.01 * ((r * 7 + d) % 10) as f64).collect();
                let tech: Vec<f64> = base.iter().map(|v| v + delta).collect();
                let mut m = BTreeMap::new();
                m.insert("supervised".to_string(), base);
                m.insert("cc".to_string(), tech);
                (format!("ds{d}"), m)
            })
            .collect()
    }

    #[test]
    fn identical_runs_tie() {
        let t = wtl_tally(&cells(0.0, 4), "supervised", 0.05).unwrap();
        assert_eq!(
            t["cc"],
            Wtl {
                win: 0,
                tie: 4,
                loss: 0
            }
        );
    }

    #[test]
    fn separated_runs_win_everywhere() {
        let t = wtl_tally(&cells(0.3, 10), "supervised", 0.05).unwrap();
        assert_eq!(t["cc"].to_string(), "10-0-0");
        let t = wtl_tally(&cells(-0.3, 10), "supervised", 0.05).unwrap();
        assert_eq!(t["cc"].to_string(), "0-0-10");
        assert_eq!(t["cc"].total(), 10);
    }

    #[test]
    fn mismatched_runs_rejected() {
        let mut c = cells(0.1, 1);
        c.get_mut("ds0").unwrap().get_mut("cc").unwrap().pop();
        assert!(wtl_tally(&c, "supervised", 0.05).is_err());
    }
}

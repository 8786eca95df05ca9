//! Common-component mixture fitted by EM on labeled and unlabeled rows.
//!
//! One set of `M` components models `p(x)`: diagonal Gaussians over the
//! continuous features and add-one smoothed categorical tables over the
//! nominal ones. Classes attach to components through `β_{k|j}`, so
//! `p(y = k | x) = Σ_j p(j | x) β_{k|j}`.
//!
//! The smoothing of the categorical tables is the MAP estimate under a
//! Dirichlet(2) prior, so the quantity EM increases is the data
//! log-likelihood plus `Σ log θ` over all table entries. That is what
//! [`CCMixtureModel::objective_history`] records; with continuous features
//! only it equals the log-likelihood.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, LabeledSplit};
use crate::learners::naive_bayes::{category, softmax_logs};
use crate::rng::stream;
use crate::{Error, ProbabilisticModel, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureDensity {
    Gaussian { mean: f64, variance: f64 },
    Categorical { probs: Vec<f64> },
}

impl FeatureDensity {
    fn log_density(&self, f: usize, v: f64) -> Result<f64> {
        match self {
            FeatureDensity::Gaussian { mean, variance } => {
                if v.is_nan() {
                    return Ok(0.0);
                }
                let d = v - mean;
                Ok(-0.5 * ((2.0 * std::f64::consts::PI * variance).ln() + d * d / variance))
            }
            FeatureDensity::Categorical { probs } => {
                Ok(
                    probs[category(&[v], 0, probs.len()).map_err(|_| Error::CategoryOutOfRange {
                        feature: f,
                        value: v,
                        arity: probs.len(),
                    })?]
                    .ln(),
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub densities: Vec<FeatureDensity>,
}

impl Component {
    pub fn log_density(&self, row: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for (f, (d, &v)) in self.densities.iter().zip(row).enumerate() {
            s += d.log_density(f, v)?;
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CCMixtureModel {
    pub n_classes: usize,
    pub pi: Vec<f64>,
    pub components: Vec<Component>,
    /// `beta[j][k] = p(y = k | component j)`
    pub beta: Vec<Vec<f64>>,
    /// Data log-likelihood at the current parameters.
    pub log_likelihood: f64,
    /// EM objective after each E-step, starting from the initialization.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl CCMixtureModel {
    pub fn n_components(&self) -> usize {
        self.pi.len()
    }

    fn check_width(&self, row: &[f64]) -> Result<()> {
        let w = self.components[0].densities.len();
        if row.len() != w {
            return Err(Error::InvalidArgument(format!(
                "row has {} features, model expects {w}",
                row.len()
            )));
        }
        Ok(())
    }

    /// `log π_j + log p(x | j)` per component.
    fn joint_logs(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_width(row)?;
        self.pi
            .iter()
            .zip(&self.components)
            .map(|(p, c)| Ok(p.ln() + c.log_density(row)?))
            .collect()
    }

    /// `Σ log θ` over all categorical table entries.
    pub fn log_prior(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| &c.densities)
            .map(|d| match d {
                FeatureDensity::Categorical { probs } => probs.iter().map(|p| p.ln()).sum(),
                FeatureDensity::Gaussian { .. } => 0.0,
            })
            .sum()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_split(data: &Dataset, split: &LabeledSplit) -> Result<()> {
    if split.n_rows() != data.n_rows() {
        return Err(Error::InvalidSplit(format!(
            "split covers {} rows, dataset has {}",
            split.n_rows(),
            data.n_rows()
        )));
    }
    Ok(())
}

/// Responsibilities and data log-likelihood.
fn e_step(model: &CCMixtureModel, data: &Dataset, split: &LabeledSplit) -> Result<(Vec<Vec<f64>>, f64)> {
    check_split(data, split)?;
    let labeled = split.indicator();
    let rows = crate::par::map_indexed(data.n_rows(), |i| -> Result<(Vec<f64>, f64)> {
        let mut logs = model.joint_logs(data.row(i))?;
        if labeled[i] {
            let y = data.require_label(i)?;
            for (l, b) in logs.iter_mut().zip(&model.beta) {
                *l += b[y].ln();
            }
        }
        let z = log_sum_exp(&logs);
        let r = if z.is_finite() {
            logs.iter().map(|l| (l - z).exp()).collect()
        } else {
            vec![1.0 / logs.len() as f64; logs.len()]
        };
        Ok((r, z))
    });
    let mut ll = 0.0;
    let mut resp = Vec::with_capacity(data.n_rows());
    for row in rows {
        let (r, z) = row?;
        ll += z;
        resp.push(r);
    }
    Ok((resp, ll))
}

/// Posterior component memberships: labeled rows use `π_j β_{y|j} p(x|j)`,
/// unlabeled rows `π_j p(x|j)`, each normalized in log space.
pub fn cc_e_step(model: &CCMixtureModel, data: &Dataset, split: &LabeledSplit) -> Result<Vec<Vec<f64>>> {
    Ok(e_step(model, data, split)?.0)
}

struct GlobalStats {
    means: Vec<f64>,
    variances: Vec<f64>,
    tables: Vec<Vec<f64>>,
}

fn global_stats(data: &Dataset) -> GlobalStats {
    let p = data.n_features();
    let mut means = vec![0.0; p];
    let mut variances = vec![1.0; p];
    let mut tables = vec![Vec::new(); p];
    for (f, kind) in data.meta().iter().enumerate() {
        match kind {
            FeatureKind::Continuous => {
                let vals: Vec<f64> = data.rows().map(|r| r[f]).filter(|v| !v.is_nan()).collect();
                if !vals.is_empty() {
                    let n = vals.len() as f64;
                    let m = vals.iter().sum::<f64>() / n;
                    means[f] = m;
                    variances[f] = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).max(VARIANCE_FLOOR);
                }
            }
            FeatureKind::Nominal { arity } => {
                let mut counts = vec![1.0; *arity];
                for r in data.rows() {
                    if let Some(c) = counts.get_mut(r[f] as usize) {
                        *c += 1.0;
                    }
                }
                let t: f64 = counts.iter().sum();
                tables[f] = counts.into_iter().map(|c| c / t).collect();
            }
        }
    }
    GlobalStats {
        means,
        variances,
        tables,
    }
}

/// Component centred on `row`: its continuous values as means with global
/// variances, and categorical tables halfway between the global frequencies
/// and the row's own categories.
fn seeded_component(data: &Dataset, stats: &GlobalStats, row: usize) -> Component {
    let x = data.row(row);
    let densities = data
        .meta()
        .iter()
        .enumerate()
        .map(|(f, kind)| match kind {
            FeatureKind::Continuous => FeatureDensity::Gaussian {
                mean: if x[f].is_nan() { stats.means[f] } else { x[f] },
                variance: stats.variances[f],
            },
            FeatureKind::Nominal { .. } => FeatureDensity::Categorical {
                probs: stats.tables[f]
                    .iter()
                    .enumerate()
                    .map(|(c, g)| 0.5 * g + if c == x[f] as usize { 0.5 } else { 0.0 })
                    .collect(),
            },
        })
        .collect();
    Component { densities }
}

/// Parameter update from responsibilities. Components with zero total
/// responsibility are re-seeded on a random row drawn from `seed`.
pub fn cc_m_step(resp: &[Vec<f64>], data: &Dataset, split: &LabeledSplit, seed: u64) -> Result<CCMixtureModel> {
    check_split(data, split)?;
    let n = data.n_rows();
    if resp.len() != n || n == 0 {
        return Err(Error::InvalidArgument(
            "responsibility matrix does not match the data".into(),
        ));
    }
    let m = resp[0].len();
    if m == 0 || resp.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("ragged responsibility matrix".into()));
    }
    let k = data.n_classes();
    let labeled = split.indicator();
    let mut stats: Option<GlobalStats> = None;
    let mut rng = stream(seed, "cc-reseed");

    let mut pi = Vec::with_capacity(m);
    let mut components = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    for j in 0..m {
        let total: f64 = resp.iter().map(|r| r[j]).sum();
        if total <= 0.0 {
            let s = stats.get_or_insert_with(|| global_stats(data));
            let row = rng.random_range(0..n);
            components.push(seeded_component(data, s, row));
            pi.push(1.0 / n as f64);
            beta.push(vec![1.0 / k as f64; k]);
            continue;
        }
        pi.push(total / n as f64);

        let mut class_mass = vec![0.0; k];
        for (i, r) in resp.iter().enumerate() {
            if labeled[i] {
                class_mass[data.require_label(i)?] += r[j];
            }
        }
        let lab_total: f64 = class_mass.iter().sum();
        beta.push(if lab_total > 0.0 {
            class_mass.iter().map(|c| c / lab_total).collect()
        } else {
            vec![1.0 / k as f64; k]
        });

        let densities = data
            .meta()
            .iter()
            .enumerate()
            .map(|(f, kind)| match kind {
                FeatureKind::Continuous => {
                    let (mut w, mut s) = (0.0, 0.0);
                    for (r, row) in resp.iter().zip(data.rows()) {
                        if !row[f].is_nan() {
                            w += r[j];
                            s += r[j] * row[f];
                        }
                    }
                    if w <= 0.0 {
                        let g = stats.get_or_insert_with(|| global_stats(data));
                        return FeatureDensity::Gaussian {
                            mean: g.means[f],
                            variance: g.variances[f],
                        };
                    }
                    let mean = s / w;
                    let mut ss = 0.0;
                    for (r, row) in resp.iter().zip(data.rows()) {
                        if !row[f].is_nan() {
                            ss += r[j] * (row[f] - mean).powi(2);
                        }
                    }
                    FeatureDensity::Gaussian {
                        mean,
                        variance: (ss / w).max(VARIANCE_FLOOR),
                    }
                }
                FeatureKind::Nominal { arity } => {
                    let mut counts = vec![1.0; *arity];
                    for (r, row) in resp.iter().zip(data.rows()) {
                        counts[row[f] as usize] += r[j];
                    }
                    let t: f64 = counts.iter().sum();
                    FeatureDensity::Categorical {
                        probs: counts.into_iter().map(|c| c / t).collect(),
                    }
                }
            })
            .collect();
        components.push(Component { densities });
    }
    let z: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= z;
    }
    Ok(CCMixtureModel {
        n_classes: k,
        pi,
        components,
        beta,
        log_likelihood: f64::NAN,
        objective_history: Vec::new(),
        iterations: 0,
        converged: false,
    })
}

/// Seeded starting point: `m` distinct random rows as component centres,
/// uniform `π`, and `β` equal to the labeled class frequencies.
pub fn cc_init(data: &Dataset, split: &LabeledSplit, m: usize, seed: u64) -> Result<CCMixtureModel> {
    check_split(data, split)?;
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if data.n_rows() < m {
        return Err(Error::InvalidArgument(format!(
            "{} rows cannot seed {m} components",
            data.n_rows()
        )));
    }
    let stats = global_stats(data);
    let mut rng = stream(seed, "cc-init");
    let mut centres = sample(&mut rng, data.n_rows(), m).into_vec();
    centres.sort_unstable();
    let k = data.n_classes();
    let mut freq = vec![0.0; k];
    for &i in split.labeled() {
        freq[data.require_label(i)?] += 1.0;
    }
    let t: f64 = freq.iter().sum();
    let class_freq: Vec<f64> = if t > 0.0 {
        freq.iter().map(|c| c / t).collect()
    } else {
        vec![1.0 / k as f64; k]
    };
    Ok(CCMixtureModel {
        n_classes: k,
        pi: vec![1.0 / m as f64; m],
        components: centres.iter().map(|&r| seeded_component(data, &stats, r)).collect(),
        beta: vec![class_freq; m],
        log_likelihood: f64::NAN,
        objective_history: Vec::new(),
        iterations: 0,
        converged: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CCConfig {
    pub m: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CCConfig {
    fn default() -> Self {
        CCConfig {
            m: 6,
            max_iter: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// EM from [`cc_init`] until the relative objective improvement drops below
/// `tol` or `max_iter` updates have run.
pub fn cc_fit(
    data: &Dataset,
    split: &LabeledSplit,
    m: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<CCMixtureModel> {
    let mut model = cc_init(data, split, m, seed)?;
    let (mut resp, mut ll) = e_step(&model, data, split)?;
    let mut objective = ll + model.log_prior();
    let mut history = vec![objective];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let next = cc_m_step(&resp, data, split, seed.wrapping_add(iterations as u64))?;
        let (r, l) = e_step(&next, data, split)?;
        let obj = l + next.log_prior();
        history.push(obj);
        let improvement = (obj - objective) / objective.abs().max(f64::MIN_POSITIVE);
        model = next;
        resp = r;
        ll = l;
        objective = obj;
        if improvement < tol {
            converged = true;
            break;
        }
    }
    model.log_likelihood = ll;
    model.objective_history = history;
    model.iterations = iterations;
    model.converged = converged;
    Ok(model)
}

/// `Σ_j p(j | x) β_{·|j}` with `p(j | x) ∝ π_j p(x | j)`.
pub fn cc_predict_proba(model: &CCMixtureModel, row: &[f64]) -> Result<Vec<f64>> {
    let post = softmax_logs(&model.joint_logs(row)?);
    let mut out = vec![0.0; model.n_classes];
    for (p, b) in post.iter().zip(&model.beta) {
        for (o, bk) in out.iter_mut().zip(b) {
            *o += p * bk;
        }
    }
    Ok(out)
}

impl ProbabilisticModel for CCMixtureModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        cc_predict_proba(self, row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(mean: f64) -> Component {
        Component {
            densities: vec![FeatureDensity::Gaussian { mean, variance: 1.0 }],
        }
    }

    fn hand_model() -> CCMixtureModel {
        CCMixtureModel {
            n_classes: 2,
            pi: vec![0.5, 0.5],
            components: vec![gaussian(0.0), gaussian(1.0)],
            beta: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            log_likelihood: f64::NAN,
            objective_history: vec![],
            iterations: 0,
            converged: false,
        }
    }

    fn one_d(values: &[f64], labels: Vec<Option<usize>>) -> (Dataset, LabeledSplit) {
        let d = Dataset::new(
            "cc",
            vec![FeatureKind::Continuous],
            values.iter().map(|&v| vec![v]).collect(),
            labels,
            2,
        )
        .unwrap();
        let s = LabeledSplit::from_labels(&d);
        (d, s)
    }

    #[test]
    fn symmetric_point_has_equal_responsibilities() {
        let (d, s) = one_d(&[0.5], vec![None]);
        let r = cc_e_step(&hand_model(), &d, &s).unwrap();
        assert!((r[0][0] - 0.5).abs() < 1e-15);
        assert!((r[0][1] - 0.5).abs() < 1e-15);
        let p = cc_predict_proba(&hand_model(), &[0.5]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_component_collapses() {
        let (d, s) = one_d(&[0.1, 2.0, -1.0, 5.0], vec![Some(1), Some(1), None, None]);
        let m = cc_fit(&d, &s, 1, 50, 1e-9, 3).unwrap();
        assert_eq!(m.beta[0], vec![0.0, 1.0]);
        for r in cc_e_step(&m, &d, &s).unwrap() {
            assert_eq!(r, vec![1.0]);
        }
        assert_eq!(cc_predict_proba(&m, &[100.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn hard_responsibilities_give_plain_means() {
        let (d, s) = one_d(
            &[1.0, 2.0, 3.0, 10.0, 14.0],
            vec![Some(0), None, Some(0), Some(1), None],
        );
        let resp = vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ];
        let m = cc_m_step(&resp, &d, &s, 0).unwrap();
        assert!((m.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(
            m.components[0].densities[0],
            FeatureDensity::Gaussian {
                mean: 2.0,
                variance: 2.0 / 3.0
            }
        );
        assert_eq!(
            m.components[1].densities[0],
            FeatureDensity::Gaussian {
                mean: 12.0,
                variance: 4.0
            }
        );
        assert_eq!(m.beta, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn beta_ignores_unlabeled_rows() {
        let (d, s) = one_d(&[1.0, 2.0, 3.0, 4.0], vec![Some(0), None, Some(1), None]);
        let resp = vec![vec![0.7, 0.3], vec![0.1, 0.9], vec![0.4, 0.6], vec![0.5, 0.5]];
        let full = cc_m_step(&resp, &d, &s, 0).unwrap();
        let keep = [0usize, 2];
        let (d2, s2) = one_d(&[1.0, 3.0], vec![Some(0), Some(1)]);
        let resp2: Vec<Vec<f64>> = keep.iter().map(|&i| resp[i].clone()).collect();
        let reduced = cc_m_step(&resp2, &d2, &s2, 0).unwrap();
        assert_eq!(full.beta, reduced.beta);
    }

    #[test]
    fn zero_responsibility_component_is_reseeded() {
        let (d, s) = one_d(&[1.0, 2.0, 3.0], vec![Some(0), None, Some(1)]);
        let resp = vec![vec![1.0, 0.0]; 3];
        let m = cc_m_step(&resp, &d, &s, 42).unwrap();
        assert!(m.pi[1] > 0.0);
        assert!((m.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        let (d, s) = one_d(&[1.0, 2.0], vec![Some(0), Some(1)]);
        assert!(cc_fit(&d, &s, 3, 10, 1e-6, 0).is_err());
    }

    #[test]
    fn mixed_features_ascend() {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let c = (i % 2) as f64;
                vec![c * 3.0 + ((i * 37) % 17) as f64 / 17.0, ((i / 2) % 3) as f64]
            })
            .collect();
        let labels: Vec<Option<usize>> = (0..200).map(|i| (i % 5 == 0).then_some(i % 2)).collect();
        let d = Dataset::new(
            "mix",
            vec![FeatureKind::Continuous, FeatureKind::Nominal { arity: 3 }],
            rows,
            labels,
            2,
        )
        .unwrap();
        let s = LabeledSplit::from_labels(&d);
        let m = cc_fit(&d, &s, 4, 100, 1e-9, 1).unwrap();
        assert!(m.objective_history.windows(2).all(|w| w[1] >= w[0] - 1e-8));
        for j in 0..4 {
            if let FeatureDensity::Categorical { probs } = &m.components[j].densities[1] {
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

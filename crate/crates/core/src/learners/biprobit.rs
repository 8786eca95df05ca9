//! Bivariate probit with sample selection.
//!
//! The outcome equation `y* = β'x + u1` is observed only where the selection
//! equation `s* = γ'x + u2` is positive, with `corr(u1, u2) = ρ`. The
//! likelihood of a selected row is `Φ2(qβ'x, γ'x, qρ)` with `q = 2y - 1` and
//! that of an unselected row is `Φ(-γ'x)`.

use serde::{Deserialize, Serialize};

use super::normal::{bvn_cdf, bvn_pdf, cdf, inverse_mills, log_cdf, pdf};
use super::probit::{check_width, probit_fit, CompensatedSum};
use crate::synth::linear_index;
use crate::{Error, ProbabilisticModel, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiprobitConfig {
    pub max_iter: usize,
    /// Bound on the max-norm of the per-row mean gradient.
    pub tol: f64,
}

impl Default for BiprobitConfig {
    fn default() -> Self {
        BiprobitConfig {
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateProbitModel {
    /// Outcome coefficients, intercept last.
    pub beta: Vec<f64>,
    /// Selection coefficients, intercept last.
    pub gamma: Vec<f64>,
    pub rho: f64,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood at the independent-probit starting point.
    pub initial_log_likelihood: f64,
}

impl BivariateProbitModel {
    /// `[β, γ, atanh ρ]`
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.extend_from_slice(&self.gamma);
        v.push(self.rho.atanh());
        v
    }
}

/// Marginal outcome probability `Φ(β'x)`, not conditioned on selection.
pub fn biprobit_predict_proba(model: &BivariateProbitModel, row: &[f64]) -> Result<f64> {
    check_width(row.len() + 1, model.beta.len())?;
    Ok(cdf(linear_index(&model.beta, row)))
}

impl ProbabilisticModel for BivariateProbitModel {
    fn n_classes(&self) -> usize {
        2
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let p = biprobit_predict_proba(self, row)?;
        Ok(vec![1.0 - p, p])
    }
}

const TINY: f64 = 1e-300;

fn split_params(theta: &[f64], k: usize) -> (&[f64], &[f64], f64) {
    (&theta[..k], &theta[k..2 * k], theta[2 * k].tanh())
}

/// Log-likelihood at `theta = [β, γ, atanh ρ]`. `y` is read only where `s`
/// is set.
pub fn biprobit_log_likelihood(theta: &[f64], x: &[&[f64]], y: &[bool], s: &[bool]) -> f64 {
    let k = (theta.len() - 1) / 2;
    let (beta, gamma, rho) = split_params(theta, k);
    x.iter()
        .zip(y.iter().zip(s))
        .map(|(row, (&yi, &si))| {
            let g = linear_index(gamma, row);
            if si {
                let q = if yi { 1.0 } else { -1.0 };
                bvn_cdf(q * linear_index(beta, row), g, q * rho).max(TINY).ln()
            } else {
                log_cdf(-g)
            }
        })
        .sum()
}

/// Analytic gradient with respect to `[β, γ, atanh ρ]`.
pub fn biprobit_gradient(theta: &[f64], x: &[&[f64]], y: &[bool], s: &[bool]) -> Vec<f64> {
    let k = (theta.len() - 1) / 2;
    let (beta, gamma, rho) = split_params(theta, k);
    let mut g = CompensatedSum::new(theta.len());
    for (row, (&yi, &si)) in x.iter().zip(y.iter().zip(s)) {
        let b = linear_index(gamma, row);
        if si {
            let q = if yi { 1.0 } else { -1.0 };
            let a = q * linear_index(beta, row);
            let r = q * rho;
            let c = (1.0 - r * r).sqrt();
            let f = bvn_cdf(a, b, r).max(TINY);
            let fa = pdf(a) * cdf((b - r * a) / c);
            let fb = pdf(b) * cdf((a - r * b) / c);
            let fr = bvn_pdf(a, b, r);
            g.add_row_at(0, row, q * fa / f);
            g.add_row_at(k, row, fb / f);
            g.add(2 * k, q * fr / f);
        } else {
            // d/dγ log Φ(-γ'x) = -λ(-γ'x) x
            g.add_row_at(k, row, -inverse_mills(-b));
        }
    }
    let mut g = g.finish();
    g[2 * k] *= 1.0 - rho * rho;
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximum likelihood fit by BFGS on the mean negative log-likelihood.
///
/// `s[i]` marks rows whose outcome `y[i]` was observed. The starting point
/// is an outcome probit on the selected rows, a selection probit on all rows
/// and `ρ = 0`; the returned log-likelihood is never below that start.
pub fn biprobit_fit(x: &[&[f64]], y: &[bool], s: &[bool], cfg: &BiprobitConfig) -> Result<BivariateProbitModel> {
    if x.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.len() != y.len() || x.len() != s.len() {
        return Err(Error::InvalidArgument("x, y and s differ in length".into()));
    }
    if s.iter().all(|&v| v) {
        return Err(Error::Unidentified("every row is selected".into()));
    }
    if !s.iter().any(|&v| v) {
        return Err(Error::Unidentified("no row is selected".into()));
    }
    let sel_x: Vec<&[f64]> = x.iter().zip(s).filter(|(_, &si)| si).map(|(r, _)| *r).collect();
    let sel_y: Vec<bool> = y.iter().zip(s).filter(|(_, &si)| si).map(|(v, _)| *v).collect();
    let outcome = probit_fit(&sel_x, &sel_y, 100, 1e-8)?;
    let selection = probit_fit(x, s, 100, 1e-8)?;

    let k = outcome.coef.len();
    let n = x.len() as f64;
    let mut theta = outcome.coef.clone();
    theta.extend_from_slice(&selection.coef);
    theta.push(0.0);
    let dim = theta.len();

    let objective = |t: &[f64]| -biprobit_log_likelihood(t, x, y, s) / n;
    let gradient = |t: &[f64]| -> Vec<f64> { biprobit_gradient(t, x, y, s).into_iter().map(|v| -v / n).collect() };

    let mut f = objective(&theta);
    let initial_log_likelihood = -f * n;
    let mut g = gradient(&theta);
    let mut h_inv = identity(dim);
    let mut converged = g.iter().all(|v| v.abs() < cfg.tol);
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        let mut dir: Vec<f64> = (0..dim).map(|i| -dot(&h_inv[i], &g)).collect();
        if dot(&dir, &g) >= 0.0 {
            h_inv = identity(dim);
            dir = g.iter().map(|v| -v).collect();
        }
        let slope = dot(&dir, &g);
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let ft = objective(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                next = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft)) = next else {
            if h_inv == identity(dim) {
                break;
            }
            h_inv = identity(dim);
            continue;
        };
        let g_new = gradient(&trial);
        let sv: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > 1e-14 {
            bfgs_update(&mut h_inv, &sv, &yv, sy);
        }
        theta = trial;
        f = ft;
        g = g_new;
        converged = g.iter().all(|v| v.abs() < cfg.tol);
    }
    let (beta, gamma, rho) = split_params(&theta, k);
    let model = BivariateProbitModel {
        beta: beta.to_vec(),
        gamma: gamma.to_vec(),
        rho,
        converged,
        iterations,
        log_likelihood: -f * n,
        initial_log_likelihood,
    };
    if !model.log_likelihood.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::InvalidArgument("bivariate probit diverged".into()));
    }
    Ok(model)
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `H ← (I - ρ s y') H (I - ρ y s') + ρ s s'` with `ρ = 1 / s'y`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let r = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + r * yhy) * r * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_heckman, HeckmanSpec};

    fn sample(rho: f64, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>, Vec<bool>) {
        let spec = HeckmanSpec {
            n_features: 2,
            beta: vec![1.0, -0.5, 0.2],
            gamma: vec![0.3, 1.0, 0.3],
            rho,
            n,
            seed,
        };
        let h = generate_heckman(&spec).unwrap();
        let x: Vec<Vec<f64>> = h.data.rows().map(|r| r.to_vec()).collect();
        let y: Vec<bool> = (0..n).map(|i| h.data.label(i) == Some(1)).collect();
        (x, y, h.split.indicator())
    }

    fn refs(x: &[Vec<f64>]) -> Vec<&[f64]> {
        x.iter().map(|r| r.as_slice()).collect()
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_optimum() {
        let (x, y, s) = sample(0.4, 800, 5);
        let x = refs(&x);
        let theta = [0.8, -0.3, 0.1, 0.2, 0.9, 0.1, 0.35];
        let g = biprobit_gradient(&theta, &x, &y, &s);
        for j in 0..theta.len() {
            let h = 1e-5;
            let mut up = theta.to_vec();
            up[j] += h;
            let mut dn = theta.to_vec();
            dn[j] -= h;
            let fd = (biprobit_log_likelihood(&up, &x, &y, &s) - biprobit_log_likelihood(&dn, &x, &y, &s)) / (2.0 * h);
            let rel = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1.0);
            assert!(rel < 1e-4, "coord {j}: analytic {} numeric {fd}", g[j]);
        }
    }

    #[test]
    fn fit_ascends_from_start() {
        let (x, y, s) = sample(0.5, 3000, 9);
        let m = biprobit_fit(&refs(&x), &y, &s, &BiprobitConfig::default()).unwrap();
        assert!(m.log_likelihood >= m.initial_log_likelihood);
        assert!(m.rho.abs() < 1.0);
    }

    #[test]
    fn all_selected_is_unidentified() {
        let (x, y, _) = sample(0.0, 100, 1);
        let s = vec![true; 100];
        assert!(matches!(
            biprobit_fit(&refs(&x), &y, &s, &BiprobitConfig::default()),
            Err(Error::Unidentified(_))
        ));
    }

    #[test]
    fn prediction_is_marginal_outcome_probability() {
        let m = BivariateProbitModel {
            beta: vec![2.0, 0.0],
            gamma: vec![1.0, 0.0],
            rho: 0.7,
            converged: true,
            iterations: 0,
            log_likelihood: 0.0,
            initial_log_likelihood: 0.0,
        };
        assert_eq!(biprobit_predict_proba(&m, &[0.0]).unwrap(), 0.5);
        let ps: Vec<f64> = (0..20)
            .map(|i| biprobit_predict_proba(&m, &[i as f64 * 0.1 - 1.0]).unwrap())
            .collect();
        assert!(ps.windows(2).all(|w| w[1] > w[0]));
    }
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::normal::{cdf, inverse_mills, log_cdf};
use crate::synth::linear_index;
use crate::{Error, ProbabilisticModel, Result};

/// Coefficient norm beyond which the fit is treated as separated.
pub(crate) const SEPARATION_NORM: f64 = 1e4;

/// Binary probit `P(y = 1 | x) = Φ(coef · [x, 1])`, intercept last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbitModel {
    pub coef: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl ProbabilisticModel for ProbitModel {
    fn n_classes(&self) -> usize {
        2
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let p = probit_predict_proba(self, row)?;
        Ok(vec![1.0 - p, p])
    }
}

pub fn probit_predict_proba(model: &ProbitModel, row: &[f64]) -> Result<f64> {
    check_width(row.len() + 1, model.coef.len())?;
    Ok(cdf(linear_index(&model.coef, row)))
}

pub(crate) fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "coefficient length {found} does not match {} features plus intercept",
            expected - 1
        )))
    }
}

fn sign(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

pub fn probit_log_likelihood(coef: &[f64], x: &[&[f64]], y: &[bool]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| log_cdf(sign(yi) * linear_index(coef, row)))
        .sum()
}

pub fn probit_gradient(coef: &[f64], x: &[&[f64]], y: &[bool]) -> Vec<f64> {
    let mut g = CompensatedSum::new(coef.len());
    for (row, &yi) in x.iter().zip(y) {
        let q = sign(yi);
        let w = q * inverse_mills(q * linear_index(coef, row));
        g.add_row(row, w);
    }
    g.finish()
}

/// Neumaier-compensated accumulation of `Σ w · [row, 1]`. Plain summation
/// over tens of thousands of rows leaves an error floor above the 1e-8
/// convergence threshold.
pub(crate) struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    pub(crate) fn new(n: usize) -> Self {
        CompensatedSum {
            sum: vec![0.0; n],
            comp: vec![0.0; n],
        }
    }

    pub(crate) fn add(&mut self, j: usize, v: f64) {
        let s = self.sum[j];
        let t = s + v;
        self.comp[j] += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        self.sum[j] = t;
    }

    pub(crate) fn add_row(&mut self, row: &[f64], w: f64) {
        self.add_row_at(0, row, w);
    }

    /// Adds into the block of `row.len() + 1` entries starting at `offset`.
    pub(crate) fn add_row_at(&mut self, offset: usize, row: &[f64], w: f64) {
        for (j, x) in row.iter().enumerate() {
            self.add(offset + j, w * x);
        }
        self.add(offset + row.len(), w);
    }

    pub(crate) fn finish(self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}

/// Fails with `RankDeficient` unless `[X, 1]` has full column rank.
pub(crate) fn check_rank(x: &[&[f64]]) -> Result<()> {
    let p = x.first().map_or(0, |r| r.len()) + 1;
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut z = vec![0.0; p];
    for row in x {
        z[..p - 1].copy_from_slice(row);
        z[p - 1] = 1.0;
        for a in 0..p {
            for b in 0..=a {
                xtx[(a, b)] += z[a] * z[b];
            }
        }
    }
    // scale-free check on the correlation-like matrix
    let d: Vec<f64> = (0..p).map(|a| xtx[(a, a)].sqrt()).collect();
    if d.contains(&0.0) {
        return Err(Error::RankDeficient);
    }
    for a in 0..p {
        for b in 0..=a {
            let v = xtx[(a, b)] / (d[a] * d[b]);
            xtx[(a, b)] = v;
            xtx[(b, a)] = v;
        }
    }
    let eig = xtx.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 1e-10 {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Maximum likelihood probit via Newton's method with step-halving.
///
/// Converged once the gradient max-norm falls below `tol`. A coefficient
/// vector whose norm exceeds 1e4 is reported as separation, as is a constant
/// response.
pub fn probit_fit(x: &[&[f64]], y: &[bool], max_iter: usize, tol: f64) -> Result<ProbitModel> {
    if x.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length".into()));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidArgument("ragged design matrix".into()));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::Separation("response is constant".into()));
    }
    check_rank(x)?;

    let k = p + 1;
    let mut coef = vec![0.0; k];
    let mut ll = probit_log_likelihood(&coef, x, y);
    let mut z = vec![0.0; k];
    for iter in 0..max_iter {
        let g = probit_gradient(&coef, x, y);
        if g.iter().all(|v| v.abs() < tol) {
            return finish(coef, true, iter, ll, x, y);
        }
        // observed information: Σ λ(qη)(λ(qη) + qη) z z'
        let mut info = DMatrix::<f64>::zeros(k, k);
        for (row, &yi) in x.iter().zip(y) {
            let q = sign(yi);
            let t = q * linear_index(&coef, row);
            let lam = inverse_mills(t);
            let w = lam * (lam + t);
            z[..p].copy_from_slice(row);
            z[p] = 1.0;
            for a in 0..k {
                let wa = w * z[a];
                for b in 0..=a {
                    info[(a, b)] += wa * z[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        let step = match info.cholesky() {
            Some(ch) => ch.solve(&DVector::from_vec(g.clone())),
            None => return Err(Error::RankDeficient),
        };
        // near the optimum likelihood differences drop below rounding noise
        let slack = 1e-12 * (1.0 + ll.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = coef.iter().zip(step.iter()).map(|(c, s)| c + t * s).collect();
            let trial_ll = probit_log_likelihood(&trial, x, y);
            if trial_ll >= ll - slack {
                coef = trial;
                ll = trial_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if coef.iter().map(|c| c * c).sum::<f64>().sqrt() > SEPARATION_NORM {
            return Err(Error::Separation("coefficient norm diverged".into()));
        }
        if !accepted {
            // no ascent possible at machine precision
            let g = probit_gradient(&coef, x, y);
            let converged = g.iter().all(|v| v.abs() < tol.max(1e-6));
            return finish(coef, converged, iter + 1, ll, x, y);
        }
    }
    let g = probit_gradient(&coef, x, y);
    let converged = g.iter().all(|v| v.abs() < tol);
    finish(coef, converged, max_iter, ll, x, y)
}

/// A fit that classifies every row correctly with a positive margin can
/// always be improved by scaling the coefficients up, so no finite maximum
/// exists even when the gradient has numerically vanished.
fn finish(
    coef: Vec<f64>,
    converged: bool,
    iterations: usize,
    ll: f64,
    x: &[&[f64]],
    y: &[bool],
) -> Result<ProbitModel> {
    let separated = x
        .iter()
        .zip(y)
        .all(|(row, &yi)| sign(yi) * linear_index(&coef, row) > 0.0);
    if separated {
        return Err(Error::Separation(
            "every row is classified with a positive margin".into(),
        ));
    }
    Ok(ProbitModel {
        coef,
        converged,
        iterations,
        log_likelihood: ll,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate(n: usize, beta: &[f64], seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = stream(seed, "probit-test");
        let p = beta.len() - 1;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let e: f64 = StandardNormal.sample(&mut rng);
            ys.push(linear_index(beta, &x) + e > 0.0);
            xs.push(x);
        }
        (xs, ys)
    }

    fn refs(x: &[Vec<f64>]) -> Vec<&[f64]> {
        x.iter().map(|r| r.as_slice()).collect()
    }

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..50 {
            let v = (i as f64 - 24.5) / 10.0;
            let y = (i * 7) % 11 < 6;
            xs.push(vec![v]);
            ys.push(y);
            xs.push(vec![-v]);
            ys.push(!y);
        }
        let m = probit_fit(&refs(&xs), &ys, 100, 1e-8).unwrap();
        assert!(m.converged);
        assert!(m.coef[1].abs() < 1e-6, "intercept {}", m.coef[1]);
    }

    #[test]
    fn constant_response_is_separation() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(matches!(
            probit_fit(&refs(&xs), &[true; 3], 100, 1e-8),
            Err(Error::Separation(_))
        ));
    }

    #[test]
    fn perfectly_separated_data_is_detected() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let ys: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        assert!(matches!(
            probit_fit(&refs(&xs), &ys, 100, 1e-8),
            Err(Error::Separation(_))
        ));
    }

    #[test]
    fn collinear_columns_are_rank_deficient() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let ys: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        assert!(matches!(
            probit_fit(&refs(&xs), &ys, 100, 1e-8),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn recovers_generating_coefficients() {
        // two slopes then the intercept
        let truth = [1.0, -0.5, 0.3];
        let (xs, ys) = simulate(20_000, &truth, 11);
        let m = probit_fit(&refs(&xs), &ys, 100, 1e-8).unwrap();
        assert!(m.converged);
        for (e, t) in m.coef.iter().zip(truth) {
            assert!((e - t).abs() < 0.1, "{:?}", m.coef);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (xs, ys) = simulate(500, &[0.7, -0.2, 0.1], 3);
        let x = refs(&xs);
        let m = probit_fit(&x, &ys, 100, 1e-8).unwrap();
        for point in [m.coef.clone(), vec![0.3, 0.4, -0.5]] {
            let g = probit_gradient(&point, &x, &ys);
            let f = point.clone();
            for j in 0..f.len() {
                let h = 1e-5;
                let mut up = f.clone();
                up[j] += h;
                let mut dn = f.clone();
                dn[j] -= h;
                let fd = (probit_log_likelihood(&up, &x, &ys) - probit_log_likelihood(&dn, &x, &ys)) / (2.0 * h);
                let rel = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1.0);
                assert!(rel < 1e-4, "coord {j}: {} vs {}", g[j], fd);
            }
        }
    }

    #[test]
    fn prediction_values() {
        let m = ProbitModel {
            coef: vec![1.0, 0.0],
            converged: true,
            iterations: 0,
            log_likelihood: 0.0,
        };
        assert_eq!(probit_predict_proba(&m, &[0.0]).unwrap(), 0.5);
        assert!((probit_predict_proba(&m, &[1.0]).unwrap() - 0.8413).abs() < 1e-4);
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let ps: Vec<f64> = grid.iter().map(|&v| probit_predict_proba(&m, &[v]).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] >= w[0]));
        assert!(ps.last().unwrap() > &(1.0 - 1e-12));
        assert!(probit_predict_proba(&m, &[0.0, 1.0]).is_err());
    }
}

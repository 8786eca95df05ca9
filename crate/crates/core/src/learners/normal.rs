//! Univariate and bivariate standard normal functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use libm::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this argument the tail expansions replace direct evaluation.
const TAIL: f64 = -30.0;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `1 - 1/z^2 + 3/z^4 - 15/z^6`, the asymptotic series of `-z Φ(z) / φ(z)`.
fn tail_series(z: f64) -> f64 {
    let r = 1.0 / (z * z);
    1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r))
}

/// `ln Φ(x)`, finite for every finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x < TAIL {
        -0.5 * x * x - 0.5 * (2.0 * PI).ln() - (-x).ln() + tail_series(x).ln()
    } else {
        cdf(x).ln()
    }
}

/// Inverse Mills ratio `φ(z) / Φ(z)`.
pub fn inverse_mills(z: f64) -> f64 {
    if z < TAIL {
        -z / tail_series(z)
    } else {
        pdf(z) / cdf(z)
    }
}

pub const GAUSS_LEGENDRE_ORDER: usize = 32;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GAUSS_LEGENDRE_ORDER))
}

/// Standard bivariate normal density with correlation `rho`.
pub fn bvn_pdf(a: f64, b: f64, rho: f64) -> f64 {
    let one_m = 1.0 - rho * rho;
    (-(a * a - 2.0 * rho * a * b + b * b) / (2.0 * one_m)).exp() / (2.0 * PI * one_m.sqrt())
}

/// `P(Z1 <= a, Z2 <= b)` for a standard bivariate normal pair with
/// correlation `rho`.
///
/// Uses `Φ2 = Φ(a)Φ(b) + ∫_0^ρ φ2(a, b; r) dr` with the substitution
/// `r = sin θ`, which removes the `1/sqrt(1 - r^2)` factor, and a fixed
/// 32-point Gauss-Legendre rule. `|rho| >= 1` falls back to the degenerate
/// closed forms.
pub fn bvn_cdf(a: f64, b: f64, rho: f64) -> f64 {
    if a.is_nan() || b.is_nan() || rho.is_nan() {
        return f64::NAN;
    }
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return 0.0;
    }
    if a == f64::INFINITY {
        return cdf(b);
    }
    if b == f64::INFINITY {
        return cdf(a);
    }
    if rho >= 1.0 {
        return cdf(a.min(b));
    }
    if rho <= -1.0 {
        return (cdf(a) - cdf(-b)).max(0.0);
    }
    let base = cdf(a) * cdf(b);
    if rho == 0.0 {
        return base;
    }
    let upper = rho.asin();
    let half = 0.5 * upper;
    let (nodes, weights) = gl32();
    let sum_sq = a * a + b * b;
    let ab2 = 2.0 * a * b;
    let integral: f64 = nodes
        .iter()
        .zip(weights)
        .map(|(&t, &w)| {
            let theta = half * (t + 1.0);
            let (s, c) = theta.sin_cos();
            w * (-(sum_sq - ab2 * s) / (2.0 * c * c)).exp()
        })
        .sum::<f64>()
        * half
        / (2.0 * PI);
    (base + integral).clamp(0.0, 1.0)
}

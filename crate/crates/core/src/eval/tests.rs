//! Asymptotic two-sample and k-sample tests.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::learners::normal::cdf;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject_at_05: bool,
}

impl TestResult {
    pub fn new(statistic: f64, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            statistic,
            p_value,
            reject_at_05: p_value < 0.05,
        }
    }

    fn null() -> Self {
        TestResult::new(0.0, 1.0)
    }
}

/// Upper tail of the chi-squared distribution.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof / 2.0, x / 2.0)
}

/// Kolmogorov distribution tail `Q(λ) = 2 Σ (-1)^{j-1} exp(-2 j² λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Two-sample Kolmogorov-Smirnov test. NaN entries are ignored. The p-value
/// uses the asymptotic distribution at `(√n_e + 0.12 + 0.11/√n_e) D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (a, b) = (sorted(a), sorted(b));
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS test needs two non-empty samples".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok(TestResult::new(d, kolmogorov_q((en + 0.12 + 0.11 / en) * d)))
}

/// Pearson chi-squared test of independence on a count table. Rows and
/// columns with a zero margin (the cells with zero expectation) are dropped
/// together with their degrees of freedom.
pub fn chi2_test(table: &[Vec<f64>]) -> Result<TestResult> {
    if table.iter().any(|r| r.len() != table[0].len()) {
        return Err(Error::InvalidArgument("ragged contingency table".into()));
    }
    if table.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("contingency counts must be non-negative".into()));
    }
    let total: f64 = table.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("empty contingency table".into()));
    }
    let cols = table[0].len();
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols).map(|c| table.iter().map(|r| r[c]).sum()).collect();
    let live_rows: Vec<usize> = (0..table.len()).filter(|&r| row_sums[r] > 0.0).collect();
    let live_cols: Vec<usize> = (0..cols).filter(|&c| col_sums[c] > 0.0).collect();
    if live_rows.len() < 2 || live_cols.len() < 2 {
        return Ok(TestResult::null());
    }
    let mut stat = 0.0;
    for &r in &live_rows {
        for &c in &live_cols {
            let e = row_sums[r] * col_sums[c] / total;
            stat += (table[r][c] - e).powi(2) / e;
        }
    }
    let dof = ((live_rows.len() - 1) * (live_cols.len() - 1)) as f64;
    Ok(TestResult::new(stat, chi2_sf(stat, dof)))
}

/// Midranks (1-based) of `values` and the tie term `Σ (t³ - t)`.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Kruskal-Wallis H on midranks with the tie correction; chi-squared tail
/// with `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidArgument(
            "Kruskal-Wallis needs at least two non-empty groups".into(),
        ));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    if all.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in Kruskal-Wallis sample".into()));
    }
    let n = all.len() as f64;
    let (ranks, ties) = midranks(&all);
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(TestResult::null());
    }
    let mut start = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[start..start + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        start += g.len();
    }
    let h = ((12.0 / (n * (n + 1.0))) * sum - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    Ok(TestResult::new(h, chi2_sf(h, (groups.len() - 1) as f64)))
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test under the normal
/// approximation with tie correction. The statistic is `U` of `a`.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "rank-sum test needs two non-empty samples".into(),
        ));
    }
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&all);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(TestResult::new(u, 1.0));
    }
    let z = (u - n1 * n2 / 2.0) / var.sqrt();
    Ok(TestResult::new(u, 2.0 * cdf(-z.abs())))
}

#[cfg(test)]
mod unit {
    use super::*;

    #[test]
    fn ks_examples() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
        assert!((r.statistic - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap().statistic, 0.0);
        let r = ks_two_sample(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Q(1) and Q(1.36) from the series, cross-checked by direct summation
        let direct = |l: f64| {
            2.0 * (1..50)
                .map(|j| (-1f64).powi(j - 1) * (-2.0 * (j * j) as f64 * l * l).exp())
                .sum::<f64>()
        };
        for l in [0.5, 1.0, 1.36, 2.0] {
            assert!((kolmogorov_q(l) - direct(l)).abs() < 1e-14);
        }
        assert!((kolmogorov_q(1.358_1) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn chi2_examples() {
        let r = chi2_test(&[vec![10.0, 20.0], vec![20.0, 10.0]]).unwrap();
        assert!((r.statistic - 20.0 / 3.0).abs() < 1e-12);
        // chi2 sf(6.667, 1) = 0.009823
        assert!((r.p_value - 0.009_823).abs() < 1e-5);
        assert!(r.reject_at_05);
        let p = chi2_test(&[vec![10.0, 20.0], vec![5.0, 10.0]]).unwrap();
        assert!(p.statistic.abs() < 1e-12);
        assert_eq!(chi2_test(&[vec![3.0, 4.0, 5.0]]).unwrap().p_value, 1.0);
        // zero column is dropped with its dof
        let z = chi2_test(&[vec![10.0, 0.0, 20.0], vec![20.0, 0.0, 10.0]]).unwrap();
        assert_eq!(z, r);
    }

    #[test]
    fn kruskal_wallis_examples() {
        let same = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(same.statistic.abs() < 1e-12);
        let flat = kruskal_wallis(&[vec![2.0; 3], vec![2.0; 4]]).unwrap();
        assert_eq!((flat.statistic, flat.p_value), (0.0, 1.0));
    }

    #[test]
    fn rank_sum_complete_separation() {
        let a: Vec<f64> = (0..10).map(|i| 0.8 + i as f64 * 0.001).collect();
        let b: Vec<f64> = a.iter().map(|v| v - 0.3).collect();
        let r = rank_sum_test(&a, &b).unwrap();
        assert_eq!(r.statistic, 100.0);
        assert!(r.p_value < 0.001);
        assert_eq!(rank_sum_test(&a, &a).unwrap().p_value, 1.0);
    }
}

//! Artificial datasets and missing-label mechanisms.
//!
//! [`generate_artificial`] follows the `A_B_C_D` naming convention: `A`% of
//! the features are independent draws, `B`% of those drive the class, `C`%
//! of the labels are flipped and `D`% of the rows are positive.
//! [`generate_heckman`] draws data from a probit outcome equation with a
//! correlated probit selection equation, so the MNAR ground truth is known.

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, LabeledSplit};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_features: usize,
    pub pct_independent: f64,
    pub pct_relevant: f64,
    pub pct_noise: f64,
    pub pct_minority: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// Parses an `A_B_C_D` name with 30 features and the 8000 / 4000 train
    /// and test sizes of the reference artificial datasets.
    pub fn from_name(name: &str) -> Result<Self> {
        let parts: Vec<&str> = name.trim().split('_').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidArgument(format!("`{name}` is not of the form A_B_C_D")));
        }
        let pct = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{s}` in `{name}` is not a number")))
        };
        let spec = SynthSpec {
            n_features: 30,
            pct_independent: pct(parts[0])?,
            pct_relevant: pct(parts[1])?,
            pct_noise: pct(parts[2])?,
            pct_minority: pct(parts[3])?,
            n_train: 8000,
            n_test: 4000,
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sizes(mut self, n_train: usize, n_test: usize) -> Self {
        self.n_train = n_train;
        self.n_test = n_test;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, pct_noise: f64) -> Self {
        self.pct_noise = pct_noise;
        self
    }

    pub fn name(&self) -> String {
        format!(
            "{:02}_{:02}_{:02}_{:02}",
            self.pct_independent, self.pct_relevant, self.pct_noise, self.pct_minority
        )
    }

    /// `(independent, relevant)` feature counts.
    pub fn counts(&self) -> Result<(usize, usize)> {
        let n_indep = (self.pct_independent * self.n_features as f64 / 100.0).round() as usize;
        if n_indep == 0 {
            return Err(Error::InvalidArgument(format!(
                "{}: no independent features, so no relevant feature can exist",
                self.name()
            )));
        }
        let n_rel = ((self.pct_relevant * n_indep as f64 / 100.0).round() as usize).max(1);
        Ok((n_indep, n_rel))
    }

    pub fn validate(&self) -> Result<()> {
        let in_pct = |v: f64| (0.0..=100.0).contains(&v);
        if self.n_features == 0 {
            return Err(Error::InvalidArgument("n_features must be positive".into()));
        }
        if !(in_pct(self.pct_independent) && in_pct(self.pct_relevant) && in_pct(self.pct_noise)) {
            return Err(Error::InvalidArgument("A, B and C must lie in [0, 100]".into()));
        }
        if !(self.pct_minority > 0.0 && self.pct_minority < 50.0) {
            return Err(Error::InvalidArgument("D must lie in (0, 50)".into()));
        }
        if self.n_train < 10 {
            return Err(Error::InvalidArgument("n_train must be at least 10".into()));
        }
        if self.n_test == 0 {
            return Err(Error::InvalidArgument("n_test must be positive".into()));
        }
        Ok(())
    }
}

/// The labeling rule behind an artificial dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// Column indices of the relevant features (they come first).
    pub relevant: Vec<usize>,
    pub weights: Vec<f64>,
    /// Pool mean of the raw score, subtracted before thresholding.
    pub score_mean: f64,
    pub threshold: f64,
}

impl SynthTruth {
    /// Noise-free label of a row.
    pub fn label(&self, row: &[f64]) -> usize {
        let raw: f64 = self.relevant.iter().zip(&self.weights).map(|(&f, w)| w * row[f]).sum();
        usize::from(raw - self.score_mean > self.threshold)
    }
}

#[derive(Clone, Debug)]
pub struct Artificial {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: SynthTruth,
}

fn normal(rng: &mut impl rand::Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate_artificial(spec: &SynthSpec) -> Result<Artificial> {
    spec.validate()?;
    let (n_indep, n_rel) = spec.counts()?;
    let n_feat = spec.n_features;
    let pool = spec.n_train + spec.n_test;

    let mut rng = stream(spec.seed, "artificial/features");
    // column-major while building
    let mut cols: Vec<Vec<f64>> = (0..n_indep)
        .map(|_| (0..pool).map(|_| normal(&mut rng)).collect())
        .collect();
    for _ in n_indep..n_feat {
        let m = rng.random_range(2..=5).min(n_indep);
        let parents = sample(&mut rng, n_indep, m).into_vec();
        let mut coef: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
        let norm = coef.iter().map(|c| c * c).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        coef.iter_mut().for_each(|c| *c /= norm);
        let col = (0..pool)
            .map(|i| parents.iter().zip(&coef).map(|(&p, c)| c * cols[p][i]).sum())
            .collect();
        cols.push(col);
    }

    let noise = Normal::new(0.0, 0.1).unwrap();
    for col in &mut cols {
        col.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }

    let scale = Uniform::new_inclusive(0.5, 2.0).unwrap();
    for (f, col) in cols.iter_mut().enumerate() {
        if f < n_rel {
            let mean = col.iter().sum::<f64>() / pool as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / pool as f64).sqrt();
            let sd = if sd > 0.0 { sd } else { 1.0 };
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        } else {
            let s = scale.sample(&mut rng);
            let shift = normal(&mut rng);
            col.iter_mut().for_each(|v| *v = *v * s + shift);
        }
    }

    let mut wrng = stream(spec.seed, "artificial/weights");
    let weights: Vec<f64> = (0..n_rel).map(|_| normal(&mut wrng)).collect();
    let raw: Vec<f64> = (0..pool)
        .map(|i| (0..n_rel).map(|f| weights[f] * cols[f][i]).sum())
        .collect();
    let score_mean = raw.iter().sum::<f64>() / pool as f64;
    let mut sorted: Vec<f64> = raw.iter().map(|r| r - score_mean).collect();
    sorted.sort_by(f64::total_cmp);
    let n_pos = (spec.pct_minority / 100.0 * pool as f64).round() as usize;
    let threshold = if n_pos == 0 {
        sorted[pool - 1]
    } else {
        sorted[pool - n_pos - 1]
    };
    let truth = SynthTruth {
        relevant: (0..n_rel).collect(),
        weights,
        score_mean,
        threshold,
    };

    let meta = vec![FeatureKind::Continuous; n_feat];
    let build = |range: std::ops::Range<usize>, tag: &str| -> Result<Dataset> {
        let mut values = Vec::with_capacity(range.len() * n_feat);
        let mut labels = Vec::with_capacity(range.len());
        for i in range {
            let start = values.len();
            values.extend(cols.iter().map(|c| c[i]));
            labels.push(Some(truth.label(&values[start..])));
        }
        let clean = Dataset::from_flat(format!("{}_{tag}", spec.name()), meta.clone(), values, labels, 2)?;
        inject_label_noise(
            &clean,
            spec.pct_noise / 100.0,
            derive_seed(spec.seed, &format!("artificial/label-noise/{tag}")),
        )
    };
    let train = build(0..spec.n_train, "train")?;
    let test = build(spec.n_train..pool, "test")?;
    Ok(Artificial { train, test, truth })
}

/// Flips exactly `round(rate * n)` distinct labels of a fully labeled
/// two-class dataset.
pub fn inject_label_noise(data: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("noise rate {rate} outside [0, 1]")));
    }
    if data.n_classes() != 2 {
        return Err(Error::InvalidArgument("label noise needs two classes".into()));
    }
    if !data.is_fully_labeled() {
        return Err(Error::InvalidArgument(
            "label noise needs a fully labeled dataset".into(),
        ));
    }
    let n = data.n_rows();
    let k = (rate * n as f64).round() as usize;
    if k == 0 {
        return Ok(data.clone());
    }
    let mut rng = stream(seed, "label-noise");
    let mut labels = data.labels().to_vec();
    for i in sample(&mut rng, n, k) {
        labels[i] = labels[i].map(|y| 1 - y);
    }
    data.with_labels(labels)
}

/// Replaces continuous column `column` by a binary class: 1 iff the value is
/// strictly greater than `threshold`. Missing values become unlabeled rows.
pub fn binarize_target(data: &Dataset, column: usize, threshold: f64) -> Result<Dataset> {
    if column >= data.n_features() {
        return Err(Error::InvalidArgument(format!("no column {column}")));
    }
    if !data.meta()[column].is_continuous() {
        return Err(Error::FeatureKind {
            index: column,
            expected: "continuous",
            found: data.meta()[column].describe(),
        });
    }
    let (mut out, target) = data.remove_column(column);
    out.set_n_classes(2);
    let labels = target
        .iter()
        .map(|&v| (!v.is_nan()).then(|| usize::from(v > threshold)))
        .collect();
    out.with_labels(labels)
}

/// Uniformly random labeled subset of size `round(fraction * n)`.
pub fn split_mcar(data: &Dataset, fraction: f64, seed: u64) -> Result<LabeledSplit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "labeled fraction {fraction} outside (0, 1]"
        )));
    }
    let n = data.n_rows();
    let k = (fraction * n as f64).round() as usize;
    let mut rng = stream(seed, "split/mcar");
    let mut is_labeled = vec![false; n];
    for i in sample(&mut rng, n, k) {
        is_labeled[i] = true;
    }
    let (labeled, unlabeled) = (0..n).partition(|&i| is_labeled[i]);
    LabeledSplit::new(data, labeled, unlabeled)
}

fn require_continuous(data: &Dataset, f: usize) -> Result<()> {
    match data.meta().get(f) {
        Some(FeatureKind::Continuous) => Ok(()),
        Some(k) => Err(Error::FeatureKind {
            index: f,
            expected: "continuous",
            found: k.describe(),
        }),
        None => Err(Error::InvalidArgument(format!("no feature {f}"))),
    }
}

/// Rows with `x_i <= c_i || x_j <= c_j` become unlabeled.
pub fn split_mar_thresholds(data: &Dataset, i: usize, c_i: f64, j: usize, c_j: f64) -> Result<LabeledSplit> {
    require_continuous(data, i)?;
    require_continuous(data, j)?;
    let (unlabeled, labeled) = (0..data.n_rows()).partition(|&r| data.value(r, i) <= c_i || data.value(r, j) <= c_j);
    LabeledSplit::new(data, labeled, unlabeled)
}

/// Largest gap allowed between the requested and the achieved unlabeled
/// fraction in [`mar_thresholds`].
pub const MAR_TOLERANCE: f64 = 0.01;

/// Equal-quantile thresholds `(c_i, c_j)` whose censoring predicate leaves
/// the unlabeled fraction closest to `target_unlabeled`.
///
/// Both thresholds sit at the same empirical quantile rank; the rank is found
/// by bisection because the unlabeled count is monotone in it.
pub fn mar_thresholds(data: &Dataset, i: usize, j: usize, target_unlabeled: f64) -> Result<(f64, f64)> {
    require_continuous(data, i)?;
    require_continuous(data, j)?;
    if !(0.0..=1.0).contains(&target_unlabeled) {
        return Err(Error::InvalidArgument(format!(
            "unlabeled fraction {target_unlabeled} outside [0, 1]"
        )));
    }
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let xi = data.column(i);
    let xj = data.column(j);
    let mut si = xi.clone();
    let mut sj = xj.clone();
    si.sort_by(f64::total_cmp);
    sj.sort_by(f64::total_cmp);
    // rank 0 is "below the minimum"; rank r > 0 uses the r-th order statistic
    let thresholds = |r: usize| {
        if r == 0 {
            (f64::NEG_INFINITY, f64::NEG_INFINITY)
        } else {
            (si[r - 1], sj[r - 1])
        }
    };
    let count = |r: usize| {
        let (ci, cj) = thresholds(r);
        xi.iter().zip(&xj).filter(|(a, b)| **a <= ci || **b <= cj).count()
    };
    let target = target_unlabeled * n as f64;
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if (count(mid) as f64) < target {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let mut best = lo;
    if lo > 0 && (count(lo - 1) as f64 - target).abs() <= (count(lo) as f64 - target).abs() {
        best = lo - 1;
    }
    let achieved = count(best) as f64 / n as f64;
    if (achieved - target_unlabeled).abs() > MAR_TOLERANCE {
        return Err(Error::MarUnachievable {
            target: target_unlabeled,
            achieved,
        });
    }
    Ok(thresholds(best))
}

/// MAR split conditioned on continuous features `i` and `j`.
pub fn split_mar(data: &Dataset, i: usize, j: usize, target_unlabeled: f64) -> Result<LabeledSplit> {
    let (ci, cj) = mar_thresholds(data, i, j, target_unlabeled)?;
    split_mar_thresholds(data, i, ci, j, cj)
}

/// Label-dependent (MNAR) selection for a fully labeled two-class dataset.
///
/// Each row gets a selection score `rho * e + sqrt(1 - rho^2) * z` where `z`
/// is standard normal and `e` is a half-normal draw signed by the class
/// (positive for class 1). The `round(fraction * n)` highest scores are
/// labeled, so positive `rho` over-represents class 1 among labeled rows.
pub fn split_mnar(data: &Dataset, rho: f64, fraction: f64, seed: u64) -> Result<LabeledSplit> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho {rho} outside [-1, 1]")));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "labeled fraction {fraction} outside (0, 1]"
        )));
    }
    if data.n_classes() != 2 || !data.is_fully_labeled() {
        return Err(Error::InvalidArgument(
            "MNAR selection needs a fully labeled two-class dataset".into(),
        ));
    }
    let n = data.n_rows();
    let mut rng = stream(seed, "split/mnar");
    let c = (1.0 - rho * rho).sqrt();
    let mut scores: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let sign = if data.label(i) == Some(1) { 1.0 } else { -1.0 };
            let e = sign * normal(&mut rng).abs();
            (rho * e + c * normal(&mut rng), i)
        })
        .collect();
    scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let k = (fraction * n as f64).round() as usize;
    let labeled = scores[..k].iter().map(|s| s.1).collect();
    let unlabeled = scores[k..].iter().map(|s| s.1).collect();
    LabeledSplit::new(data, labeled, unlabeled)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mechanism {
    Mcar {
        labeled_fraction: f64,
    },
    /// Censor on two continuous features, either with explicit thresholds or
    /// with equal-quantile thresholds hitting a target unlabeled fraction.
    Mar {
        features: (usize, usize),
        thresholds: Option<(f64, f64)>,
        target_unlabeled: Option<f64>,
    },
    Mnar {
        rho: f64,
        labeled_fraction: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub seed: u64,
}

impl MissingnessSpec {
    pub fn apply(&self, data: &Dataset) -> Result<LabeledSplit> {
        match &self.mechanism {
            Mechanism::Mcar { labeled_fraction } => split_mcar(data, *labeled_fraction, self.seed),
            Mechanism::Mar {
                features: (i, j),
                thresholds,
                target_unlabeled,
            } => match (thresholds, target_unlabeled) {
                (Some((ci, cj)), _) => {
                    if !(ci.is_finite() && cj.is_finite()) {
                        return Err(Error::InvalidArgument("MAR thresholds must be finite".into()));
                    }
                    split_mar_thresholds(data, *i, *ci, *j, *cj)
                }
                (None, Some(t)) => split_mar(data, *i, *j, *t),
                (None, None) => Err(Error::InvalidArgument(
                    "MAR needs thresholds or a target unlabeled fraction".into(),
                )),
            },
            Mechanism::Mnar { rho, labeled_fraction } => split_mnar(data, *rho, *labeled_fraction, self.seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeckmanSpec {
    pub n_features: usize,
    /// Outcome coefficients, intercept last.
    pub beta: Vec<f64>,
    /// Selection coefficients, intercept last.
    pub gamma: Vec<f64>,
    pub rho: f64,
    pub n: usize,
    pub seed: u64,
}

impl HeckmanSpec {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho {} outside [-1, 1]", self.rho)));
        }
        if self.beta.len() != self.n_features + 1 || self.gamma.len() != self.n_features + 1 {
            return Err(Error::InvalidArgument(
                "coefficient vectors need n_features + 1 entries".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        Ok(())
    }
}

/// Linear index `coef' [x, 1]` with the intercept stored last.
pub fn linear_index(coef: &[f64], row: &[f64]) -> f64 {
    let (w, b) = coef.split_at(row.len());
    b[0] + w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct HeckmanSample {
    /// Every row keeps its class so the population can be scored.
    pub data: Dataset,
    /// Labeled iff the selection latent is positive.
    pub split: LabeledSplit,
    pub truth: HeckmanSpec,
}

pub fn generate_heckman(spec: &HeckmanSpec) -> Result<HeckmanSample> {
    spec.validate()?;
    let mut rng = stream(spec.seed, "heckman");
    let p = spec.n_features;
    let c = (1.0 - spec.rho * spec.rho).sqrt();
    let mut values = Vec::with_capacity(spec.n * p);
    let mut labels = Vec::with_capacity(spec.n);
    let mut selected = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = values.len();
        values.extend((0..p).map(|_| normal(&mut rng)));
        let x = &values[start..];
        let z1 = normal(&mut rng);
        let z2 = normal(&mut rng);
        let u1 = z1;
        let u2 = spec.rho * z1 + c * z2;
        labels.push(Some(usize::from(linear_index(&spec.beta, x) + u1 > 0.0)));
        selected.push(linear_index(&spec.gamma, x) + u2 > 0.0);
    }
    let data = Dataset::from_flat("heckman", vec![FeatureKind::Continuous; p], values, labels, 2)?;
    let (labeled, unlabeled) = (0..spec.n).partition(|&i| selected[i]);
    let split = LabeledSplit::new(&data, labeled, unlabeled)?;
    Ok(HeckmanSample {
        data,
        split,
        truth: spec.clone(),
    })
}

//! Co-training of two different learners that label data for each other.
//!
//! In every round classifier A offers the unlabeled rows it assigns to each
//! class `k` to classifier B's pool. The batch is accepted when
//!
//! * (i)  `h_Ak > l_B`: the upper confidence bound of A's precision on class
//!   `k` exceeds the lower bound of B's accuracy, and
//! * (ii) `q_k > q_B`, where `q_B = m (1 - 2(2 w_B / m))^2` over B's current
//!   pool of size `m` and `q_k = m' (1 - 2(w_B + w_k) / m')^2` over the pool
//!   grown by the batch, with `w_k = (1 - l_Ak) |X_Uk|`.
//!
//! Then B labels for A the same way. Confidence bounds come from a
//! normal-approximation binomial interval over out-of-fold predictions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, LabeledSplit};
use crate::learners::{argmax, BaseLearner, FittedModel};
use crate::rng::stream;
use crate::{Error, ProbabilisticModel, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoTrainConfig {
    pub confidence: f64,
    pub learner_a: BaseLearner,
    pub learner_b: BaseLearner,
    pub folds: usize,
    /// Noise constant of the sample-size relation; kept for reporting.
    pub k: f64,
    pub seed: u64,
}

pub const CONFIDENCE_LEVELS: [f64; 3] = [0.90, 0.95, 0.99];

impl Default for CoTrainConfig {
    fn default() -> Self {
        CoTrainConfig {
            confidence: 0.95,
            learner_a: BaseLearner::NaiveBayes,
            learner_b: BaseLearner::tree(),
            folds: 10,
            k: 1.0,
            seed: 0,
        }
    }
}

impl CoTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !CONFIDENCE_LEVELS.iter().any(|c| (c - self.confidence).abs() < 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "confidence {} is not one of 0.90, 0.95, 0.99",
                self.confidence
            )));
        }
        if self.learner_a.name() == self.learner_b.name() {
            return Err(Error::InvalidArgument(
                "co-training needs two different learners".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument("folds must be at least 2".into()));
        }
        Ok(())
    }
}

/// Noise-adjusted size of a pool of `m` rows carrying `w_b` expected
/// mislabelings.
pub fn q_b(m: f64, w_b: f64) -> f64 {
    m * (1.0 - 2.0 * (2.0 * w_b / m)).powi(2)
}

/// Same quantity for the pool grown by a batch, of total size `m`.
pub fn q_k(m: f64, w_b: f64, w_k: f64) -> f64 {
    m * (1.0 - 2.0 * (w_b + w_k) / m).powi(2)
}

/// Expected mislabelings in a batch of `n_uk` rows whose class precision has
/// lower bound `l_k`.
pub fn w_k(l_k: f64, n_uk: usize) -> f64 {
    (1.0 - l_k) * n_uk as f64
}

/// Normal-approximation binomial interval for `successes / n`, clipped to
/// `[0, 1]`.
pub fn binomial_ci(successes: usize, n: usize, confidence: f64) -> (f64, f64) {
    let p = successes as f64 / n as f64;
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let half = z * (p * (1.0 - p) / n as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Confidence bounds estimated by cross-validation on one pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEstimate {
    pub overall: (f64, f64),
    /// Precision bounds per predicted class; `None` where undefined.
    pub per_class: Vec<Option<(f64, f64)>>,
}

/// Cross-validated interval estimates for `learner` on `(rows, targets)`.
/// Returns `None` when the pool is too small for two folds.
pub fn cv_estimate(
    learner: &BaseLearner,
    data: &Dataset,
    rows: &[usize],
    targets: &[usize],
    folds: usize,
    confidence: f64,
    seed: u64,
) -> Result<Option<PoolEstimate>> {
    let n = rows.len();
    let k = data.n_classes();
    let folds = folds.min(n);
    if folds < 2 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "cotrain-folds"));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let mut predicted = vec![0usize; n];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let model = learner.fit(
            data,
            &train.iter().map(|&i| rows[i]).collect::<Vec<_>>(),
            &train.iter().map(|&i| targets[i]).collect::<Vec<_>>(),
            &vec![1.0; train.len()],
        )?;
        for i in (0..n).filter(|&i| fold_of[i] == f) {
            predicted[i] = argmax(&model.predict_proba(data.row(rows[i]))?);
        }
    }
    let correct = (0..n).filter(|&i| predicted[i] == targets[i]).count();
    let present: Vec<bool> = (0..k).map(|c| targets.contains(&c)).collect();
    let per_class = (0..k)
        .map(|c| {
            let hits: Vec<usize> = (0..n).filter(|&i| predicted[i] == c).collect();
            if !present[c] || hits.is_empty() {
                return None;
            }
            let ok = hits.iter().filter(|&&i| targets[i] == c).count();
            Some(binomial_ci(ok, hits.len(), confidence))
        })
        .collect();
    Ok(Some(PoolEstimate {
        overall: binomial_ci(correct, n, confidence),
        per_class,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub labeled_for_a: usize,
    pub labeled_for_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoTrainModel {
    pub model_a: FittedModel,
    pub model_b: FittedModel,
    /// `(row, class)` pairs labeled by B and added to A's pool.
    pub pool_a: Vec<(usize, usize)>,
    /// `(row, class)` pairs labeled by A and added to B's pool.
    pub pool_b: Vec<(usize, usize)>,
    pub w_a: f64,
    pub w_b: f64,
    pub rounds: Vec<RoundStats>,
    pub remaining_unlabeled: usize,
}

impl CoTrainModel {
    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }
}

/// Mean of the two posteriors.
pub fn cotrain_predict_proba(
    model_a: &dyn ProbabilisticModel,
    model_b: &dyn ProbabilisticModel,
    row: &[f64],
) -> Result<Vec<f64>> {
    let a = model_a.predict_proba(row)?;
    let b = model_b.predict_proba(row)?;
    Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
}

impl ProbabilisticModel for CoTrainModel {
    fn n_classes(&self) -> usize {
        self.model_a.n_classes()
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        cotrain_predict_proba(&self.model_a, &self.model_b, row)
    }
}

struct Pool {
    rows: Vec<usize>,
    targets: Vec<usize>,
    added: Vec<(usize, usize)>,
    w: f64,
}

impl Pool {
    fn fit(&self, learner: &BaseLearner, data: &Dataset) -> Result<FittedModel> {
        learner.fit(data, &self.rows, &self.targets, &vec![1.0; self.rows.len()])
    }
}

/// One labeling pass of `teacher` (fit on `teacher_pool`) for `student_pool`.
/// Returns the rows moved out of `unlabeled`.
#[allow(clippy::too_many_arguments)]
fn label_for(
    data: &Dataset,
    teacher: &BaseLearner,
    teacher_pool: &Pool,
    student: &BaseLearner,
    student_pool: &mut Pool,
    unlabeled: &mut Vec<usize>,
    cfg: &CoTrainConfig,
    seed: u64,
) -> Result<usize> {
    if unlabeled.is_empty() {
        return Ok(0);
    }
    let Some(t_est) = cv_estimate(
        teacher,
        data,
        &teacher_pool.rows,
        &teacher_pool.targets,
        cfg.folds,
        cfg.confidence,
        seed ^ 0xA,
    )?
    else {
        return Ok(0);
    };
    let Some(s_est) = cv_estimate(
        student,
        data,
        &student_pool.rows,
        &student_pool.targets,
        cfg.folds,
        cfg.confidence,
        seed ^ 0xB,
    )?
    else {
        return Ok(0);
    };
    let model = teacher_pool.fit(teacher, data)?;
    let k = data.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &u in unlabeled.iter() {
        by_class[argmax(&model.predict_proba(data.row(u))?)].push(u);
    }

    // every class is judged against the pool as it stood at the start of
    // the pass; accepted batches are applied together afterwards
    let l_student = s_est.overall.0;
    let m = student_pool.rows.len() as f64;
    let w_student = student_pool.w;
    let base_q = q_b(m, w_student);
    let mut accepted = Vec::new();
    for (c, batch) in by_class.iter().enumerate() {
        let Some((l_c, h_c)) = t_est.per_class[c] else {
            continue;
        };
        if batch.is_empty() || h_c <= l_student {
            continue;
        }
        let wk = w_k(l_c, batch.len());
        if q_k(m + batch.len() as f64, w_student, wk) > base_q {
            accepted.push((c, wk));
        }
    }
    let mut moved = 0;
    for (c, wk) in accepted {
        for &u in &by_class[c] {
            student_pool.rows.push(u);
            student_pool.targets.push(c);
            student_pool.added.push((u, c));
        }
        student_pool.w += wk;
        moved += by_class[c].len();
    }
    if moved > 0 {
        let taken: std::collections::HashSet<usize> = student_pool.added[student_pool.added.len() - moved..]
            .iter()
            .map(|p| p.0)
            .collect();
        unlabeled.retain(|u| !taken.contains(u));
    }
    Ok(moved)
}

pub fn cotrain_fit(data: &Dataset, split: &LabeledSplit, cfg: &CoTrainConfig) -> Result<CoTrainModel> {
    cfg.validate()?;
    let labeled = split.labeled();
    if labeled.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let targets = labeled
        .iter()
        .map(|&i| data.require_label(i))
        .collect::<Result<Vec<_>>>()?;
    let mut pool_a = Pool {
        rows: labeled.to_vec(),
        targets: targets.clone(),
        added: Vec::new(),
        w: 0.0,
    };
    let mut pool_b = Pool {
        rows: labeled.to_vec(),
        targets,
        added: Vec::new(),
        w: 0.0,
    };
    let mut unlabeled = split.unlabeled().to_vec();
    let mut rounds = Vec::new();
    // each productive round removes at least one row, so this bound is never
    // the reason to stop
    let max_rounds = unlabeled.len();
    while !unlabeled.is_empty() && rounds.len() < max_rounds {
        let r = rounds.len() as u64;
        let seed = cfg.seed.wrapping_add(r.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let for_b = label_for(
            data,
            &cfg.learner_a,
            &pool_a,
            &cfg.learner_b,
            &mut pool_b,
            &mut unlabeled,
            cfg,
            seed,
        )?;
        let for_a = label_for(
            data,
            &cfg.learner_b,
            &pool_b,
            &cfg.learner_a,
            &mut pool_a,
            &mut unlabeled,
            cfg,
            seed ^ 0x5555,
        )?;
        if for_a == 0 && for_b == 0 {
            break;
        }
        rounds.push(RoundStats {
            labeled_for_a: for_a,
            labeled_for_b: for_b,
        });
    }
    Ok(CoTrainModel {
        model_a: pool_a.fit(&cfg.learner_a, data)?,
        model_b: pool_b.fit(&cfg.learner_b, data)?,
        pool_a: pool_a.added,
        pool_b: pool_b.added,
        w_a: pool_a.w,
        w_b: pool_b.w,
        rounds,
        remaining_unlabeled: unlabeled.len(),
    })
}

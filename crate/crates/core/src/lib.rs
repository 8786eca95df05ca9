//! Learning from labeled and unlabeled data.
//!
//! The crate bundles the pieces needed to study semi-supervised classifiers
//! under different missing-label mechanisms:
//!
//! - [`data`]: the tabular [`Dataset`](data::Dataset), CSV ingestion and
//!   entropy/MDL discretization.
//! - [`synth`]: artificial `A_B_C_D` datasets, label noise, and MCAR / MAR /
//!   MNAR labeled-unlabeled splits (including a Heckman-style generator).
//! - [`learners`]: Naive Bayes, a Laplace-corrected decision tree, 1-NN
//!   labeling, probit and bivariate probit with selection correction.
//! - [`ssl`]: co-training, ASSEMBLE.AdaBoost, re-weighting, Sample-Select and
//!   the common-component EM mixture.
//! - [`eval`]: normalized AUC, KS / chi-squared / Kruskal-Wallis tests and
//!   win-tie-loss tallies.
//! - [`bench`]: the seeded experiment planner, runner and report emitter.

pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod learners;
mod par;
pub mod rng;
pub mod ssl;
pub mod synth;

pub use error::{Error, Result};

/// Anything that yields a class-probability vector for a feature row.
pub trait ProbabilisticModel: Send + Sync {
    fn n_classes(&self) -> usize;

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>>;

    /// Probability of class 1, the score used for ROC analysis.
    fn score(&self, row: &[f64]) -> Result<f64> {
        Ok(self.predict_proba(row)?[1])
    }
}

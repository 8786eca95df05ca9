//! Semi-supervised techniques.

mod assemble;
mod cotrain;
mod mixture;
mod reweight;
mod sample_select;

pub use assemble::{
    assemble_fit, assemble_fit_observed, majority_class, zero_error_weight, AssembleConfig, AssembleModel, PseudoInit,
};
pub use cotrain::{
    binomial_ci, cotrain_fit, cotrain_predict_proba, cv_estimate, q_b, q_k, w_k, CoTrainConfig, CoTrainModel,
    PoolEstimate, RoundStats, CONFIDENCE_LEVELS,
};
pub use mixture::{
    cc_e_step, cc_fit, cc_init, cc_m_step, cc_predict_proba, CCConfig, CCMixtureModel, Component, FeatureDensity,
    VARIANCE_FLOOR,
};
pub use reweight::{band_edges, band_of, group_quotas, reweight_expand, BandSummary, ReweightResult};
pub use sample_select::{sample_select_fit, SampleSelectModel};

//! Seeded experiment planning, execution and reporting.
//!
//! A run plan is the product datasets × labeled fractions × runs; each
//! descriptor carries a seed hashed from the master seed and its key, so the
//! results do not depend on scheduling. Every technique in a descriptor sees
//! the same split and test set, and records are sorted before they are
//! written.

mod config;
mod run;
mod summary;

pub use config::{
    split_label, BiasSpec, DatasetConfig, DatasetSource, ExperimentConfig, Technique, TechniqueConfig, DEFAULT_RUNS,
    DEFAULT_SPLITS, TECHNIQUE_NAMES,
};
pub use run::{
    child_seed, execute_descriptor, execute_loaded, execute_plan, execute_plan_with, load_dataset, load_datasets,
    load_jsonl, plan_runs, read_jsonl, save_jsonl, sort_records, write_jsonl, Execution, LoadedDataset, ResultRecord,
    RunDescriptor, RunPlan,
};
pub use summary::{quantile_inclusive, summarize, summarize_against, BoxStats, Grid, GridRow, Summary, WtlTable};

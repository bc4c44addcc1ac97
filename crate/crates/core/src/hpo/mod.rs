//! Random hyperparameter search with a resumable per-trial log.

mod search;
mod space;

pub use search::{
    plan_trials, read_trials, report_search, run_search, FeatureSource, GroupSummary, ManifestFeatures, SearchOptions,
    SearchReport, TrialResult, TrialStatus, DEFAULT_TRIAL_EPOCHS, FAULT_LR, TRIALS_LOG,
};
pub use space::{apply, sample_config, Choices, Dimension, SearchSpace, KNOWN_DIMENSIONS, MAX_DRAWS};

//! Training loop, evaluation metrics and cross-validated run reports.

mod config;
mod data;
mod fit;
mod metrics;
mod report;

pub use config::{FoldConfig, OptimizerConfig, OptimizerKind, TrainConfig, BATCH_SIZES};
pub use data::{load_features, FeatureSet, LoadStats};
pub use fit::{
    cross_validate, evaluate, evaluate_checkpoint, fit, init_model, predict, train_fold, train_step, CrossValidation, EpochRecord,
    FoldRun, StepOutput,
};
pub use metrics::{
    confusion_to_percent, render_percent_cell, render_percent_matrix, spread, Confusion, EvalReport, SpreadStats,
};
pub use report::{load_report, save_report, write_run, FoldSummary, RunReport, CHECKPOINT_DIR, CONFUSION_CSV, REPORT_JSON, REPORT_TXT};

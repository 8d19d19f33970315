//! The downstream workload: boosted trees, AUC, tuning and nested CV.

mod auc;
mod cv;
mod features;
mod gbdt;
mod tune;

pub use auc::auc;
pub use cv::{
    evaluate_fold, fold_seed, nested_cv_auc, outer_splits, CvOptions, CvReport, FoldTrace, HyperMode, OuterSplit,
    OUTER_FOLDS,
};
pub use features::{Binned, FeatureMap, ENCODER_SMOOTHING, MAX_BINS, MISSING_BIN};
pub use gbdt::{fit_gbdt, GbdtHyper, GbdtModel, RegressionTree};
pub use tune::{cv_score, tune, HyperRanges, TuneResult, DEFAULT_BUDGET, INNER_FOLDS};

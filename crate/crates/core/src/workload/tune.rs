//! Random search over the boosting hyperparameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gbdt::{fit_gbdt, GbdtHyper};
use super::auc;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, task_rng};
use crate::tabular::{stratified_folds, Dataset};

pub const DEFAULT_BUDGET: usize = 30;
pub const INNER_FOLDS: usize = 5;

/// Inclusive search ranges. The learning rate is searched on a log2 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperRanges {
    pub max_depth: (usize, usize),
    pub log2_learning_rate: (f64, f64),
    pub early_stopping_rounds: (usize, usize),
    pub min_data_in_leaf: (usize, usize),
    pub num_leaves: (usize, usize),
}

impl Default for HyperRanges {
    fn default() -> Self {
        Self {
            max_depth: (1, 15),
            log2_learning_rate: (-10.0, 0.0),
            early_stopping_rounds: (7, 30),
            min_data_in_leaf: (1, 60),
            num_leaves: (4, 60),
        }
    }
}

impl HyperRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_depth.0 <= self.max_depth.1
            && self.max_depth.0 >= 1
            && self.log2_learning_rate.0 <= self.log2_learning_rate.1
            && self.early_stopping_rounds.0 <= self.early_stopping_rounds.1
            && self.min_data_in_leaf.0 <= self.min_data_in_leaf.1
            && self.num_leaves.0 <= self.num_leaves.1
            && self.num_leaves.0 >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("every hyperparameter range needs lower <= upper"))
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> GbdtHyper {
        let (lo, hi) = self.log2_learning_rate;
        let exponent = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        GbdtHyper {
            max_depth: rng.random_range(self.max_depth.0..=self.max_depth.1),
            learning_rate: exponent.exp2(),
            early_stopping_rounds: Some(rng.random_range(self.early_stopping_rounds.0..=self.early_stopping_rounds.1)),
            min_data_in_leaf: rng.random_range(self.min_data_in_leaf.0..=self.min_data_in_leaf.1),
            num_leaves: rng.random_range(self.num_leaves.0..=self.num_leaves.1),
            ..GbdtHyper::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: GbdtHyper,
    pub best_score: f64,
    pub trials: Vec<(GbdtHyper, f64)>,
}

/// Mean AUC of `hyper` over stratified folds of `train`. Folds whose
/// held-out part lacks a class are skipped.
pub fn cv_score(train: &Dataset, hyper: &GbdtHyper, folds: usize, seed: u64) -> Result<f64> {
    let assignment = stratified_folds(train, folds, derive_seed(seed, &[0]))?;
    let mut total = 0.0;
    let mut used = 0;
    for k in 0..folds {
        let (fit_idx, eval_idx): (Vec<usize>, Vec<usize>) = (0..train.len()).partition(|&i| assignment[i] != k);
        let fit = train.subset(&fit_idx);
        let eval = train.subset(&eval_idx);
        let (neg, pos) = eval.class_counts();
        let (fneg, fpos) = fit.class_counts();
        if neg == 0 || pos == 0 || fneg == 0 || fpos == 0 {
            continue;
        }
        let model = fit_gbdt(&fit, hyper, derive_seed(seed, &[1, k as u64]))?;
        total += auc(&model.predict_proba(&eval), &eval.labels())?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::degenerate("no inner fold has both classes"));
    }
    Ok(total / used as f64)
}

/// Sample `budget` configurations, score each by cross-validated AUC and
/// return the best. Ties go to the configuration sampled first.
pub fn tune(train: &Dataset, ranges: &HyperRanges, budget: usize, seed: u64) -> Result<TuneResult> {
    ranges.validate()?;
    if budget == 0 {
        return Err(Error::invalid("tuning budget must be at least 1"));
    }
    let mut rng = task_rng(seed, &[0]);
    let configs: Vec<GbdtHyper> = (0..budget).map(|_| ranges.sample(&mut rng)).collect();
    let cv_seed = derive_seed(seed, &[1]);
    let scores = crate::par::try_map(&configs, |h| cv_score(train, h, INNER_FOLDS, cv_seed))?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(TuneResult {
        best: configs[best],
        best_score: scores[best],
        trials: configs.into_iter().zip(scores).collect(),
    })
}

//! Nested cross-validation with augmentation inside each outer training
//! split.

use serde::{Deserialize, Serialize};

use super::gbdt::{fit_gbdt, GbdtHyper};
use super::tune::{tune, HyperRanges, DEFAULT_BUDGET};
use super::auc;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::synth::SynthesizerSpec;
use crate::tabular::{concat, stratified_folds, Dataset, RowId};

pub const OUTER_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperMode {
    /// Random search on each (augmented) training split.
    Tune { ranges: HyperRanges, budget: usize },
    Fixed(GbdtHyper),
}

impl Default for HyperMode {
    fn default() -> Self {
        HyperMode::Tune { ranges: HyperRanges::default(), budget: DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone)]
pub struct CvOptions {
    pub seed: u64,
    pub folds: usize,
    pub hyper: HyperMode,
    /// Fit the synthesizer on the full dataset before folding. This leaks
    /// evaluation rows into training and exists only to test the guard.
    pub leakage: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { seed: 0, folds: OUTER_FOLDS, hyper: HyperMode::default(), leakage: false }
    }
}

/// Row ids seen by each stage of one outer fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldTrace {
    pub fold: usize,
    pub synth_train_ids: Vec<RowId>,
    pub model_train_ids: Vec<RowId>,
    pub eval_ids: Vec<RowId>,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    pub hypers: Vec<GbdtHyper>,
    pub traces: Vec<FoldTrace>,
}

#[derive(Debug, Clone)]
pub struct OuterSplit {
    pub fold: usize,
    pub train: Dataset,
    pub test: Dataset,
}

/// Seed for one purpose within one outer fold.
pub fn fold_seed(seed: u64, fold: usize, purpose: u64) -> u64 {
    derive_seed(seed, &[fold as u64, purpose])
}

/// Stratified outer folds. Every training and test part must hold both
/// classes.
pub fn outer_splits(ds: &Dataset, folds: usize, seed: u64) -> Result<Vec<OuterSplit>> {
    let assignment = stratified_folds(ds, folds, derive_seed(seed, &[u64::MAX]))?;
    (0..folds)
        .map(|fold| {
            let (tr, te): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| assignment[i] != fold);
            let split = OuterSplit { fold, train: ds.subset(&tr), test: ds.subset(&te) };
            for part in [&split.train, &split.test] {
                let (neg, pos) = part.class_counts();
                if neg == 0 || pos == 0 {
                    return Err(Error::degenerate(format!("outer fold {fold} has a single class")));
                }
            }
            Ok(split)
        })
        .collect()
}

/// Pick hyperparameters for `train` and return the held-out AUC on `test`.
pub fn evaluate_fold(train: &Dataset, test: &Dataset, mode: &HyperMode, seed: u64) -> Result<(f64, GbdtHyper)> {
    let hyper = match mode {
        HyperMode::Fixed(h) => *h,
        HyperMode::Tune { ranges, budget } => tune(train, ranges, *budget, derive_seed(seed, &[0]))?.best,
    };
    let model = fit_gbdt(train, &hyper, derive_seed(seed, &[1]))?;
    Ok((auc(&model.predict_proba(test), &test.labels())?, hyper))
}

/// Mean held-out AUC over outer folds. With `synth = None` or
/// `n_prime = 0` this is the baseline.
pub fn nested_cv_auc(ds: &Dataset, synth: Option<&SynthesizerSpec>, n_prime: usize, opts: &CvOptions) -> Result<CvReport> {
    let splits = outer_splits(ds, opts.folds, opts.seed)?;
    let synth = synth.filter(|_| n_prime > 0);
    let leaked = match (synth, opts.leakage) {
        (Some(spec), true) => Some(spec.fit(ds, 0)?),
        _ => None,
    };
    let results = crate::par::try_map(&splits, |split| {
        let (synthetic, synth_train_ids) = match (synth, &leaked) {
            (None, _) => (None, Vec::new()),
            (Some(_), Some(fitted)) => (Some(fitted.generate(n_prime, split.fold as u64)?), ds.ids().to_vec()),
            (Some(spec), None) => {
                let fitted = spec.fit(&split.train, split.fold as u64)?;
                (Some(fitted.generate(n_prime, 0)?), split.train.ids().to_vec())
            }
        };
        let train = match &synthetic {
            Some(s) => concat(&split.train, s)?,
            None => split.train.clone(),
        };
        let (auc, hyper) = evaluate_fold(&train, &split.test, &opts.hyper, fold_seed(opts.seed, split.fold, 0))?;
        let trace = FoldTrace {
            fold: split.fold,
            synth_train_ids,
            model_train_ids: train.ids().to_vec(),
            eval_ids: split.test.ids().to_vec(),
        };
        Ok::<_, Error>((auc, hyper, trace))
    })?;
    let fold_aucs: Vec<f64> = results.iter().map(|r| r.0).collect();
    Ok(CvReport {
        mean_auc: fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64,
        fold_aucs,
        hypers: results.iter().map(|r| r.1).collect(),
        traces: results.into_iter().map(|r| r.2).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::synth::{SeqConfig, SynthKind};
    use crate::tabular::{Cell, ColumnSpec, Provenance, Schema};
    use rand::Rng;
    use std::collections::HashSet;
    use std::sync::Arc;

    fn signal(n: usize, seed: u64) -> Dataset {
        let schema = Arc::new(
            Schema::new(vec![
                ColumnSpec::numeric("a"),
                ColumnSpec::categorical("c", &["p", "q", "r"]),
                ColumnSpec::outcome("y", &["0", "1"]),
            ])
            .unwrap(),
        );
        let mut rng = rng_from(seed);
        let rows = (0..n)
            .map(|_| {
                let a: f64 = rng.random();
                let c = rng.random_range(0..3u32);
                let y = rng.random::<f64>() < 0.2 + 0.5 * a + 0.1 * c as f64;
                vec![Cell::Num(a), Cell::Cat(c), Cell::Cat(y as u32)]
            })
            .collect();
        Dataset::new(schema, rows, Provenance::Original).unwrap()
    }

    fn quick() -> CvOptions {
        CvOptions { seed: 3, hyper: HyperMode::Tune { ranges: HyperRanges::default(), budget: 3 }, ..Default::default() }
    }

    #[test]
    fn zero_rows_of_augmentation_equals_baseline() {
        let ds = signal(150, 1);
        let spec = SynthesizerSpec::new(SynthKind::Seq(SeqConfig::default()), 0).unwrap();
        let base = nested_cv_auc(&ds, None, 100, &quick()).unwrap();
        let zero = nested_cv_auc(&ds, Some(&spec), 0, &quick()).unwrap();
        assert_eq!(base.fold_aucs, zero.fold_aucs);
        assert_eq!(base.fold_aucs.len(), 5);
        assert!(base.mean_auc > 0.55);
    }

    #[test]
    fn evaluation_rows_never_reach_the_synthesizer() {
        let ds = signal(150, 2);
        let spec = SynthesizerSpec::new(SynthKind::Bootstrap, 0).unwrap();
        let report = nested_cv_auc(&ds, Some(&spec), 200, &quick()).unwrap();
        let mut all_eval = HashSet::new();
        for t in &report.traces {
            let eval: HashSet<_> = t.eval_ids.iter().collect();
            assert!(t.synth_train_ids.iter().all(|id| !eval.contains(id)));
            assert!(t.model_train_ids.iter().all(|id| !eval.contains(id)));
            assert_eq!(t.model_train_ids.len(), t.synth_train_ids.len() + 200);
            all_eval.extend(t.eval_ids.iter().copied());
        }
        assert_eq!(all_eval.len(), ds.len());

        let leaky = nested_cv_auc(&ds, Some(&spec), 200, &CvOptions { leakage: true, ..quick() }).unwrap();
        assert!(leaky.traces.iter().any(|t| {
            let eval: HashSet<_> = t.eval_ids.iter().collect();
            t.model_train_ids.iter().any(|id| eval.contains(id))
        }));
    }

    #[test]
    fn single_class_fold_is_an_error() {
        let ds = signal(60, 3);
        let pos: Vec<usize> = (0..ds.len()).filter(|&i| ds.label(i)).collect();
        let neg: Vec<usize> = (0..ds.len()).filter(|&i| !ds.label(i)).take(3).collect();
        let skew = ds.subset(&[pos, neg].concat());
        assert!(nested_cv_auc(&skew, None, 0, &quick()).is_err());
    }
}

//! Grid search over synthesizers and augmentation sizes under nested
//! cross-validation.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diversity::{diversity_of_augmentation, DiversityReport, EifConfig};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::synth::{FittedSynth, SynthKind, SynthesizerSpec};
use crate::tabular::{concat, Dataset};
use crate::workload::{evaluate_fold, fold_seed, outer_splits, tune, GbdtHyper, HyperMode, OuterSplit, OUTER_FOLDS};

/// Cells evaluated between two flushes of the results file.
const CHUNK: usize = 8;
pub const BASELINE_TAG: &str = "baseline";
pub const RESAMPLE_TAG: &str = "resample";

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub seed: u64,
    pub folds: usize,
    /// Hyperparameters are settled once per outer fold on the base training
    /// split and reused by every cell of that fold.
    pub hyper: HyperMode,
    pub eif: EifConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { seed: 0, folds: OUTER_FOLDS, hyper: HyperMode::default(), eif: EifConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub n_prime: usize,
    pub fold: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub synthesizer: String,
    pub n_prime: usize,
    pub mean_auc: f64,
    pub fold_aucs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub synthesizer: String,
    pub n_prime_max: usize,
    pub augmented_auc: f64,
    pub relative_auc_percent: f64,
}

/// One row per synthesizer: its own best size, and bootstrap at that size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRow {
    pub synthesizer: String,
    pub n_prime_max: usize,
    pub baseline_auc: f64,
    pub augmented_auc: f64,
    pub relative_auc_percent: f64,
    pub resampled_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiversity {
    pub fold: usize,
    pub generative: DiversityReport,
    pub resample: DiversityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub baseline_auc: f64,
    pub baseline_fold_aucs: Vec<f64>,
    pub sizes: Vec<usize>,
    pub grid: Vec<GridCell>,
    pub best: BestCell,
    pub per_synthesizer: Vec<SynthRow>,
    pub resampled_auc: f64,
    pub diversity_best: f64,
    pub diversity_resample: f64,
    pub fold_hypers: Vec<GbdtHyper>,
    pub diversity_folds: Vec<FoldDiversity>,
}

pub fn relative_auc_percent(baseline: f64, augmented: f64) -> f64 {
    100.0 * (augmented - baseline) / baseline
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

type Key = (String, usize, usize);

/// Rows of an earlier, possibly interrupted, results file. Unparseable
/// lines are dropped.
fn read_cells(path: &Path) -> HashMap<Key, f64> {
    let Ok(text) = fs::read_to_string(path) else {
        return HashMap::new();
    };
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return None;
            }
            let auc: f64 = f[3].parse().ok().filter(|a: &f64| a.is_finite())?;
            Some(((f[0].to_string(), f[1].parse().ok()?, f[2].parse().ok()?), auc))
        })
        .collect()
}

fn cell_line(tag: &str, n: usize, fold: usize, auc: f64) -> String {
    format!("{tag},{n},{fold},{auc}\n")
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn append(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new().append(true).create(true).open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

struct Fold<'a> {
    split: &'a OuterSplit,
    hyper: GbdtHyper,
    seed: u64,
}

impl Fold<'_> {
    fn auc_with(&self, fitted: &FittedSynth, n: usize) -> Result<f64> {
        let train = if n == 0 { self.split.train.clone() } else { concat(&self.split.train, &fitted.generate(n, 0)?)? };
        Ok(evaluate_fold(&train, &self.split.test, &HyperMode::Fixed(self.hyper), self.seed)?.0)
    }
}

/// Evaluate every (synthesizer, size) cell on the same outer folds and pick
/// the best. With `cells_path`, completed cells are flushed as they finish
/// and cells already present in the file are not recomputed.
pub fn run_sweep(
    ds: &Dataset,
    synthesizers: &[SynthesizerSpec],
    sizes: &[usize],
    cfg: &SweepConfig,
    cells_path: Option<&Path>,
) -> Result<SweepResult> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if synthesizers.is_empty() || sizes.is_empty() {
        return Err(Error::NoCells);
    }
    let mut tags: Vec<&str> = synthesizers.iter().map(|s| s.tag()).collect();
    tags.sort_unstable();
    if tags.windows(2).any(|w| w[0] == w[1]) || tags.contains(&BASELINE_TAG) || tags.contains(&RESAMPLE_TAG) {
        return Err(Error::invalid("synthesizer tags must be unique and not reserved"));
    }

    let splits = outer_splits(ds, cfg.folds, cfg.seed)?;
    let folds: Vec<Fold> = crate::par::try_map_range(splits.len(), |k| {
        let split = &splits[k];
        let seed = fold_seed(cfg.seed, split.fold, 0);
        let hyper = match &cfg.hyper {
            HyperMode::Fixed(h) => *h,
            HyperMode::Tune { ranges, budget } => tune(&split.train, ranges, *budget, derive_seed(seed, &[0]))?.best,
        };
        Ok::<_, Error>(Fold { split, hyper, seed })
    })?;
    let baseline_fold_aucs = crate::par::try_map(&folds, |f| {
        evaluate_fold(&f.split.train, &f.split.test, &HyperMode::Fixed(f.hyper), f.seed).map(|r| r.0)
    })?;
    let baseline_auc = mean(&baseline_fold_aucs);

    let pairs: Vec<(usize, usize)> =
        (0..synthesizers.len()).flat_map(|s| (0..folds.len()).map(move |k| (s, k))).collect();
    let fitted: Vec<FittedSynth> =
        crate::par::try_map(&pairs, |&(s, k)| synthesizers[s].fit(&folds[k].split.train, k as u64))?;
    let fitted_for = |s: usize, k: usize| &fitted[s * folds.len() + k];

    let mut done = cells_path.map(read_cells).unwrap_or_default();
    let mut tasks: Vec<(usize, usize, usize)> = Vec::new();
    for (s, spec) in synthesizers.iter().enumerate() {
        for &n in &sizes {
            for k in 0..folds.len() {
                if !done.contains_key(&(spec.tag().to_string(), n, k)) {
                    tasks.push((s, n, k));
                }
            }
        }
    }
    let canonical = |done: &HashMap<Key, f64>| {
        let mut text = String::from("synthesizer,n_prime,fold,auc\n");
        for (k, a) in baseline_fold_aucs.iter().enumerate() {
            text.push_str(&cell_line(BASELINE_TAG, 0, k, *a));
        }
        for spec in synthesizers {
            for &n in &sizes {
                for k in 0..folds.len() {
                    if let Some(a) = done.get(&(spec.tag().to_string(), n, k)) {
                        text.push_str(&cell_line(spec.tag(), n, k, *a));
                    }
                }
            }
        }
        text
    };
    if let Some(p) = cells_path {
        write_all(p, &canonical(&done))?;
    }
    for chunk in tasks.chunks(CHUNK) {
        let aucs = crate::par::try_map(chunk, |&(s, n, k)| folds[k].auc_with(fitted_for(s, k), n))?;
        let mut text = String::new();
        for (&(s, n, k), a) in chunk.iter().zip(aucs) {
            let tag = synthesizers[s].tag();
            text.push_str(&cell_line(tag, n, k, a));
            done.insert((tag.to_string(), n, k), a);
        }
        if let Some(p) = cells_path {
            append(p, &text)?;
        }
    }
    if let Some(p) = cells_path {
        write_all(p, &canonical(&done))?;
    }

    let fold_aucs = |tag: &str, n: usize| -> Vec<f64> { (0..folds.len()).map(|k| done[&(tag.to_string(), n, k)]).collect() };
    let mut grid = Vec::new();
    for spec in synthesizers {
        for &n in &sizes {
            let f = fold_aucs(spec.tag(), n);
            grid.push(GridCell { synthesizer: spec.tag().to_string(), n_prime: n, mean_auc: mean(&f), fold_aucs: f });
        }
    }

    // Size-major scan with strict improvement: ties go to the smaller size,
    // then to the earlier synthesizer.
    let argmax = |allowed: &dyn Fn(usize) -> bool| {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, &n) in sizes.iter().enumerate() {
            for s in (0..synthesizers.len()).filter(|&s| allowed(s)) {
                let a = grid[s * sizes.len() + i].mean_auc;
                if best.is_none_or(|b| a > b.2) {
                    best = Some((s, n, a));
                }
            }
        }
        best
    };
    let generative = |s: usize| !synthesizers[s].is_resampler();
    let (best_s, best_n, best_auc) =
        argmax(&generative).or_else(|| argmax(&|_| true)).expect("grid is non-empty");

    let resampler = SynthesizerSpec::new(SynthKind::Bootstrap, derive_seed(cfg.seed, &[2]))?;
    let resample_fits: Vec<FittedSynth> =
        crate::par::try_map(&folds, |f| resampler.fit(&f.split.train, f.split.fold as u64))?;
    let mut resampled: HashMap<usize, f64> = HashMap::new();
    let mut per_synthesizer = Vec::new();
    for (s, spec) in synthesizers.iter().enumerate() {
        let (_, n, a) = argmax(&|t| t == s).unwrap();
        if let std::collections::hash_map::Entry::Vacant(e) = resampled.entry(n) {
            let f = crate::par::try_map(&folds, |f| f.auc_with(&resample_fits[f.split.fold], n))?;
            e.insert(mean(&f));
        }
        per_synthesizer.push(SynthRow {
            synthesizer: spec.tag().to_string(),
            n_prime_max: n,
            baseline_auc,
            augmented_auc: a,
            relative_auc_percent: relative_auc_percent(baseline_auc, a),
            resampled_auc: resampled[&n],
        });
    }

    let diversity_folds = crate::par::try_map(&folds, |f| {
        let k = f.split.fold;
        let seed = fold_seed(cfg.seed, k, 3);
        let with = |fit: &FittedSynth| -> Result<DiversityReport> {
            let aug = concat(&f.split.train, &fit.generate(best_n, 0)?)?;
            diversity_of_augmentation(&f.split.train, &aug, &cfg.eif, seed)
        };
        Ok::<_, Error>(FoldDiversity { fold: k, generative: with(fitted_for(best_s, k))?, resample: with(&resample_fits[k])? })
    })?;
    let div = |g: fn(&FoldDiversity) -> f64| diversity_folds.iter().map(g).sum::<f64>() / diversity_folds.len() as f64;

    Ok(SweepResult {
        baseline_auc,
        baseline_fold_aucs,
        best: BestCell {
            synthesizer: synthesizers[best_s].tag().to_string(),
            n_prime_max: best_n,
            augmented_auc: best_auc,
            relative_auc_percent: relative_auc_percent(baseline_auc, best_auc),
        },
        resampled_auc: resampled[&best_n],
        diversity_best: div(|d| d.generative.diversity),
        diversity_resample: div(|d| d.resample.diversity),
        sizes,
        grid,
        per_synthesizer,
        fold_hypers: folds.iter().map(|f| f.hyper).collect(),
        diversity_folds,
    })
}

/// Per-synthesizer summary at display precision.
pub fn synth_table_csv(result: &SweepResult) -> String {
    let mut out = String::from("synthesizer,n_prime_max,baseline_auc,augmented_auc,relative_auc_percent,resampled_auc\n");
    for r in &result.per_synthesizer {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.2},{:.4}\n",
            r.synthesizer, r.n_prime_max, r.baseline_auc, r.augmented_auc, r.relative_auc_percent, r.resampled_auc
        ));
    }
    out
}

/// One-line summary of the best cell at display precision.
pub fn summary_csv(dataset: &str, result: &SweepResult) -> String {
    let b = &result.best;
    format!(
        "dataset,synthesizer,n_prime_max,baseline_auc,augmented_auc,relative_auc_percent,resampled_auc,diversity_generative,diversity_resample\n\
         {dataset},{},{},{:.4},{:.4},{:.2},{:.4},{:.4},{:.4}\n",
        b.synthesizer,
        b.n_prime_max,
        result.baseline_auc,
        b.augmented_auc,
        b.relative_auc_percent,
        result.resampled_auc,
        result.diversity_best,
        result.diversity_resample
    )
}

/// Contamination curves of every fold, long format.
pub fn curves_csv(result: &SweepResult) -> String {
    let mut out = String::from("fold,threshold,base,generative,resample\n");
    for d in &result.diversity_folds {
        for (i, t) in d.generative.base.thresholds.iter().enumerate() {
            out.push_str(&format!(
                "{},{t},{},{},{}\n",
                d.fold, d.generative.base.rates[i], d.generative.augmented.rates[i], d.resample.augmented.rates[i]
            ));
        }
    }
    out
}

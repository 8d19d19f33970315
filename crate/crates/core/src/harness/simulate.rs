//! The simulation that produces training records for the decision model:
//! small base samples drawn from a large population, augmented along
//! geometric series and scored on a fixed test set.

use serde::{Deserialize, Serialize};

use super::series::{geometric_series_with_sd, BASE_SD, SERIES_LEN};
use crate::complexity::profile;
use crate::decision::{DecisionFeatures, DecisionRecord};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::synth::SynthesizerSpec;
use crate::tabular::{concat, stratified_sample, train_test_split, Dataset};
use crate::workload::{auc, fit_gbdt, tune, GbdtHyper, HyperMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dataset_id: String,
    pub n0_grid: Vec<usize>,
    /// Base samples drawn per n0 value.
    pub replicates: usize,
    pub series_count: usize,
    /// Leading sizes of each series that are evaluated.
    pub sizes_per_series: usize,
    /// Sizes above this are skipped.
    pub max_nprime: Option<usize>,
    pub series_sd: f64,
    pub train_fraction: f64,
    /// Tuned once per base sample and reused for all its cells.
    pub hyper: HyperMode,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dataset_id: "population".into(),
            n0_grid: vec![50, 100, 200, 400],
            replicates: 1,
            series_count: 2,
            sizes_per_series: SERIES_LEN,
            max_nprime: Some(5000),
            series_sd: BASE_SD,
            train_fraction: 0.7,
            hyper: HyperMode::default(),
            seed: 0,
        }
    }
}

impl SimulationConfig {
    /// The full published grid: 40 base sizes, 10 series of 30 sizes each.
    pub fn full_scale(dataset_id: &str, seed: u64) -> Self {
        let mut n0_grid: Vec<usize> = (1..=20).map(|i| 5 * i).collect();
        n0_grid.extend((1..=10).map(|i| 100 + 40 * i));
        n0_grid.extend((1..=10).map(|i| 500 + 150 * i));
        Self {
            dataset_id: dataset_id.into(),
            n0_grid,
            series_count: 10,
            max_nprime: None,
            seed,
            ..Default::default()
        }
    }

    /// Augmented evaluations per base sample and synthesizer, given the
    /// drawn series.
    fn sizes(&self, series: &[Vec<usize>]) -> Vec<Vec<usize>> {
        series
            .iter()
            .map(|s| {
                s.iter()
                    .take(self.sizes_per_series)
                    .copied()
                    .filter(|&n| self.max_nprime.is_none_or(|m| n <= m))
                    .collect()
            })
            .collect()
    }

    /// Datasets evaluated by a run with `synthesizers` generators, baselines
    /// included, when no size is truncated.
    pub fn planned_evaluations(&self, synthesizers: usize) -> usize {
        let bases = self.n0_grid.len() * self.replicates;
        bases * self.series_count * self.sizes_per_series * synthesizers + bases
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvaluation {
    pub n0: usize,
    pub replicate: usize,
    pub synthesizer: String,
    pub series: usize,
    pub n_prime: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBaseline {
    pub n0: usize,
    pub replicate: usize,
    pub auc: f64,
    pub features: DecisionFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub series_bases: Vec<f64>,
    pub baselines: Vec<SimBaseline>,
    pub evaluations: Vec<SimEvaluation>,
    pub records: Vec<DecisionRecord>,
}

impl SimulationResult {
    pub fn total_evaluations(&self) -> usize {
        self.baselines.len() + self.evaluations.len()
    }
}

fn score(train: &Dataset, test: &Dataset, hyper: &GbdtHyper, seed: u64) -> Result<f64> {
    auc(&fit_gbdt(train, hyper, seed)?.predict_proba(test), &test.labels())
}

type BaseOutcome = (SimBaseline, Vec<SimEvaluation>, Vec<DecisionRecord>);

pub fn simulate_part1(
    population: &Dataset,
    synthesizers: &[SynthesizerSpec],
    cfg: &SimulationConfig,
) -> Result<SimulationResult> {
    let largest = cfg.n0_grid.iter().copied().max().ok_or_else(|| Error::invalid("empty n0 grid"))?;
    if population.len() < 2 * largest {
        return Err(Error::invalid(format!(
            "population of {} rows is smaller than twice the largest n0 ({largest})",
            population.len()
        )));
    }
    if cfg.replicates == 0 || synthesizers.is_empty() {
        return Err(Error::invalid("need at least one replicate and one synthesizer"));
    }
    let (pool, test) = train_test_split(population, cfg.train_fraction, derive_seed(cfg.seed, &[0]))?;
    let drawn = (0..cfg.series_count)
        .map(|s| geometric_series_with_sd(derive_seed(cfg.seed, &[1, s as u64]), cfg.series_sd))
        .collect::<Result<Vec<_>>>()?;
    let sizes = cfg.sizes(&drawn.iter().map(|s| s.sizes.clone()).collect::<Vec<_>>());

    let bases: Vec<(usize, usize, usize)> = cfg
        .n0_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &n0)| (0..cfg.replicates).map(move |r| (i, n0, r)))
        .collect();
    let outcomes: Vec<BaseOutcome> = crate::par::try_map(&bases, |&(i, n0, r)| {
        let seed = derive_seed(cfg.seed, &[2, i as u64, r as u64]);
        let base = stratified_sample(&pool, n0, derive_seed(seed, &[0]))?;
        let hyper = match &cfg.hyper {
            HyperMode::Fixed(h) => *h,
            HyperMode::Tune { ranges, budget } => tune(&base, ranges, *budget, derive_seed(seed, &[1]))?.best,
        };
        let fit_seed = derive_seed(seed, &[2]);
        let baseline = score(&base, &test, &hyper, fit_seed)?;
        let features = DecisionFeatures::from_profile(&profile(&base, Some(baseline))?)?;

        let cells: Vec<(usize, usize, usize)> = (0..synthesizers.len())
            .flat_map(|g| sizes.iter().enumerate().flat_map(move |(s, ns)| ns.iter().map(move |&n| (g, s, n))))
            .collect();
        let fitted = crate::par::try_map(synthesizers, |spec| spec.fit(&base, derive_seed(seed, &[3])))?;
        let aucs = crate::par::try_map(&cells, |&(g, s, n)| {
            let train = concat(&base, &fitted[g].generate(n, s as u64)?)?;
            score(&train, &test, &hyper, fit_seed)
        })?;
        let evaluations: Vec<SimEvaluation> = cells
            .iter()
            .zip(aucs)
            .map(|(&(g, s, n), auc)| SimEvaluation {
                n0,
                replicate: r,
                synthesizer: synthesizers[g].tag().to_string(),
                series: s,
                n_prime: n,
                auc,
            })
            .collect();
        let records = synthesizers
            .iter()
            .map(|spec| {
                let best = evaluations
                    .iter()
                    .filter(|e| e.synthesizer == spec.tag())
                    .map(|e| e.auc)
                    .fold(f64::NEG_INFINITY, f64::max);
                DecisionRecord {
                    dataset_id: cfg.dataset_id.clone(),
                    generative_model: spec.tag().to_string(),
                    features,
                    label: best > baseline,
                }
            })
            .collect();
        Ok::<_, Error>((SimBaseline { n0, replicate: r, auc: baseline, features }, evaluations, records))
    })?;

    let mut result = SimulationResult {
        series_bases: drawn.iter().map(|s| s.b).collect(),
        baselines: Vec::new(),
        evaluations: Vec::new(),
        records: Vec::new(),
    };
    for (b, e, r) in outcomes {
        result.baselines.push(b);
        result.evaluations.extend(e);
        result.records.extend(r);
    }
    Ok(result)
}

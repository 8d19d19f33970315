//! Synthetic populations with a known logistic outcome model, used in
//! place of data that cannot be shared.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::rng::{task_rng, TaskRng};
use crate::tabular::{Cell, ColumnSpec, Dataset, Provenance, Schema, HIGH_CARDINALITY_LEVELS};

const CALIBRATION_ROWS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Numeric,
    Categorical,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub name: String,
    pub kind: PredictorKind,
    /// Level count for categorical predictors.
    #[serde(default)]
    pub levels: usize,
    /// Relative contribution to the linear predictor.
    #[serde(default = "one")]
    pub weight: f64,
    /// Share of cells blanked completely at random after the outcome is drawn.
    #[serde(default)]
    pub missing_rate: f64,
}

fn half() -> f64 {
    0.5
}

fn default_auc() -> f64 {
    0.8
}

fn default_outcome() -> String {
    "y".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub size: usize,
    pub columns: Vec<PredictorSpec>,
    #[serde(default = "half")]
    pub prevalence: f64,
    /// AUC of the true outcome probability, the best any classifier can do
    /// with complete data.
    #[serde(default = "default_auc")]
    pub target_auc: f64,
    /// Share of each latent predictor's variance explained by one common
    /// factor.
    #[serde(default)]
    pub correlation: f64,
    #[serde(default = "default_outcome")]
    pub outcome: String,
}

impl PopulationSpec {
    /// Mixed predictors: about five numeric per three categorical with
    /// 3, 4, 6, .. levels.
    pub fn mixed(predictors: usize, size: usize, target_auc: f64) -> Self {
        let columns = (0..predictors)
            .map(|i| {
                if i % 8 < 5 {
                    PredictorSpec {
                        name: format!("x{}", i + 1),
                        kind: PredictorKind::Numeric,
                        levels: 0,
                        weight: 1.0,
                        missing_rate: 0.0,
                    }
                } else {
                    PredictorSpec {
                        name: format!("c{}", i + 1),
                        kind: PredictorKind::Categorical,
                        levels: [3, 4, 6][i % 8 - 5],
                        weight: 1.0,
                        missing_rate: 0.0,
                    }
                }
            })
            .collect();
        Self { size, columns, prevalence: 0.5, target_auc, correlation: 0.2, outcome: default_outcome() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("population spec: {m}")));
        if self.size == 0 {
            return bad("size must be positive");
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return bad("prevalence must lie in (0, 1)");
        }
        if !(0.5..1.0).contains(&self.target_auc) {
            return bad("target AUC must lie in [0.5, 1)");
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return bad("correlation must lie in [0, 1)");
        }
        for c in &self.columns {
            if c.kind == PredictorKind::Categorical && c.levels < 2 {
                return bad("categorical predictors need at least two levels");
            }
            if !(0.0..1.0).contains(&c.missing_rate) || !c.weight.is_finite() {
                return bad("missing rates must lie in [0, 1) and weights be finite");
            }
        }
        Ok(())
    }

    fn schema(&self) -> Result<Arc<Schema>> {
        let mut cols: Vec<ColumnSpec> = self
            .columns
            .iter()
            .map(|c| match c.kind {
                PredictorKind::Numeric => ColumnSpec::numeric(&c.name),
                PredictorKind::Categorical => {
                    let levels: Vec<String> = (1..=c.levels).map(|l| format!("L{l}")).collect();
                    ColumnSpec::categorical(&c.name, &levels).with_high_cardinality(c.levels > HIGH_CARDINALITY_LEVELS)
                }
            })
            .collect();
        cols.push(ColumnSpec::outcome(&self.outcome, &["0", "1"]));
        Ok(Arc::new(Schema::new(cols)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub intercept: f64,
    pub slope: f64,
    pub bayes_auc: f64,
    /// Mean and sd of the raw linear predictor.
    pub center: f64,
    pub spread: f64,
}

struct Generator<'a> {
    spec: &'a PopulationSpec,
    /// Per categorical predictor, standardized level effects.
    effects: Vec<Vec<f64>>,
}

/// Equal-probability level of a standard normal draw.
fn level_of(z: f64, levels: usize) -> usize {
    let u = 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
    ((u * levels as f64) as usize).min(levels - 1)
}

impl<'a> Generator<'a> {
    fn new(spec: &'a PopulationSpec, seed: u64) -> Self {
        let mut rng = task_rng(seed, &[2]);
        let effects = spec
            .columns
            .iter()
            .map(|c| {
                if c.kind == PredictorKind::Numeric {
                    return Vec::new();
                }
                let raw: Vec<f64> = (0..c.levels).map(|_| rng.sample(StandardNormal)).collect();
                let mean = raw.iter().sum::<f64>() / raw.len() as f64;
                let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / raw.len() as f64).sqrt();
                raw.iter().map(|v| (v - mean) / sd.max(1e-12)).collect()
            })
            .collect();
        Self { spec, effects }
    }

    /// Predictor cells and the raw linear predictor for one row.
    fn draw(&self, rng: &mut TaskRng) -> (Vec<Cell>, f64) {
        let rho = self.spec.correlation;
        let common: f64 = rng.sample(StandardNormal);
        let mut cells = Vec::with_capacity(self.spec.columns.len() + 1);
        let mut eta = 0.0;
        for (j, c) in self.spec.columns.iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            let z = rho.sqrt() * common + (1.0 - rho).sqrt() * e;
            match c.kind {
                PredictorKind::Numeric => {
                    eta += c.weight * z;
                    cells.push(Cell::Num(z));
                }
                PredictorKind::Categorical => {
                    let l = level_of(z, c.levels);
                    eta += c.weight * self.effects[j][l];
                    cells.push(Cell::Cat(l as u32));
                }
            }
        }
        (cells, eta)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Expected AUC of the score `eta` when labels are Bernoulli(`p`).
fn expected_auc(eta: &[f64], p: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..eta.len()).collect();
    idx.sort_by(|&a, &b| eta[a].partial_cmp(&eta[b]).unwrap());
    let (mut num, mut neg_below) = (0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut pos_g, mut neg_g) = (0.0, 0.0);
        while j < idx.len() && eta[idx[j]] == eta[idx[i]] {
            pos_g += p[idx[j]];
            neg_g += 1.0 - p[idx[j]];
            j += 1;
        }
        num += pos_g * neg_below + 0.5 * pos_g * neg_g;
        neg_below += neg_g;
        i = j;
    }
    let pos: f64 = p.iter().sum();
    num / (pos * (p.len() as f64 - pos))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Intercept and slope on the standardized linear predictor that hit the
/// target prevalence and Bayes AUC, fitted on a fixed Monte Carlo sample.
pub fn calibrate(spec: &PopulationSpec, seed: u64) -> Result<Calibration> {
    spec.validate()?;
    let generator = Generator::new(spec, seed);
    let mut rng = task_rng(seed, &[0]);
    let raw: Vec<f64> = (0..CALIBRATION_ROWS).map(|_| generator.draw(&mut rng).1).collect();
    let center = raw.iter().sum::<f64>() / raw.len() as f64;
    let spread = (raw.iter().map(|v| (v - center).powi(2)).sum::<f64>() / raw.len() as f64).sqrt();
    let eta: Vec<f64> = raw.iter().map(|v| if spread > 0.0 { (v - center) / spread } else { 0.0 }).collect();
    let intercept_for = |slope: f64| {
        bisect(-40.0, 40.0, |a| eta.iter().map(|e| sigmoid(a + slope * e)).sum::<f64>() / eta.len() as f64 - spec.prevalence)
    };
    let auc_for = |slope: f64| {
        let a = intercept_for(slope);
        let p: Vec<f64> = eta.iter().map(|e| sigmoid(a + slope * e)).collect();
        expected_auc(&eta, &p)
    };
    let slope = if spec.target_auc <= 0.5 || spread == 0.0 {
        0.0
    } else {
        bisect(0.0, 30.0, |s| auc_for(s) - spec.target_auc)
    };
    let intercept = intercept_for(slope);
    Ok(Calibration { intercept, slope, bayes_auc: if slope == 0.0 { 0.5 } else { auc_for(slope) }, center, spread })
}

/// Draw a population of exactly `spec.size` rows.
pub fn benchmark_generator(spec: &PopulationSpec, seed: u64) -> Result<Dataset> {
    let cal = calibrate(spec, seed)?;
    let schema = spec.schema()?;
    let generator = Generator::new(spec, seed);
    let mut rng = task_rng(seed, &[1]);
    let mut rows = Vec::with_capacity(spec.size);
    for _ in 0..spec.size {
        let (mut cells, raw) = generator.draw(&mut rng);
        let eta = if cal.spread > 0.0 { (raw - cal.center) / cal.spread } else { 0.0 };
        let y = rng.random::<f64>() < sigmoid(cal.intercept + cal.slope * eta);
        for (cell, c) in cells.iter_mut().zip(&spec.columns) {
            if c.missing_rate > 0.0 && rng.random::<f64>() < c.missing_rate {
                *cell = Cell::Missing;
            }
        }
        cells.push(Cell::Cat(y as u32));
        rows.push(cells);
    }
    Dataset::new(schema, rows, Provenance::Original)
}

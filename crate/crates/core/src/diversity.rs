//! Diversity added by augmentation, measured with an extended isolation
//! forest fitted on the base data.
//!
//! Both datasets are scored by the forest; at each threshold
//! `0.01, 0.02, .., 1.00` the contamination rate is the share of rows
//! scoring at or above it. Positive gaps `x` between the augmented and base
//! curves are weighted as `x (2 - x)` and averaged.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::task_rng;
use crate::tabular::{fit_target_encoder, Cell, ColumnKind, Dataset, Schema, TargetEncoder, HIGH_CARDINALITY_LEVELS};

pub const N_THRESHOLDS: usize = 100;

pub fn thresholds() -> Vec<f64> {
    (1..=N_THRESHOLDS).map(|j| j as f64 / N_THRESHOLDS as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Hyperplanes over every encoded dimension.
    Full,
    /// One coordinate per split, as in the original isolation forest.
    AxisParallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalEncoding {
    /// One-hot up to the high-cardinality limit, target encoding above it.
    Auto,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EifConfig {
    pub trees: usize,
    pub subsample: usize,
    pub extension: Extension,
    pub categorical: CategoricalEncoding,
}

impl Default for EifConfig {
    fn default() -> Self {
        Self { trees: 100, subsample: 256, extension: Extension::Full, categorical: CategoricalEncoding::Auto }
    }
}

#[derive(Debug, Clone)]
enum Coord {
    /// Min-max scaled value, then a missing indicator. Missing values are
    /// imputed with the median.
    Numeric { col: usize, min: f64, scale: f64, median: f64 },
    /// One column per level plus one for missing.
    OneHot { col: usize, levels: usize },
    Target { col: usize, encoder: TargetEncoder },
}

impl Coord {
    fn width(&self) -> usize {
        match self {
            Coord::Numeric { .. } => 2,
            Coord::OneHot { levels, .. } => levels + 1,
            Coord::Target { .. } => 1,
        }
    }
}

#[derive(Debug, Clone)]
struct Encoding {
    coords: Vec<Coord>,
    dims: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

impl Encoding {
    /// Every column takes part, the outcome as a 0/1 coordinate.
    fn fit(base: &Dataset, mode: CategoricalEncoding) -> Result<Self> {
        let schema = base.schema();
        let mut coords = Vec::with_capacity(schema.len());
        for (col, spec) in schema.columns.iter().enumerate() {
            let coord = match spec.kind {
                ColumnKind::Numeric => {
                    let values: Vec<f64> = base.column(col).filter_map(|c| c.as_num()).collect();
                    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let (min, scale) = if values.is_empty() {
                        (0.0, 1.0)
                    } else if max > min {
                        (min, 1.0 / (max - min))
                    } else {
                        (min, 1.0)
                    };
                    Coord::Numeric { col, min, scale, median: median(values) }
                }
                ColumnKind::BinaryOutcome => Coord::OneHot { col, levels: 1 },
                ColumnKind::Categorical => {
                    if mode == CategoricalEncoding::Target || spec.n_levels() > HIGH_CARDINALITY_LEVELS {
                        Coord::Target { col, encoder: fit_target_encoder(base, &spec.name, 20.0)? }
                    } else {
                        Coord::OneHot { col, levels: spec.n_levels() }
                    }
                }
            };
            coords.push(coord);
        }
        let dims = coords.iter().map(Coord::width).sum();
        Ok(Self { coords, dims })
    }

    fn encode(&self, schema: &Schema, row: &[Cell], out: &mut Vec<f64>) {
        out.clear();
        for coord in &self.coords {
            match *coord {
                Coord::Numeric { col, min, scale, median } => match row[col] {
                    Cell::Num(v) => out.extend([(v - min) * scale, 0.0]),
                    _ => out.extend([(median - min) * scale, 1.0]),
                },
                // the outcome maps to a single 0/1 coordinate
                Coord::OneHot { col, levels: 1 } => out.push(row[col].as_cat().unwrap_or(0).min(1) as f64),
                Coord::OneHot { col, levels } => {
                    let start = out.len();
                    out.resize(start + levels + 1, 0.0);
                    match row[col] {
                        Cell::Cat(l) if (l as usize) < levels => out[start + l as usize] = 1.0,
                        Cell::Cat(_) => {}
                        _ => out[start + levels] = 1.0,
                    }
                }
                Coord::Target { col, ref encoder } => out.push(encoder.encode(&schema.columns[col], row[col])),
            }
        }
    }

    fn matrix(&self, ds: &Dataset) -> Vec<Vec<f64>> {
        let mut buf = Vec::with_capacity(self.dims);
        ds.rows()
            .iter()
            .map(|r| {
                self.encode(ds.schema(), r, &mut buf);
                buf.clone()
            })
            .collect()
    }
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + 0.577_215_664_901_532_9) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone)]
enum INode {
    External { size: usize },
    Internal { normal: Vec<f64>, offset: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct IsolationTree {
    nodes: Vec<INode>,
}

impl IsolationTree {
    fn build<R: Rng>(points: &[&[f64]], limit: usize, extension: Extension, rng: &mut R) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.grow(points, 0, limit, extension, rng);
        tree
    }

    fn grow<R: Rng>(&mut self, points: &[&[f64]], depth: usize, limit: usize, extension: Extension, rng: &mut R) -> usize {
        let id = self.nodes.len();
        if depth >= limit || points.len() <= 1 {
            self.nodes.push(INode::External { size: points.len() });
            return id;
        }
        let dims = points[0].len();
        let mut normal: Vec<f64> = match extension {
            Extension::Full => (0..dims).map(|_| rng.sample(StandardNormal)).collect(),
            Extension::AxisParallel => {
                let mut v = vec![0.0; dims];
                v[rng.random_range(0..dims)] = 1.0;
                v
            }
        };
        if normal.iter().all(|&x| x == 0.0) {
            normal[0] = 1.0;
        }
        // intercept drawn uniformly in the node's bounding box
        let mut offset = 0.0;
        for d in 0..dims {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[d]), hi.max(p[d])));
            let u: f64 = rng.random();
            offset += normal[d] * (lo + u * (hi - lo));
        }
        let (left, right): (Vec<&[f64]>, Vec<&[f64]>) = points.iter().partition(|p| dot(&normal, p) <= offset);
        self.nodes.push(INode::External { size: 0 });
        let l = self.grow(&left, depth + 1, limit, extension, rng);
        let r = self.grow(&right, depth + 1, limit, extension, rng);
        self.nodes[id] = INode::Internal { normal, offset, left: l, right: r };
        id
    }

    fn path_length(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[i] {
                INode::External { size } => return depth + average_path_length(*size),
                INode::Internal { normal, offset, left, right } => {
                    i = if dot(normal, x) <= *offset { *left } else { *right };
                    depth += 1.0;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[INode], i: usize) -> usize {
            match &nodes[i] {
                INode::External { .. } => 0,
                INode::Internal { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct ExtendedIsolationForest {
    schema: Arc<Schema>,
    encoding: Encoding,
    pub trees: Vec<IsolationTree>,
    pub subsample_size: usize,
    pub normalizer: f64,
}

pub fn fit_eif(base: &Dataset, config: &EifConfig, seed: u64) -> Result<ExtendedIsolationForest> {
    if base.is_empty() {
        return Err(Error::NoRows);
    }
    if base.len() < 2 {
        return Err(Error::degenerate("an isolation forest needs at least two rows"));
    }
    if config.trees == 0 || config.subsample < 2 {
        return Err(Error::invalid("forest needs at least one tree and a subsample of two"));
    }
    let encoding = Encoding::fit(base, config.categorical)?;
    let points = encoding.matrix(base);
    let psi = config.subsample.min(base.len());
    let limit = (psi as f64).log2().ceil() as usize;
    let trees = crate::par::map_range(config.trees, |t| {
        let mut rng = task_rng(seed, &[t as u64]);
        let mut idx = sample(&mut rng, points.len(), psi).into_vec();
        idx.sort_unstable();
        let subset: Vec<&[f64]> = idx.iter().map(|&i| points[i].as_slice()).collect();
        IsolationTree::build(&subset, limit, config.extension, &mut rng)
    });
    Ok(ExtendedIsolationForest {
        schema: base.schema_arc().clone(),
        encoding,
        trees,
        subsample_size: psi,
        normalizer: average_path_length(psi),
    })
}

/// Anomaly score `2^(-E[h(x)] / c(psi))` per row.
pub fn outlier_scores(forest: &ExtendedIsolationForest, ds: &Dataset) -> Result<Vec<f64>> {
    forest.schema.unify(ds.schema())?;
    let points = forest.encoding.matrix(ds);
    Ok(crate::par::map(&points, |x| {
        let mean = forest.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / forest.trees.len() as f64;
        (-mean / forest.normalizer).exp2()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationCurve {
    pub thresholds: Vec<f64>,
    pub rates: Vec<f64>,
}

pub fn contamination_curve(scores: &[f64]) -> Result<ContaminationCurve> {
    if scores.is_empty() {
        return Err(Error::invalid("contamination curve needs at least one score"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are not NaN"));
    let n = sorted.len() as f64;
    let thresholds = thresholds();
    let rates = thresholds
        .iter()
        .map(|&t| (sorted.len() - sorted.partition_point(|&s| s < t)) as f64 / n)
        .collect();
    Ok(ContaminationCurve { thresholds, rates })
}

/// Mean over thresholds of `x (2 - x)` for the non-negative gaps
/// `x = aug - base`.
pub fn diversity(base: &ContaminationCurve, aug: &ContaminationCurve) -> Result<f64> {
    if base.thresholds != aug.thresholds {
        return Err(Error::invalid("curves use different thresholds"));
    }
    let total: f64 = base
        .rates
        .iter()
        .zip(&aug.rates)
        .map(|(b, a)| a - b)
        .filter(|&x| x >= 0.0)
        .map(|x| x * (2.0 - x))
        .sum();
    Ok(total / base.rates.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub diversity: f64,
    pub base: ContaminationCurve,
    pub augmented: ContaminationCurve,
}

pub fn diversity_of_augmentation(
    base: &Dataset,
    augmented: &Dataset,
    config: &EifConfig,
    seed: u64,
) -> Result<DiversityReport> {
    let forest = fit_eif(base, config, seed)?;
    let base_curve = contamination_curve(&outlier_scores(&forest, base)?)?;
    let aug_curve = contamination_curve(&outlier_scores(&forest, augmented)?)?;
    Ok(DiversityReport {
        diversity: diversity(&base_curve, &aug_curve)?,
        base: base_curve,
        augmented: aug_curve,
    })
}

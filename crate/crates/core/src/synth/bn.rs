//! Discrete Bayesian network synthesizer.
//!
//! Numeric columns are cut into equal-frequency bins, high-cardinality
//! categoricals are target-encoded and then binned, and missing values get
//! a state of their own. Structure is found by BIC hill climbing with
//! random restarts; CPTs are MAP estimates under a symmetric Dirichlet.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, task_rng};
use crate::tabular::{fit_target_encoder, Cell, ColumnKind, Dataset, Provenance, QuantileBins, RowId, Schema, TargetEncoder};

const MIN_DELTA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BnConfig {
    pub bins: usize,
    pub max_parents: usize,
    pub restarts: usize,
    pub alpha: f64,
    /// Smoothing for the target encoder applied to high-cardinality columns.
    pub encoder_smoothing: f64,
    pub max_iterations: usize,
}

impl Default for BnConfig {
    fn default() -> Self {
        Self {
            bins: 5,
            max_parents: 3,
            restarts: 20,
            alpha: 1.0,
            encoder_smoothing: 20.0,
            max_iterations: 1000,
        }
    }
}

impl BnConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.bins < 1 {
            return Err(Error::invalid("bn bins must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("bn alpha must be positive"));
        }
        if self.encoder_smoothing.is_nan() || self.encoder_smoothing < 0.0 {
            return Err(Error::invalid("bn encoder smoothing must be non-negative"));
        }
        Ok(())
    }
}

/// How a column's cells map to network states and back.
#[derive(Debug, Clone)]
pub enum StateMap {
    Categorical { value_states: usize, missing: Option<usize> },
    /// `values` holds the training values of each bin; synthetic values are
    /// drawn from them so that within-bin shape survives.
    Numeric { bins: Option<QuantileBins>, values: Vec<Vec<f64>>, missing: Option<usize> },
    Encoded { encoder: TargetEncoder, bins: Option<QuantileBins>, pools: Vec<Vec<u32>>, missing: Option<usize> },
}

impl StateMap {
    fn cardinality(&self) -> usize {
        let (values, missing) = match self {
            StateMap::Categorical { value_states, missing } => (*value_states, missing),
            StateMap::Numeric { bins, missing, .. } | StateMap::Encoded { bins, missing, .. } => {
                (bins.as_ref().map_or(0, |b| b.n_bins()), missing)
            }
        };
        values + missing.is_some() as usize
    }

    fn missing_state(&self) -> Option<usize> {
        match self {
            StateMap::Categorical { missing, .. } | StateMap::Numeric { missing, .. } | StateMap::Encoded { missing, .. } => {
                *missing
            }
        }
    }
}

/// Conditional table for one node. Rows for parent configurations never
/// seen in training fall back to the smoothed (uniform) row.
#[derive(Debug, Clone)]
pub struct Cpt {
    pub parents: Vec<usize>,
    pub cardinality: usize,
    strides: Vec<usize>,
    observed: BTreeMap<usize, Vec<f64>>,
    uniform: Vec<f64>,
}

impl Cpt {
    pub fn config_index(&self, states: &[usize]) -> usize {
        self.parents.iter().zip(&self.strides).map(|(&p, &s)| states[p] * s).sum()
    }

    pub fn row(&self, config: usize) -> &[f64] {
        self.observed.get(&config).unwrap_or(&self.uniform)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.observed.values().map(|v| v.as_slice()).chain(std::iter::once(self.uniform.as_slice()))
    }
}

#[derive(Debug, Clone)]
pub struct BayesNetModel {
    schema: Arc<Schema>,
    pub maps: Vec<StateMap>,
    pub cards: Vec<usize>,
    pub cpts: Vec<Cpt>,
    pub order: Vec<usize>,
    pub score: f64,
}

impl BayesNetModel {
    pub fn parents(&self, node: usize) -> &[usize] {
        &self.cpts[node].parents
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .cpts
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.parents.iter().map(move |&i| (i, j)))
            .collect();
        e.sort_unstable();
        e
    }

    /// Joint probability of a full state assignment.
    pub fn joint(&self, states: &[usize]) -> f64 {
        self.cpts
            .iter()
            .enumerate()
            .map(|(j, cpt)| cpt.row(cpt.config_index(states))[states[j]])
            .product()
    }
}

/// Training data in state space.
pub(crate) struct Discretized {
    /// `states[col][row]`
    pub states: Vec<Vec<u32>>,
    pub cards: Vec<usize>,
    pub maps: Vec<StateMap>,
}

fn present_values(ds: &Dataset, col: usize) -> Vec<f64> {
    ds.column(col).filter_map(|c| c.as_num()).collect()
}

impl Discretized {
    pub fn new(train: &Dataset, config: &BnConfig) -> Result<Self> {
        let schema = train.schema();
        let mut maps = Vec::with_capacity(schema.len());
        let mut states = Vec::with_capacity(schema.len());
        for (col, spec) in schema.columns.iter().enumerate() {
            let any_missing = train.column(col).any(|c| c.is_missing());
            let (map, codes): (StateMap, Vec<u32>) = if spec.kind == ColumnKind::Numeric {
                let values = present_values(train, col);
                let bins = (!values.is_empty()).then(|| QuantileBins::fit(&values, config.bins));
                let nb = bins.as_ref().map_or(0, |b| b.n_bins());
                let mut pools = vec![Vec::new(); nb];
                let codes = train
                    .column(col)
                    .map(|c| match c.as_num() {
                        Some(v) => {
                            let b = bins.as_ref().unwrap().bin(v);
                            pools[b].push(v);
                            b as u32
                        }
                        None => nb as u32,
                    })
                    .collect();
                (StateMap::Numeric { bins, values: pools, missing: any_missing.then_some(nb) }, codes)
            } else if spec.high_cardinality && spec.kind == ColumnKind::Categorical {
                let encoder = fit_target_encoder(train, &spec.name, config.encoder_smoothing)?;
                let encoded: Vec<Option<f64>> = train
                    .column(col)
                    .map(|c| (!c.is_missing()).then(|| encoder.encode(spec, c)))
                    .collect();
                let values: Vec<f64> = encoded.iter().flatten().copied().collect();
                let bins = (!values.is_empty()).then(|| QuantileBins::fit(&values, config.bins));
                let nb = bins.as_ref().map_or(0, |b| b.n_bins());
                let mut pools = vec![Vec::new(); nb];
                let codes = encoded
                    .iter()
                    .zip(train.column(col))
                    .map(|(e, cell)| match (e, cell) {
                        (Some(v), Cell::Cat(l)) => {
                            let b = bins.as_ref().unwrap().bin(*v);
                            pools[b].push(l);
                            b as u32
                        }
                        _ => nb as u32,
                    })
                    .collect();
                (StateMap::Encoded { encoder, bins, pools, missing: any_missing.then_some(nb) }, codes)
            } else {
                let n = spec.n_levels();
                let codes = train.column(col).map(|c| c.as_cat().unwrap_or(n as u32)).collect();
                (StateMap::Categorical { value_states: n, missing: any_missing.then_some(n) }, codes)
            };
            maps.push(map);
            states.push(codes);
        }
        let cards = maps.iter().map(StateMap::cardinality).collect();
        Ok(Self { states, cards, maps })
    }

    fn n_rows(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    fn parent_counts(&self, node: usize, parents: &[usize]) -> BTreeMap<usize, Vec<u32>> {
        let r = self.cards[node];
        let mut counts: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for row in 0..self.n_rows() {
            let mut config = 0usize;
            for &p in parents {
                config = config * self.cards[p] + self.states[p][row] as usize;
            }
            counts.entry(config).or_insert_with(|| vec![0; r])[self.states[node][row] as usize] += 1;
        }
        counts
    }

    /// BIC contribution of one family.
    pub fn family_score(&self, node: usize, parents: &[usize]) -> f64 {
        let n = self.n_rows() as f64;
        let r = self.cards[node] as f64;
        let q: f64 = parents.iter().map(|&p| self.cards[p] as f64).product();
        let mut ll = 0.0;
        for counts in self.parent_counts(node, parents).values() {
            let nj: u32 = counts.iter().sum();
            for &c in counts.iter().filter(|&&c| c > 0) {
                ll += c as f64 * (c as f64 / nj as f64).ln();
            }
        }
        ll - 0.5 * n.ln() * (r - 1.0) * q
    }

    #[cfg(test)]
    pub fn score(&self, parents: &[Vec<usize>]) -> f64 {
        parents.iter().enumerate().map(|(j, p)| self.family_score(j, p)).sum()
    }
}

struct Scorer<'a> {
    data: &'a Discretized,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl Scorer<'_> {
    fn family(&mut self, node: usize, parents: &[usize]) -> f64 {
        let key = (node, parents.to_vec());
        if let Some(&s) = self.cache.get(&key) {
            return s;
        }
        let s = self.data.family_score(node, parents);
        self.cache.insert(key, s);
        s
    }
}

fn with(parents: &[usize], add: usize) -> Vec<usize> {
    let mut p = parents.to_vec();
    p.push(add);
    p.sort_unstable();
    p
}

fn without(parents: &[usize], drop: usize) -> Vec<usize> {
    parents.iter().copied().filter(|&p| p != drop).collect()
}

/// Is `anc` an ancestor of `node`? The edge `skip` is ignored.
fn is_ancestor(parents: &[Vec<usize>], anc: usize, node: usize, skip: Option<(usize, usize)>) -> bool {
    let mut seen = vec![false; parents.len()];
    let mut stack = vec![node];
    while let Some(v) = stack.pop() {
        for &p in &parents[v] {
            if skip == Some((p, v)) {
                continue;
            }
            if p == anc {
                return true;
            }
            if !std::mem::replace(&mut seen[p], true) {
                stack.push(p);
            }
        }
    }
    false
}

#[derive(Clone, Copy)]
enum Move {
    Add(usize, usize),
    Remove(usize, usize),
    Reverse(usize, usize),
}

fn hill_climb(scorer: &mut Scorer, mut parents: Vec<Vec<usize>>, config: &BnConfig) -> (Vec<Vec<usize>>, f64) {
    let d = parents.len();
    for _ in 0..config.max_iterations {
        let mut best: Option<(f64, Move)> = None;
        let mut consider = |delta: f64, m: Move| {
            if delta > MIN_DELTA && best.is_none_or(|(b, _)| delta > b + MIN_DELTA) {
                best = Some((delta, m));
            }
        };
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                if parents[j].contains(&i) {
                    let base_j = scorer.family(j, &parents[j]);
                    let removed = scorer.family(j, &without(&parents[j], i)) - base_j;
                    consider(removed, Move::Remove(i, j));
                    if parents[i].len() < config.max_parents && !is_ancestor(&parents, i, j, Some((i, j))) {
                        let added = scorer.family(i, &with(&parents[i], j)) - scorer.family(i, &parents[i]);
                        consider(removed + added, Move::Reverse(i, j));
                    }
                } else if !parents[i].contains(&j)
                    && parents[j].len() < config.max_parents
                    && !is_ancestor(&parents, j, i, None)
                {
                    let delta = scorer.family(j, &with(&parents[j], i)) - scorer.family(j, &parents[j]);
                    consider(delta, Move::Add(i, j));
                }
            }
        }
        match best {
            None => break,
            Some((_, Move::Add(i, j))) => parents[j] = with(&parents[j], i),
            Some((_, Move::Remove(i, j))) => parents[j] = without(&parents[j], i),
            Some((_, Move::Reverse(i, j))) => {
                parents[j] = without(&parents[j], i);
                parents[i] = with(&parents[i], j);
            }
        }
    }
    let score = (0..d).map(|j| scorer.family(j, &parents[j])).sum();
    (parents, score)
}

fn random_dag<R: Rng>(d: usize, max_parents: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let p = if d > 1 { (2.0 / d as f64).min(0.5) } else { 0.0 };
    let mut parents = vec![Vec::new(); d];
    for b in 1..d {
        for a in 0..b {
            if parents[perm[b]].len() < max_parents && rng.random::<f64>() < p {
                parents[perm[b]].push(perm[a]);
            }
        }
    }
    for ps in &mut parents {
        ps.sort_unstable();
    }
    parents
}

fn topological_order(parents: &[Vec<usize>]) -> Vec<usize> {
    let d = parents.len();
    let mut placed = vec![false; d];
    let mut order = Vec::with_capacity(d);
    while order.len() < d {
        let next = (0..d)
            .find(|&v| !placed[v] && parents[v].iter().all(|&p| placed[p]))
            .expect("structure is acyclic");
        placed[next] = true;
        order.push(next);
    }
    order
}

fn estimate_cpt(data: &Discretized, node: usize, parents: &[usize], alpha: f64) -> Cpt {
    let r = data.cards[node];
    let mut strides = vec![1usize; parents.len()];
    for k in (0..parents.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * data.cards[parents[k + 1]];
    }
    let observed = data
        .parent_counts(node, parents)
        .into_iter()
        .map(|(config, counts)| {
            let nj: u32 = counts.iter().sum();
            let denom = nj as f64 + alpha * r as f64;
            (config, counts.iter().map(|&c| (c as f64 + alpha) / denom).collect())
        })
        .collect();
    Cpt {
        parents: parents.to_vec(),
        cardinality: r,
        strides,
        observed,
        uniform: vec![1.0 / r as f64; r],
    }
}

/// Restart 0 starts from the empty graph, later restarts from random DAGs.
/// The best-scoring result wins; ties go to the earliest restart.
pub fn fit_bn(train: &Dataset, config: &BnConfig, seed: u64) -> Result<BayesNetModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::NoRows);
    }
    let data = Discretized::new(train, config)?;
    let d = data.cards.len();
    let runs = crate::par::map_range(config.restarts.max(1), |k| {
        let start = if k == 0 {
            vec![Vec::new(); d]
        } else {
            random_dag(d, config.max_parents, &mut task_rng(seed, &[k as u64]))
        };
        let mut scorer = Scorer { data: &data, cache: HashMap::new() };
        hill_climb(&mut scorer, start, config)
    });
    let (parents, score) = runs
        .into_iter()
        .reduce(|best, run| if run.1 > best.1 + MIN_DELTA { run } else { best })
        .expect("at least one restart");
    let cpts = (0..d).map(|j| estimate_cpt(&data, j, &parents[j], config.alpha)).collect();
    Ok(BayesNetModel {
        schema: train.schema_arc().clone(),
        order: topological_order(&parents),
        cards: data.cards.clone(),
        maps: data.maps,
        cpts,
        score,
    })
}

fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

fn reconstruct<R: Rng>(map: &StateMap, state: usize, rng: &mut R) -> Cell {
    if map.missing_state() == Some(state) {
        return Cell::Missing;
    }
    match map {
        StateMap::Categorical { .. } => Cell::Cat(state as u32),
        StateMap::Numeric { bins, values, .. } => match values[state].as_slice() {
            [] => {
                let (lo, hi) = bins.as_ref().expect("value state implies bins").bounds(state);
                Cell::Num(if hi > lo { lo + rng.random::<f64>() * (hi - lo) } else { lo })
            }
            pool => Cell::Num(pool[rng.random_range(0..pool.len())]),
        },
        StateMap::Encoded { pools, .. } => {
            let pool = &pools[state];
            Cell::Cat(pool[rng.random_range(0..pool.len())])
        }
    }
}

pub fn generate_bn(model: &BayesNetModel, n_prime: usize, seed: u64) -> Dataset {
    let mut rng = rng_from(seed);
    let d = model.cards.len();
    let mut rows = Vec::with_capacity(n_prime);
    let mut states = vec![0usize; d];
    for _ in 0..n_prime {
        for &j in &model.order {
            let cpt = &model.cpts[j];
            states[j] = draw(cpt.row(cpt.config_index(&states)), &mut rng);
        }
        rows.push((0..d).map(|j| reconstruct(&model.maps[j], states[j], &mut rng)).collect());
    }
    Dataset::from_parts_unchecked(model.schema.clone(), rows, vec![RowId::SYNTHETIC; n_prime], Provenance::Synthetic)
}

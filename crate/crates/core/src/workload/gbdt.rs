//! Gradient-boosted decision trees for binary classification.
//!
//! Leaf-wise growth on histogram bins, logistic loss, L2-regularized leaf
//! values. Missing values have their own bin and follow whichever side of
//! a split gives the larger gain.

use serde::{Deserialize, Serialize};

use super::features::{Binned, FeatureMap, MISSING_BIN};
use crate::error::{Error, Result};
use crate::tabular::{train_test_split, Dataset};

const HIST: usize = 256;
const MIN_SUM_HESSIAN: f64 = 1e-3;
const MIN_GAIN: f64 = 1e-12;
const MARGIN_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtHyper {
    pub max_depth: usize,
    pub learning_rate: f64,
    /// `None` disables early stopping and trains all `max_rounds` trees.
    pub early_stopping_rounds: Option<usize>,
    pub min_data_in_leaf: usize,
    pub num_leaves: usize,
    pub max_rounds: usize,
    pub lambda_l2: f64,
}

impl Default for GbdtHyper {
    fn default() -> Self {
        Self {
            max_depth: 6,
            learning_rate: 0.3,
            early_stopping_rounds: Some(7),
            min_data_in_leaf: 10,
            num_leaves: 15,
            max_rounds: 200,
            lambda_l2: 1.0,
        }
    }
}

impl GbdtHyper {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.num_leaves < 2 || self.max_depth < 1 {
            return Err(Error::invalid("trees need at least two leaves and depth one"));
        }
        if self.lambda_l2 < 0.0 {
            return Err(Error::invalid("lambda_l2 must be non-negative"));
        }
        Ok(())
    }
}

/// 256-bit set of bin codes routed left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BinSet([u64; 4]);

impl BinSet {
    fn empty() -> Self {
        BinSet([0; 4])
    }

    fn insert(&mut self, b: usize) {
        self.0[b >> 6] |= 1 << (b & 63);
    }

    fn contains(&self, b: u8) -> bool {
        self.0[(b >> 6) as usize] >> (b & 63) & 1 == 1
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, left_bins: BinSet, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    fn predict(&self, binned: &Binned, row: usize) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, left_bins, left, right } => {
                    i = if left_bins.contains(binned.codes[*feature][row]) { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub struct GbdtModel {
    features: FeatureMap,
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    pub hyper: GbdtHyper,
}

impl GbdtModel {
    pub fn predict_margin(&self, ds: &Dataset) -> Vec<f64> {
        let binned = self.features.transform(ds);
        (0..ds.len())
            .map(|r| self.base_score + self.trees.iter().map(|t| t.predict(&binned, r)).sum::<f64>())
            .collect()
    }

    /// Positive-class probabilities, strictly inside (0, 1).
    pub fn predict_proba(&self, ds: &Dataset) -> Vec<f64> {
        self.predict_margin(ds).into_iter().map(sigmoid).collect()
    }
}

fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m.clamp(-MARGIN_CLAMP, MARGIN_CLAMP)).exp())
}

#[derive(Debug, Clone, Copy, Default)]
struct Bucket {
    g: f64,
    h: f64,
    n: u32,
}

impl Bucket {
    fn add(&mut self, o: &Bucket) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }

    fn minus(&self, o: &Bucket) -> Bucket {
        Bucket { g: self.g - o.g, h: self.h - o.h, n: self.n - o.n }
    }
}

type Histogram = Vec<[Bucket; HIST]>;

struct Grower<'a> {
    binned: &'a Binned,
    features: &'a FeatureMap,
    grad: &'a [f64],
    hess: &'a [f64],
    hyper: &'a GbdtHyper,
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    left_bins: BinSet,
}

struct OpenLeaf {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    hist: Histogram,
    split: Option<SplitChoice>,
}

impl Grower<'_> {
    fn histogram(&self, rows: &[usize]) -> Histogram {
        let mut hist = vec![[Bucket::default(); HIST]; self.binned.codes.len()];
        for (f, codes) in self.binned.codes.iter().enumerate() {
            let h = &mut hist[f];
            for &r in rows {
                let b = &mut h[codes[r] as usize];
                b.g += self.grad[r];
                b.h += self.hess[r];
                b.n += 1;
            }
        }
        hist
    }

    fn score(&self, b: &Bucket) -> f64 {
        b.g * b.g / (b.h + self.hyper.lambda_l2)
    }

    fn admissible(&self, b: &Bucket) -> bool {
        b.n as usize >= self.hyper.min_data_in_leaf.max(1) && b.h >= MIN_SUM_HESSIAN
    }

    fn best_split(&self, hist: &Histogram, depth: usize) -> Option<SplitChoice> {
        if depth >= self.hyper.max_depth {
            return None;
        }
        let mut best: Option<SplitChoice> = None;
        for (f, h) in hist.iter().enumerate() {
            let nb = self.features.n_bins(f);
            let missing = h[MISSING_BIN as usize];
            let mut total = missing;
            for b in &h[..nb] {
                total.add(b);
            }
            let parent = self.score(&total);
            // bins in scan order; categorical bins are ordered by gradient ratio
            let order: Vec<usize> = if self.features.is_categorical(f) {
                let mut o: Vec<usize> = (0..nb).filter(|&b| h[b].n > 0).collect();
                let key = |b: usize| h[b].g / (h[b].h + self.hyper.lambda_l2);
                o.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap().then(a.cmp(&b)));
                o
            } else {
                (0..nb).collect()
            };
            let mut left = Bucket::default();
            for (i, &b) in order.iter().enumerate() {
                left.add(&h[b]);
                if h[b].n == 0 {
                    continue;
                }
                // after the last bin only "missing vs the rest" remains
                let last = i + 1 == order.len();
                for missing_left in [false, true] {
                    if (missing_left || last) && missing.n == 0 || missing_left && last {
                        continue;
                    }
                    let l = if missing_left {
                        let mut l = left;
                        l.add(&missing);
                        l
                    } else {
                        left
                    };
                    let r = total.minus(&l);
                    if !self.admissible(&l) || !self.admissible(&r) {
                        continue;
                    }
                    let gain = self.score(&l) + self.score(&r) - parent;
                    if gain > MIN_GAIN && best.as_ref().is_none_or(|s| gain > s.gain) {
                        let mut left_bins = BinSet::empty();
                        for &lb in &order[..=i] {
                            left_bins.insert(lb);
                        }
                        if missing_left {
                            left_bins.insert(MISSING_BIN as usize);
                        }
                        best = Some(SplitChoice { gain, feature: f, left_bins });
                    }
                }
            }
        }
        best
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + self.grad[r], h + self.hess[r]));
        -g / (h + self.hyper.lambda_l2) * self.hyper.learning_rate
    }

    /// Returns the tree and each training row's leaf value.
    fn grow(&self, rows: Vec<usize>) -> (RegressionTree, Vec<(usize, f64)>) {
        let mut nodes = vec![Node::Leaf(0.0)];
        let hist = self.histogram(&rows);
        let split = self.best_split(&hist, 0);
        let mut open = vec![OpenLeaf { node: 0, rows, depth: 0, hist, split }];
        let mut n_leaves = 1;
        while n_leaves < self.hyper.num_leaves {
            let Some(pick) = open
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.split.as_ref().map(|s| (i, s.gain)))
                .fold(None, |best: Option<(usize, f64)>, (i, g)| match best {
                    Some((_, bg)) if bg >= g => best,
                    _ => Some((i, g)),
                })
                .map(|(i, _)| i)
            else {
                break;
            };
            let leaf = open.swap_remove(pick);
            let SplitChoice { feature, left_bins, .. } = leaf.split.expect("picked leaves have a split");
            let codes = &self.binned.codes[feature];
            let (lrows, rrows): (Vec<usize>, Vec<usize>) = leaf.rows.iter().partition(|&&r| left_bins.contains(codes[r]));
            let (small, small_is_left) = if lrows.len() <= rrows.len() { (&lrows, true) } else { (&rrows, false) };
            let small_hist = self.histogram(small);
            let large_hist: Histogram = leaf
                .hist
                .iter()
                .zip(&small_hist)
                .map(|(p, s)| {
                    let mut out = [Bucket::default(); HIST];
                    for b in 0..HIST {
                        out[b] = p[b].minus(&s[b]);
                    }
                    out
                })
                .collect();
            let (lhist, rhist) = if small_is_left { (small_hist, large_hist) } else { (large_hist, small_hist) };
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf(0.0));
            nodes.push(Node::Leaf(0.0));
            nodes[leaf.node] = Node::Split { feature, left_bins, left: li, right: ri };
            let depth = leaf.depth + 1;
            for (node, rows, hist) in [(li, lrows, lhist), (ri, rrows, rhist)] {
                let split = self.best_split(&hist, depth);
                open.push(OpenLeaf { node, rows, depth, hist, split });
            }
            // keep leaf order independent of swap_remove
            open.sort_by_key(|l| l.node);
            n_leaves += 1;
        }
        let mut assignments = Vec::new();
        for leaf in open {
            let v = self.leaf_value(&leaf.rows);
            nodes[leaf.node] = Node::Leaf(v);
            assignments.extend(leaf.rows.into_iter().map(|r| (r, v)));
        }
        (RegressionTree { nodes }, assignments)
    }
}

fn logloss(margins: &[f64], labels: &[bool]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            let p = sigmoid(m);
            -(if y { p.ln() } else { (1.0 - p).ln() })
        })
        .sum::<f64>()
        / margins.len().max(1) as f64
}

/// Fit on `train`. With early stopping, a stratified 20% of `train` is held
/// out to pick the number of trees.
pub fn fit_gbdt(train: &Dataset, hyper: &GbdtHyper, seed: u64) -> Result<GbdtModel> {
    hyper.validate()?;
    train.require_both_classes()?;
    let (fit_set, valid) = match hyper.early_stopping_rounds {
        Some(_) => match train_test_split(train, 0.8, seed) {
            Ok((a, b)) if a.class_counts().0 > 0 && a.class_counts().1 > 0 => (a, Some(b)),
            _ => (train.clone(), None),
        },
        None => (train.clone(), None),
    };
    let features = FeatureMap::fit(&fit_set)?;
    let binned = features.transform(&fit_set);
    let labels = fit_set.labels();
    let p = fit_set.prevalence();
    let base_score = (p / (1.0 - p)).ln();
    let valid_state = valid.as_ref().map(|v| (features.transform(v), v.labels()));

    let n = fit_set.len();
    let mut margin = vec![base_score; n];
    let mut valid_margin = valid_state.as_ref().map(|(b, _)| vec![base_score; b.n_rows]);
    let mut trees = Vec::new();
    let mut best = (f64::INFINITY, 0usize);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for round in 0..hyper.max_rounds {
        for r in 0..n {
            let p = sigmoid(margin[r]);
            grad[r] = p - labels[r] as u8 as f64;
            hess[r] = p * (1.0 - p);
        }
        let grower = Grower { binned: &binned, features: &features, grad: &grad, hess: &hess, hyper };
        let (tree, assignments) = grower.grow((0..n).collect());
        for (r, v) in assignments {
            margin[r] += v;
        }
        if let (Some((vb, vl)), Some(vm)) = (&valid_state, valid_margin.as_mut()) {
            for (r, m) in vm.iter_mut().enumerate() {
                *m += tree.predict(vb, r);
            }
            trees.push(tree);
            let loss = logloss(vm, vl);
            if loss < best.0 - 1e-12 {
                best = (loss, round + 1);
            } else if round + 1 - best.1 >= hyper.early_stopping_rounds.unwrap_or(usize::MAX) {
                break;
            }
        } else {
            trees.push(tree);
            best.1 = round + 1;
        }
    }
    trees.truncate(best.1);
    Ok(GbdtModel { features, base_score, trees, hyper: *hyper })
}

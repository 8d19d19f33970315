//! CART tree induction over the mixed-type cells of a [`Dataset`].
//!
//! Gini impurity for categorical targets, squared error for numeric
//! targets. Splits are binary: `value <= threshold` for numeric features
//! (missing routed to whichever side scores better) and level-subset
//! membership for categorical features (missing is its own level).

use serde::{Deserialize, Serialize};

use crate::tabular::{Cell, ColumnKind, Dataset};

const MIN_GAIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub(crate) struct CartParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// Target column, pre-coded.
pub(crate) enum Target {
    /// Level codes, with missing coded as `k - 1` when present.
    Class { codes: Vec<usize>, k: usize },
    Reg { values: Vec<Option<f64>> },
}

impl Target {
    pub fn from_column(ds: &Dataset, col: usize) -> Self {
        let spec = &ds.schema().columns[col];
        if spec.kind == ColumnKind::Numeric {
            Target::Reg {
                values: ds.column(col).map(|c| c.as_num()).collect(),
            }
        } else {
            let miss = spec.n_levels();
            Target::Class {
                codes: ds.column(col).map(|c| c.as_cat().map_or(miss, |l| l as usize)).collect(),
                k: miss + 1,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    NumLe { threshold: f64, missing_left: bool },
    /// `left[level]` for each level; the last entry is the missing level.
    /// Levels beyond the mask go right.
    CatIn { left: Vec<bool> },
}

impl Rule {
    pub fn goes_left(&self, cell: Cell) -> bool {
        match (self, cell) {
            (Rule::NumLe { threshold, .. }, Cell::Num(v)) => v <= *threshold,
            (Rule::NumLe { missing_left, .. }, _) => *missing_left,
            (Rule::CatIn { left }, Cell::Cat(l)) => left.get(l as usize).copied().unwrap_or(false),
            (Rule::CatIn { left }, _) => *left.last().unwrap_or(&false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Tree<L> {
    Leaf(L),
    Split {
        col: usize,
        rule: Rule,
        left: Box<Tree<L>>,
        right: Box<Tree<L>>,
    },
}

impl<L> Tree<L> {
    pub fn route(&self, row: &[Cell]) -> &L {
        let mut node = self;
        loop {
            match node {
                Tree::Leaf(l) => return l,
                Tree::Split { col, rule, left, right } => {
                    node = if rule.goes_left(row[*col]) { left } else { right };
                }
            }
        }
    }

    pub fn leaves(&self) -> Vec<&L> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            match n {
                Tree::Leaf(l) => out.push(l),
                Tree::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn map_leaves<M, F: Fn(&L) -> M + Copy>(&self, f: F) -> Tree<M> {
        match self {
            Tree::Leaf(l) => Tree::Leaf(f(l)),
            Tree::Split { col, rule, left, right } => Tree::Split {
                col: *col,
                rule: rule.clone(),
                left: Box::new(left.map_leaves(f)),
                right: Box::new(right.map_leaves(f)),
            },
        }
    }
}

#[derive(Debug, Clone)]
enum Stats {
    Class { counts: Vec<f64>, n: f64 },
    Reg { n: f64, present: f64, sum: f64, sq: f64 },
}

impl Stats {
    fn empty(target: &Target) -> Self {
        match target {
            Target::Class { k, .. } => Stats::Class { counts: vec![0.0; *k], n: 0.0 },
            Target::Reg { .. } => Stats::Reg { n: 0.0, present: 0.0, sum: 0.0, sq: 0.0 },
        }
    }

    fn of(target: &Target, rows: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(target);
        for r in rows {
            s.add(target, r, 1.0);
        }
        s
    }

    fn add(&mut self, target: &Target, row: usize, w: f64) {
        match (self, target) {
            (Stats::Class { counts, n }, Target::Class { codes, .. }) => {
                counts[codes[row]] += w;
                *n += w;
            }
            (Stats::Reg { n, present, sum, sq }, Target::Reg { values }) => {
                *n += w;
                if let Some(v) = values[row] {
                    *present += w;
                    *sum += w * v;
                    *sq += w * v * v;
                }
            }
            _ => unreachable!("stats and target kinds always match"),
        }
    }

    fn merge(&self, other: &Stats, sign: f64) -> Stats {
        match (self, other) {
            (Stats::Class { counts: a, n: na }, Stats::Class { counts: b, n: nb }) => Stats::Class {
                counts: a.iter().zip(b).map(|(x, y)| x + sign * y).collect(),
                n: na + sign * nb,
            },
            (
                Stats::Reg { n: a, present: pa, sum: sa, sq: qa },
                Stats::Reg { n: b, present: pb, sum: sb, sq: qb },
            ) => Stats::Reg {
                n: a + sign * b,
                present: pa + sign * pb,
                sum: sa + sign * sb,
                sq: qa + sign * qb,
            },
            _ => unreachable!("stats kinds always match"),
        }
    }

    fn count(&self) -> f64 {
        match self {
            Stats::Class { n, .. } | Stats::Reg { n, .. } => *n,
        }
    }

    /// Total (not mean) impurity.
    fn impurity(&self) -> f64 {
        match self {
            Stats::Class { counts, n } => {
                if *n <= 0.0 {
                    0.0
                } else {
                    n - counts.iter().map(|c| c * c).sum::<f64>() / n
                }
            }
            Stats::Reg { present, sum, sq, .. } => {
                if *present <= 0.0 {
                    0.0
                } else {
                    (sq - sum * sum / present).max(0.0)
                }
            }
        }
    }

    /// Ordering key used to sort levels for subset splits.
    fn level_key(&self, class: usize) -> f64 {
        match self {
            Stats::Class { counts, n } => counts[class] / n,
            Stats::Reg { present, sum, .. } => {
                if *present > 0.0 {
                    sum / present
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    fn majority(&self) -> usize {
        match self {
            Stats::Class { counts, .. } => counts
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
                .0,
            Stats::Reg { .. } => 0,
        }
    }
}

struct Candidate {
    gain: f64,
    col: usize,
    rule: Rule,
}

/// Grow a tree predicting `target` from `features`; leaves hold row indices.
pub(crate) fn grow(ds: &Dataset, features: &[usize], target: &Target, params: CartParams) -> Tree<Vec<usize>> {
    let rows: Vec<usize> = (0..ds.len()).collect();
    grow_node(ds, features, target, params, rows, 0)
}

fn grow_node(
    ds: &Dataset,
    features: &[usize],
    target: &Target,
    params: CartParams,
    rows: Vec<usize>,
    depth: usize,
) -> Tree<Vec<usize>> {
    let min_leaf = params.min_leaf.max(1);
    if depth >= params.max_depth || rows.len() < 2 * min_leaf {
        return Tree::Leaf(rows);
    }
    let parent = Stats::of(target, rows.iter().copied());
    let parent_imp = parent.impurity();
    if parent_imp <= MIN_GAIN {
        return Tree::Leaf(rows);
    }
    let mut best: Option<Candidate> = None;
    for &col in features {
        let cand = if ds.schema().columns[col].is_numeric() {
            best_numeric(ds, col, target, &rows, &parent, min_leaf as f64)
        } else {
            best_categorical(ds, col, target, &rows, &parent, min_leaf as f64)
        };
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.gain > b.gain + MIN_GAIN) {
                best = Some(c);
            }
        }
    }
    let Some(Candidate { col, rule, .. }) = best else {
        return Tree::Leaf(rows);
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| rule.goes_left(ds.cell(r, col)));
    Tree::Split {
        col,
        rule,
        left: Box::new(grow_node(ds, features, target, params, left, depth + 1)),
        right: Box::new(grow_node(ds, features, target, params, right, depth + 1)),
    }
}

fn best_numeric(
    ds: &Dataset,
    col: usize,
    target: &Target,
    rows: &[usize],
    parent: &Stats,
    min_leaf: f64,
) -> Option<Candidate> {
    let mut present: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    let mut missing = Stats::empty(target);
    for &r in rows {
        match ds.cell(r, col) {
            Cell::Num(v) => present.push((v, r)),
            _ => missing.add(target, r, 1.0),
        }
    }
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let present_total = parent.merge(&missing, -1.0);
    let parent_imp = parent.impurity();
    let mut left = Stats::empty(target);
    let mut best: Option<Candidate> = None;
    for i in 0..present.len() - 1 {
        left.add(target, present[i].1, 1.0);
        if present[i].0 == present[i + 1].0 {
            continue;
        }
        let right = present_total.merge(&left, -1.0);
        let threshold = present[i].0 + (present[i + 1].0 - present[i].0) / 2.0;
        for missing_left in [false, true] {
            if missing_left && missing.count() == 0.0 {
                continue;
            }
            let (l, r) = if missing_left {
                (left.merge(&missing, 1.0), right.clone())
            } else {
                (left.clone(), right.merge(&missing, 1.0))
            };
            if l.count() < min_leaf || r.count() < min_leaf {
                continue;
            }
            let gain = parent_imp - l.impurity() - r.impurity();
            if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain + MIN_GAIN) {
                best = Some(Candidate {
                    gain,
                    col,
                    rule: Rule::NumLe { threshold, missing_left },
                });
            }
        }
    }
    best
}

fn best_categorical(
    ds: &Dataset,
    col: usize,
    target: &Target,
    rows: &[usize],
    parent: &Stats,
    min_leaf: f64,
) -> Option<Candidate> {
    let n_levels = ds.schema().columns[col].n_levels();
    let mut per_level: Vec<Stats> = vec![Stats::empty(target); n_levels + 1];
    for &r in rows {
        let slot = ds.cell(r, col).as_cat().map_or(n_levels, |l| l as usize);
        per_level[slot].add(target, r, 1.0);
    }
    let class = parent.majority();
    let mut order: Vec<usize> = (0..=n_levels).filter(|&l| per_level[l].count() > 0.0).collect();
    if order.len() < 2 {
        return None;
    }
    order.sort_by(|&a, &b| {
        per_level[a]
            .level_key(class)
            .partial_cmp(&per_level[b].level_key(class))
            .unwrap()
            .then(a.cmp(&b))
    });
    let parent_imp = parent.impurity();
    let mut left = Stats::empty(target);
    let mut best: Option<(f64, usize)> = None;
    for (i, &lvl) in order[..order.len() - 1].iter().enumerate() {
        left = left.merge(&per_level[lvl], 1.0);
        let right = parent.merge(&left, -1.0);
        if left.count() < min_leaf || right.count() < min_leaf {
            continue;
        }
        let gain = parent_imp - left.impurity() - right.impurity();
        if gain > MIN_GAIN && best.is_none_or(|b| gain > b.0 + MIN_GAIN) {
            best = Some((gain, i));
        }
    }
    best.map(|(gain, i)| {
        let mut mask = vec![false; n_levels + 1];
        for &l in &order[..=i] {
            mask[l] = true;
        }
        Candidate {
            gain,
            col,
            rule: Rule::CatIn { left: mask },
        }
    })
}

//! Outcome-stratified sampling, splitting and fold assignment.

use rand::seq::SliceRandom;
use rand::Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Largest-remainder apportionment of `total` across classes of the given
/// sizes. Ties in the remainder go to the lower class index.
fn apportion(total: usize, sizes: [usize; 2]) -> [usize; 2] {
    let n: usize = sizes.iter().sum();
    let mut out = [0usize; 2];
    let mut rem = [(0.0f64, 0usize); 2];
    for c in 0..2 {
        let exact = total as f64 * sizes[c] as f64 / n as f64;
        out[c] = exact.floor() as usize;
        rem[c] = (exact - exact.floor(), c);
    }
    let mut left = total - out.iter().sum::<usize>();
    rem.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, c) in rem.iter().cycle() {
        if left == 0 {
            break;
        }
        if out[c] < sizes[c] {
            out[c] += 1;
            left -= 1;
        }
    }
    out
}

/// Row indices split by class: `[negatives, positives]`.
fn class_indices(ds: &Dataset) -> [Vec<usize>; 2] {
    let mut by = [Vec::new(), Vec::new()];
    for i in 0..ds.len() {
        by[ds.label(i) as usize].push(i);
    }
    by
}

/// Draw `n0` rows without replacement, keeping the outcome mix.
///
/// Per-class counts follow largest-remainder apportionment; a class that
/// would round to zero rows is given one, taken from the other class. The
/// sampled rows keep their original relative order.
pub fn stratified_sample(ds: &Dataset, n0: usize, seed: u64) -> Result<Dataset> {
    if n0 > ds.len() {
        return Err(Error::invalid(format!(
            "n0 = {n0} exceeds the dataset size {}",
            ds.len()
        )));
    }
    if n0 < 2 {
        return Err(Error::invalid("n0 must be at least 2"));
    }
    ds.require_both_classes()?;
    let mut by = class_indices(ds);
    let sizes = [by[0].len(), by[1].len()];
    let mut counts = apportion(n0, sizes);
    for c in 0..2 {
        if counts[c] == 0 {
            counts[c] = 1;
            counts[1 - c] -= 1;
        }
    }
    let mut rng = rng_from(seed);
    let mut picked = Vec::with_capacity(n0);
    for c in 0..2 {
        by[c].shuffle(&mut rng);
        picked.extend_from_slice(&by[c][..counts[c]]);
    }
    picked.sort_unstable();
    Ok(ds.subset(&picked))
}

/// Stratified `(train, test)` split with |train| = round(fraction · N).
pub fn train_test_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }
    let mut by = class_indices(ds);
    if by.iter().any(|c| c.len() < 2) {
        return Err(Error::degenerate(format!(
            "each class needs at least 2 rows to split ({} negative, {} positive)",
            by[0].len(),
            by[1].len()
        )));
    }
    let total = (train_fraction * ds.len() as f64).round() as usize;
    let mut counts = apportion(total, [by[0].len(), by[1].len()]);
    for c in 0..2 {
        counts[c] = counts[c].clamp(1, by[c].len() - 1);
    }
    let mut rng = rng_from(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..2 {
        by[c].shuffle(&mut rng);
        train.extend_from_slice(&by[c][..counts[c]]);
        test.extend_from_slice(&by[c][counts[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Stratified fold id (0..k) for each row.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    let mut by = class_indices(ds);
    if by.iter().any(|c| c.len() < k) {
        return Err(Error::degenerate(format!(
            "stratified {k}-fold needs at least {k} rows per class ({} negative, {} positive)",
            by[0].len(),
            by[1].len()
        )));
    }
    let mut rng = rng_from(seed);
    let mut fold = vec![0usize; ds.len()];
    // continue the round-robin across classes so fold sizes stay balanced
    let mut next = 0usize;
    for c in 0..2 {
        by[c].shuffle(&mut rng);
        for &i in &by[c] {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

/// `n` indices drawn uniformly with replacement from `0..len`.
pub fn bootstrap_indices<R: Rng>(len: usize, n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..len)).collect()
}

//! Dataset-complexity characteristics used by the decision model.
//!
//! Numeric predictors are discretized into 10 equal-frequency bins for the
//! entropy and mutual-information measures; missing values form their own
//! bin or level. Distances are Gower distances over the predictors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::tabular::{Cell, ColumnKind, Dataset, QuantileBins, Schema};

pub const ENTROPY_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub n0: usize,
    pub dof: usize,
    pub imbalance: f64,
    pub std_entropy: f64,
    pub mi_cov: f64,
    pub separability: f64,
    pub baseline_auc: Option<f64>,
}

/// `max(p/(1-p), (1-p)/p)` for positive fraction `p`.
pub fn imbalance_factor(ds: &Dataset) -> Result<f64> {
    ds.require_both_classes()?;
    Ok(imbalance_from_prevalence(ds.prevalence()))
}

pub fn imbalance_from_prevalence(p: f64) -> f64 {
    (p / (1.0 - p)).max((1.0 - p) / p)
}

/// Numeric predictors count 1, a k-level categorical counts k - 1
/// (high-cardinality columns use their raw level count).
pub fn degrees_of_freedom(schema: &Schema) -> usize {
    schema
        .predictor_indices()
        .into_iter()
        .map(|i| {
            let c = &schema.columns[i];
            match c.kind {
                ColumnKind::Numeric => 1,
                _ => c.n_levels().saturating_sub(1),
            }
        })
        .sum()
}

/// Discrete code for every cell of column `col`; missing gets the last code.
pub(crate) fn discretize(ds: &Dataset, col: usize, bins: usize) -> Vec<usize> {
    let spec = &ds.schema().columns[col];
    match spec.kind {
        ColumnKind::Numeric => {
            let present: Vec<f64> = ds.column(col).filter_map(|c| c.as_num()).collect();
            let q = QuantileBins::fit(&present, bins);
            let missing = q.n_bins();
            ds.column(col)
                .map(|c| c.as_num().map_or(missing, |v| q.bin(v)))
                .collect()
        }
        _ => {
            let missing = spec.n_levels();
            ds.column(col)
                .map(|c| c.as_cat().map_or(missing, |l| l as usize))
                .collect()
        }
    }
}

fn counts(codes: &[usize]) -> Vec<f64> {
    let k = codes.iter().max().map_or(0, |m| m + 1);
    let mut c = vec![0.0; k];
    for &x in codes {
        c[x] += 1.0;
    }
    c
}

/// Shannon entropy (nats) of a discrete code vector.
pub(crate) fn entropy(codes: &[usize]) -> f64 {
    let n = codes.len() as f64;
    counts(codes)
        .into_iter()
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Entropy divided by log of the number of occupied codes; 0 when at most
/// one code is occupied.
pub(crate) fn standardized(codes: &[usize]) -> f64 {
    let occupied = counts(codes).into_iter().filter(|&c| c > 0.0).count();
    if occupied <= 1 {
        0.0
    } else {
        (entropy(codes) / (occupied as f64).ln()).clamp(0.0, 1.0)
    }
}

/// Mutual information (nats) between two code vectors of equal length.
pub(crate) fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0.0; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * kb + y] += 1.0;
    }
    let pa = counts(a);
    let pb = counts(b);
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0.0 {
                mi += c / n * ((c * n) / (pa[x] * pb[y])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Mean standardized entropy across predictors.
pub fn standardized_entropy(ds: &Dataset) -> Result<f64> {
    let preds = ds.schema().predictor_indices();
    if preds.is_empty() {
        return Err(Error::degenerate("no predictors"));
    }
    if ds.is_empty() {
        return Err(Error::NoRows);
    }
    let total: f64 = preds
        .iter()
        .map(|&p| standardized(&discretize(ds, p, ENTROPY_BINS)))
        .sum();
    Ok(total / preds.len() as f64)
}

/// Coefficient of variation (population sd / mean) of the mutual
/// information over all unordered predictor pairs; 0 when the mean is 0.
pub fn mutual_information_cov(ds: &Dataset) -> Result<f64> {
    let preds = ds.schema().predictor_indices();
    if preds.len() < 2 {
        return Err(Error::degenerate("mutual information needs at least 2 predictors"));
    }
    let codes: Vec<Vec<usize>> = preds.iter().map(|&p| discretize(ds, p, ENTROPY_BINS)).collect();
    let mut mis = Vec::new();
    for i in 0..codes.len() {
        for j in i + 1..codes.len() {
            mis.push(mutual_information(&codes[i], &codes[j]));
        }
    }
    Ok(coefficient_of_variation(&mis))
}

pub(crate) fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean <= 1e-15 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Per-column ranges needed for the numeric part of the Gower distance.
#[derive(Debug, Clone)]
pub struct Gower {
    columns: Vec<(usize, Option<f64>)>,
}

impl Gower {
    /// Predictor columns of `ds`, with numeric ranges taken from `ds`.
    pub fn for_dataset(ds: &Dataset) -> Self {
        let columns = ds
            .schema()
            .predictor_indices()
            .into_iter()
            .map(|c| {
                let range = ds.schema().columns[c].is_numeric().then(|| {
                    let (lo, hi) = ds
                        .column(c)
                        .filter_map(|x| x.as_num())
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                    if hi > lo {
                        hi - lo
                    } else {
                        0.0
                    }
                });
                (c, range)
            })
            .collect();
        Self { columns }
    }

    /// Mean per-column dissimilarity in `[0, 1]`, skipping columns missing on
    /// either side.
    pub fn distance(&self, a: &[Cell], b: &[Cell]) -> Result<f64> {
        let mut total = 0.0;
        let mut used = 0usize;
        for &(c, range) in &self.columns {
            let d = match (a[c], b[c], range) {
                (Cell::Missing, _, _) | (_, Cell::Missing, _) => continue,
                (Cell::Num(x), Cell::Num(y), Some(r)) => {
                    if r > 0.0 {
                        ((x - y).abs() / r).min(1.0)
                    } else {
                        0.0
                    }
                }
                (x, y, _) => (x != y) as u8 as f64,
            };
            total += d;
            used += 1;
        }
        if used == 0 {
            return Err(Error::degenerate("no column is observed on both rows"));
        }
        Ok(total / used as f64)
    }
}

pub fn gower_distance(ds: &Dataset, a: usize, b: usize) -> Result<f64> {
    Gower::for_dataset(ds).distance(ds.row(a), ds.row(b))
}

/// Mean nearest same-class distance over mean nearest other-class distance.
pub fn separability(ds: &Dataset) -> Result<f64> {
    let (neg, pos) = ds.class_counts();
    if neg < 2 || pos < 2 {
        return Err(Error::degenerate(format!(
            "separability needs at least 2 rows per class ({neg} negative, {pos} positive)"
        )));
    }
    let gower = Gower::for_dataset(ds);
    let labels = ds.labels();
    let per_row: Vec<(f64, f64)> = par::try_map_range(ds.len(), |i| -> Result<(f64, f64)> {
        let mut intra = f64::INFINITY;
        let mut inter = f64::INFINITY;
        for j in 0..ds.len() {
            if j == i {
                continue;
            }
            let d = gower.distance(ds.row(i), ds.row(j))?;
            if labels[i] == labels[j] {
                intra = intra.min(d);
            } else {
                inter = inter.min(d);
            }
        }
        Ok((intra, inter))
    })?;
    let n = per_row.len() as f64;
    let intra = per_row.iter().map(|p| p.0).sum::<f64>() / n;
    let inter = per_row.iter().map(|p| p.1).sum::<f64>() / n;
    if inter == 0.0 {
        // every row has a zero-distance neighbour in the other class
        if intra == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::degenerate("every row has an identical row in the other class"));
    }
    Ok(intra / inter)
}

/// Assemble the full profile. `mi_cov` is 0 for single-predictor data.
pub fn profile(ds: &Dataset, baseline_auc: Option<f64>) -> Result<ComplexityProfile> {
    let mi_cov = if ds.schema().predictor_indices().len() < 2 {
        0.0
    } else {
        mutual_information_cov(ds)?
    };
    Ok(ComplexityProfile {
        n0: ds.len(),
        dof: degrees_of_freedom(ds.schema()),
        imbalance: imbalance_factor(ds)?,
        std_entropy: standardized_entropy(ds)?,
        mi_cov,
        separability: separability(ds)?,
        baseline_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::tabular::{ColumnSpec, Provenance};
    use proptest::prelude::*;
    use rand::Rng;
    use std::sync::Arc;

    fn binary_schema(k: usize) -> Arc<Schema> {
        let mut cols: Vec<ColumnSpec> = (0..k)
            .map(|i| ColumnSpec::categorical(&format!("c{i}"), &["0", "1"]))
            .collect();
        cols.push(ColumnSpec::outcome("y", &["0", "1"]));
        Arc::new(Schema::new(cols).unwrap())
    }

    fn from_bits(rows: &[&[u32]]) -> Dataset {
        let k = rows[0].len() - 1;
        let rows = rows.iter().map(|r| r.iter().map(|&v| Cell::Cat(v)).collect()).collect();
        Dataset::new(binary_schema(k), rows, Provenance::Original).unwrap()
    }

    /// Brute-force MI from an explicit contingency table over (a, b).
    fn mi_oracle(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len() as f64;
        let mut total = 0.0;
        let av: std::collections::BTreeSet<_> = a.iter().collect();
        let bv: std::collections::BTreeSet<_> = b.iter().collect();
        for &x in &av {
            for &y in &bv {
                let nxy = a.iter().zip(b).filter(|(p, q)| p == &x && q == &y).count() as f64;
                let nx = a.iter().filter(|p| p == &x).count() as f64;
                let ny = b.iter().filter(|q| q == &y).count() as f64;
                if nxy > 0.0 {
                    total += nxy / n * (nxy * n / (nx * ny)).ln();
                }
            }
        }
        total
    }

    #[test]
    fn imbalance_examples() {
        let ds = from_bits(&[&[0, 0], &[1, 1]]);
        assert_eq!(imbalance_factor(&ds).unwrap(), 1.0);
        assert!((imbalance_from_prevalence(0.4944) - 1.0227).abs() < 1e-4);
        assert!((imbalance_from_prevalence(0.0994) - 9.0604).abs() < 1e-4);
        let single = from_bits(&[&[0, 1], &[1, 1]]);
        assert!(imbalance_factor(&single).is_err());
    }

    #[test]
    fn dof_examples() {
        let mut cols: Vec<ColumnSpec> = (0..9).map(|i| ColumnSpec::numeric(&format!("x{i}"))).collect();
        cols.push(ColumnSpec::outcome("y", &["0", "1"]));
        assert_eq!(degrees_of_freedom(&Schema::new(cols).unwrap()), 9);
        assert_eq!(degrees_of_freedom(&binary_schema(1)), 1);
        let mixed = Schema::new(vec![
            ColumnSpec::numeric("x"),
            ColumnSpec::categorical("c", &["a", "b", "c", "d"]),
            ColumnSpec::outcome("y", &["0", "1"]),
        ])
        .unwrap();
        assert_eq!(degrees_of_freedom(&mixed), 4);
    }

    #[test]
    fn entropy_examples() {
        let uniform = from_bits(&[&[0, 0], &[1, 1], &[0, 1], &[1, 0]]);
        assert!((standardized_entropy(&uniform).unwrap() - 1.0).abs() < 1e-12);
        let constant = from_bits(&[&[1, 0], &[1, 1], &[1, 1]]);
        assert_eq!(standardized_entropy(&constant).unwrap(), 0.0);
        let codes = [0, 0, 1, 2];
        let expected = 1.5 * 2f64.ln() / 3f64.ln();
        assert!((standardized(&codes) - expected).abs() < 1e-12);
        assert!((expected - 0.9464).abs() < 1e-4);
    }

    #[test]
    fn mi_cov_examples() {
        // two independent fair coins in exact product form
        let indep = from_bits(&[&[0, 0, 0], &[0, 1, 1], &[1, 0, 0], &[1, 1, 1]]);
        assert_eq!(mutual_information_cov(&indep).unwrap(), 0.0);
        // three identical columns
        let same = from_bits(&[&[0, 0, 0, 0], &[1, 1, 1, 1], &[0, 0, 0, 1], &[1, 1, 1, 0]]);
        assert!(mutual_information_cov(&same).unwrap().abs() < 1e-12);
        // A, A' = A, B independent: pair MIs {ln2, 0, 0}
        let ds = from_bits(&[&[0, 0, 0, 0], &[0, 0, 1, 1], &[1, 1, 0, 0], &[1, 1, 1, 1]]);
        let codes: Vec<Vec<usize>> = (0..3).map(|c| discretize(&ds, c, 10)).collect();
        let oracle = [mi_oracle(&codes[0], &codes[1]), mi_oracle(&codes[0], &codes[2]), mi_oracle(&codes[1], &codes[2])];
        assert!((oracle[0] - 2f64.ln()).abs() < 1e-12);
        let mean = oracle.iter().sum::<f64>() / 3.0;
        let sd = (oracle.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let got = mutual_information_cov(&ds).unwrap();
        assert!((got - sd / mean).abs() < 1e-12);
        assert!((got - 2f64.sqrt()).abs() < 1e-12);
        assert!(mutual_information_cov(&from_bits(&[&[0, 0], &[1, 1]])).is_err());
    }

    #[test]
    fn self_information_is_entropy() {
        let mut rng = rng_from(3);
        for _ in 0..20 {
            let a: Vec<usize> = (0..50).map(|_| rng.random_range(0..4)).collect();
            assert!((mutual_information(&a, &a) - entropy(&a)).abs() < 1e-12);
            let b: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
            assert!((mutual_information(&a, &b) - mi_oracle(&a, &b)).abs() < 1e-12);
        }
    }

    fn mixed(rows: Vec<Vec<Cell>>) -> Dataset {
        let schema = Arc::new(
            Schema::new(vec![
                ColumnSpec::numeric("x"),
                ColumnSpec::categorical("c", &["a", "b"]),
                ColumnSpec::outcome("y", &["0", "1"]),
            ])
            .unwrap(),
        );
        Dataset::new(schema, rows, Provenance::Original).unwrap()
    }

    #[test]
    fn gower_examples() {
        let ds = mixed(vec![
            vec![Cell::Num(0.0), Cell::Cat(0), Cell::Cat(0)],
            vec![Cell::Num(5.0), Cell::Cat(1), Cell::Cat(1)],
            vec![Cell::Num(10.0), Cell::Cat(1), Cell::Cat(0)],
            vec![Cell::Missing, Cell::Missing, Cell::Cat(1)],
            vec![Cell::Missing, Cell::Cat(0), Cell::Cat(1)],
        ]);
        assert_eq!(gower_distance(&ds, 0, 0).unwrap(), 0.0);
        assert_eq!(gower_distance(&ds, 0, 2).unwrap(), 1.0);
        assert_eq!(gower_distance(&ds, 0, 1).unwrap(), 0.75);
        // x missing on row 4: only the categorical column counts
        assert_eq!(gower_distance(&ds, 2, 4).unwrap(), 1.0);
        assert!(gower_distance(&ds, 0, 3).is_err());
    }

    /// All-pairs scan, written independently of `separability`.
    fn separability_oracle(ds: &Dataset) -> f64 {
        let n = ds.len();
        let mut intra = 0.0;
        let mut inter = 0.0;
        for i in 0..n {
            let mut dists: Vec<(f64, bool)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (gower_distance(ds, i, j).unwrap(), ds.label(i) == ds.label(j)))
                .collect();
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            intra += dists.iter().find(|d| d.1).unwrap().0;
            inter += dists.iter().find(|d| !d.1).unwrap().0;
        }
        intra / inter
    }

    #[test]
    fn separated_clusters_have_small_ratio() {
        let mut rng = rng_from(5);
        let rows = (0..40)
            .map(|i| {
                let y = (i % 2) as u32;
                let x = if y == 1 { 100.0 } else { 0.0 } + rng.random::<f64>();
                vec![Cell::Num(x), Cell::Cat(y), Cell::Cat(y)]
            })
            .collect();
        let ds = mixed(rows);
        let s = separability(&ds).unwrap();
        assert!((s - separability_oracle(&ds)).abs() < 1e-12);
        assert!(s < 0.05, "{s}");
    }

    #[test]
    fn random_labels_give_ratio_near_one() {
        let mut rng = rng_from(8);
        let rows = (0..400)
            .map(|_| {
                vec![
                    Cell::Num(rng.random::<f64>()),
                    Cell::Cat(rng.random_range(0..2)),
                    Cell::Cat(rng.random_range(0..2)),
                ]
            })
            .collect();
        let ds = mixed(rows);
        let s = separability(&ds).unwrap();
        assert!((s - 1.0).abs() <= 0.15, "{s}");
    }

    #[test]
    fn duplicated_rows_give_zero() {
        let base = vec![
            vec![Cell::Num(0.0), Cell::Cat(0), Cell::Cat(0)],
            vec![Cell::Num(3.0), Cell::Cat(1), Cell::Cat(0)],
            vec![Cell::Num(7.0), Cell::Cat(0), Cell::Cat(1)],
            vec![Cell::Num(9.0), Cell::Cat(1), Cell::Cat(1)],
        ];
        let mut rows = base.clone();
        rows.extend(base);
        assert_eq!(separability(&mixed(rows)).unwrap(), 0.0);
    }

    #[test]
    fn separability_needs_two_rows_per_class() {
        let ds = mixed(vec![
            vec![Cell::Num(0.0), Cell::Cat(0), Cell::Cat(0)],
            vec![Cell::Num(3.0), Cell::Cat(1), Cell::Cat(0)],
            vec![Cell::Num(7.0), Cell::Cat(0), Cell::Cat(1)],
        ]);
        assert!(separability(&ds).is_err());
    }

    #[test]
    fn profile_fields() {
        let ds = crate::tabular::fixtures::small(30);
        let p = profile(&ds, Some(0.7161)).unwrap();
        assert_eq!(p.n0, 30);
        assert_eq!(p.dof, 3);
        assert_eq!(p.baseline_auc, Some(0.7161));
        assert!(p.imbalance >= 1.0);
        assert!((0.0..=1.0).contains(&p.std_entropy));

        let single = Arc::new(Schema::new(vec![ColumnSpec::numeric("x"), ColumnSpec::outcome("y", &["0", "1"])]).unwrap());
        let rows = (0..10).map(|i| vec![Cell::Num(i as f64), Cell::Cat((i % 2) as u32)]).collect();
        let p = profile(&Dataset::new(single, rows, Provenance::Original).unwrap(), None).unwrap();
        assert_eq!(p.dof, 1);
        assert_eq!(p.mi_cov, 0.0);
    }

    fn random_mixed(seed: u64, n: usize) -> Dataset {
        let mut rng = rng_from(seed);
        let rows = (0..n)
            .map(|i| {
                let x = if rng.random::<f64>() < 0.1 { Cell::Missing } else { Cell::Num(rng.random::<f64>() * 20.0) };
                vec![x, Cell::Cat(rng.random_range(0..2)), Cell::Cat((i % 2) as u32)]
            })
            .collect();
        mixed(rows)
    }

    proptest! {
        #[test]
        fn imbalance_is_label_symmetric(seed in any::<u64>()) {
            let ds = random_mixed(seed, 30);
            let a = imbalance_factor(&ds).unwrap();
            let b = imbalance_factor(&ds.with_flipped_outcome()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 1.0);
        }

        #[test]
        fn gower_is_a_bounded_symmetric_dissimilarity(seed in any::<u64>()) {
            let ds = random_mixed(seed, 12);
            let g = Gower::for_dataset(&ds);
            for i in 0..ds.len() {
                for j in 0..ds.len() {
                    let d = g.distance(ds.row(i), ds.row(j)).unwrap();
                    prop_assert!((0.0..=1.0).contains(&d));
                    prop_assert_eq!(d, g.distance(ds.row(j), ds.row(i)).unwrap());
                }
                prop_assert_eq!(g.distance(ds.row(i), ds.row(i)).unwrap(), 0.0);
            }
        }

        #[test]
        fn profile_ignores_row_order(seed in any::<u64>()) {
            let ds = random_mixed(seed, 24);
            let mut order: Vec<usize> = (0..ds.len()).rev().collect();
            order.rotate_left((seed % 7) as usize);
            let shuffled = ds.subset(&order);
            // missing cells can leave every row with a twin in the other class
            let (a, b) = match (profile(&ds, None), profile(&shuffled, None)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(a), Err(b)) => {
                    prop_assert_eq!(a.to_string(), b.to_string());
                    return Ok(());
                }
                (a, b) => return Err(TestCaseError::fail(format!("{a:?} vs {b:?}"))),
            };
            prop_assert_eq!(a.n0, b.n0);
            prop_assert_eq!(a.dof, b.dof);
            prop_assert!((a.imbalance - b.imbalance).abs() < 1e-12);
            prop_assert!((a.std_entropy - b.std_entropy).abs() < 1e-12);
            prop_assert!((a.mi_cov - b.mi_cov).abs() < 1e-12);
            prop_assert!((a.separability - b.separability).abs() < 1e-12);
        }

        #[test]
        fn entropy_ignores_level_names(seed in any::<u64>()) {
            let ds = random_mixed(seed, 30);
            // relabel: swap the two levels of c
            let rows: Vec<_> = ds.rows().iter().map(|r| {
                let mut r = r.clone();
                r[1] = Cell::Cat(1 - r[1].as_cat().unwrap());
                r
            }).collect();
            let relabelled = Dataset::new(ds.schema_arc().clone(), rows, Provenance::Original).unwrap();
            prop_assert!((standardized_entropy(&ds).unwrap() - standardized_entropy(&relabelled).unwrap()).abs() < 1e-12);
        }
    }
}

//! Smoothed target encoding for high-cardinality categorical columns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, ColumnSpec, Dataset};
use crate::error::{Error, Result};

/// Maps each level to a smoothed outcome mean. Missing cells are encoded as
/// their own level; levels unseen at fit time get the global mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEncoder {
    pub column: String,
    pub mapping: BTreeMap<String, f64>,
    pub missing: Option<f64>,
    pub default: f64,
}

fn smooth(count: f64, mean: f64, smoothing: f64, global: f64) -> f64 {
    if smoothing.is_infinite() {
        global
    } else if count + smoothing == 0.0 {
        global
    } else {
        (count * mean + smoothing * global) / (count + smoothing)
    }
}

/// Fit on a training partition only.
pub fn fit_target_encoder(train: &Dataset, column: &str, smoothing: f64) -> Result<TargetEncoder> {
    if smoothing.is_nan() || smoothing < 0.0 {
        return Err(Error::invalid("smoothing must be non-negative"));
    }
    let col = train
        .schema()
        .index_of(column)
        .ok_or_else(|| Error::invalid(format!("unknown column {column:?}")))?;
    let spec = &train.schema().columns[col];
    if spec.kind != ColumnKind::Categorical {
        return Err(Error::invalid(format!("column {column:?} is not categorical")));
    }
    if train.is_empty() {
        return Err(Error::NoRows);
    }
    let global = train.prevalence();
    // per level: (count, positives); index n_levels is the missing level
    let n = spec.n_levels();
    let mut stats = vec![(0.0f64, 0.0f64); n + 1];
    for i in 0..train.len() {
        let slot = match train.cell(i, col) {
            Cell::Cat(l) => l as usize,
            _ => n,
        };
        stats[slot].0 += 1.0;
        stats[slot].1 += train.label(i) as u8 as f64;
    }
    let encode = |(count, pos): (f64, f64)| smooth(count, if count > 0.0 { pos / count } else { global }, smoothing, global);
    let mapping = spec
        .levels
        .iter()
        .zip(&stats)
        .filter(|(_, s)| s.0 > 0.0)
        .map(|(l, s)| (l.clone(), encode(*s)))
        .collect();
    let missing = (stats[n].0 > 0.0).then(|| encode(stats[n]));
    Ok(TargetEncoder {
        column: column.to_string(),
        mapping,
        missing,
        default: global,
    })
}

impl TargetEncoder {
    pub fn encode(&self, spec: &ColumnSpec, cell: Cell) -> f64 {
        match cell {
            Cell::Cat(l) => spec
                .levels
                .get(l as usize)
                .and_then(|label| self.mapping.get(label))
                .copied()
                .unwrap_or(self.default),
            _ => self.missing.unwrap_or(self.default),
        }
    }

    /// Copy of `ds` with the encoded column replaced by numeric values.
    /// `ds` itself is never modified.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let col = ds
            .schema()
            .index_of(&self.column)
            .ok_or_else(|| Error::invalid(format!("unknown column {:?}", self.column)))?;
        let spec = &ds.schema().columns[col];
        if spec.kind != ColumnKind::Categorical {
            return Err(Error::invalid(format!("column {:?} is not categorical", self.column)));
        }
        let cells = ds.column(col).map(|c| Cell::Num(self.encode(spec, c))).collect();
        let mut new_spec = ColumnSpec::numeric(&spec.name);
        new_spec.role = spec.role;
        ds.replace_column(col, new_spec, cells)
    }

    /// Range of values this encoder can emit.
    pub fn bounds(&self) -> (f64, f64) {
        self.mapping
            .values()
            .chain(self.missing.iter())
            .chain(std::iter::once(&self.default))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

//! Typed tabular data shared by every other module.
//!
//! A [`Dataset`] is an immutable table of [`Cell`]s over a [`Schema`].
//! Categorical cells store the index of their level in the column's level
//! list. The outcome column is a two-level categorical whose second level is
//! the positive class.

mod binning;
mod encoder;
mod io;
mod sampling;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binning::QuantileBins;
pub use encoder::{fit_target_encoder, TargetEncoder};
pub use io::{
    load_csv, load_schema, parse_csv, read_csv_with_schema, save_csv, save_schema, write_csv,
    LoadOptions, LoadReport,
};
pub use sampling::{bootstrap_indices, stratified_folds, stratified_sample, train_test_split};

/// Categorical columns with more levels than this are flagged high-cardinality
/// unless the schema says otherwise.
pub const HIGH_CARDINALITY_LEVELS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    BinaryOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Predictor,
    Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default)]
    pub high_cardinality: bool,
}

impl ColumnSpec {
    pub fn numeric(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
            role: Role::Predictor,
            levels: Vec::new(),
            high_cardinality: false,
        }
    }

    pub fn categorical<S: AsRef<str>>(name: &str, levels: &[S]) -> Self {
        let levels: Vec<String> = levels.iter().map(|s| s.as_ref().to_string()).collect();
        Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            role: Role::Predictor,
            high_cardinality: levels.len() > HIGH_CARDINALITY_LEVELS,
            levels,
        }
    }

    pub fn outcome<S: AsRef<str>>(name: &str, levels: &[S]) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::BinaryOutcome,
            role: Role::Outcome,
            levels: levels.iter().map(|s| s.as_ref().to_string()).collect(),
            high_cardinality: false,
        }
    }

    pub fn with_high_cardinality(mut self, flag: bool) -> Self {
        self.high_cardinality = flag;
        self
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == ColumnKind::Numeric
    }

    /// Number of discrete levels (0 for numeric columns).
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, label: &str) -> Option<u32> {
        self.levels.iter().position(|l| l == label).map(|i| i as u32)
    }
}

/// Ordered column list with exactly one binary outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    #[serde(skip)]
    outcome: usize,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let outcomes: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Outcome)
            .map(|(i, _)| i)
            .collect();
        if outcomes.len() != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one outcome column, found {}",
                outcomes.len()
            )));
        }
        let outcome = outcomes[0];
        let mut names = HashSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", c.name)));
            }
            let mut seen = HashSet::new();
            for l in &c.levels {
                if !seen.insert(l.as_str()) {
                    return Err(Error::Schema(format!(
                        "column {:?} has duplicate level {:?}",
                        c.name, l
                    )));
                }
                if l.is_empty() || l == "NA" {
                    return Err(Error::Schema(format!(
                        "column {:?} declares a level that reads as missing",
                        c.name
                    )));
                }
            }
            if (c.kind == ColumnKind::BinaryOutcome) != (c.role == Role::Outcome) {
                return Err(Error::Schema(format!(
                    "column {:?}: outcome role and binary-outcome kind go together",
                    c.name
                )));
            }
            if c.kind == ColumnKind::Numeric && !c.levels.is_empty() {
                return Err(Error::Schema(format!(
                    "numeric column {:?} must not have levels",
                    c.name
                )));
            }
            if c.role == Role::Outcome && c.levels.len() != 2 {
                return Err(Error::Schema(format!(
                    "outcome {:?} must have exactly 2 levels, has {}",
                    c.name,
                    c.levels.len()
                )));
            }
        }
        Ok(Self { columns, outcome })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn outcome_index(&self) -> usize {
        self.outcome
    }

    pub fn outcome_column(&self) -> &ColumnSpec {
        &self.columns[self.outcome]
    }

    pub fn predictor_indices(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&i| i != self.outcome).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Same names, kinds and roles, and every level list of one is a prefix
    /// of the other's. Returns the schema with the longer level lists.
    pub fn unify(&self, other: &Schema) -> Result<Schema> {
        if self.columns.len() != other.columns.len() {
            return Err(Error::Schema("column counts differ".into()));
        }
        let mut merged = Vec::with_capacity(self.columns.len());
        for (a, b) in self.columns.iter().zip(&other.columns) {
            if a.name != b.name || a.kind != b.kind || a.role != b.role {
                return Err(Error::Schema(format!(
                    "column {:?} does not match {:?}",
                    a.name, b.name
                )));
            }
            let (short, long) = if a.levels.len() <= b.levels.len() {
                (a, b)
            } else {
                (b, a)
            };
            if long.levels[..short.levels.len()] != short.levels[..] {
                return Err(Error::Schema(format!("levels of {:?} differ", a.name)));
            }
            if a.role == Role::Outcome && a.levels != b.levels {
                return Err(Error::Schema("outcome levels differ".into()));
            }
            let mut col = long.clone();
            col.high_cardinality = a.high_cardinality;
            merged.push(col);
        }
        Schema::new(merged)
    }
}

/// One table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Missing,
    Num(f64),
    /// Index into the column's level list.
    Cat(u32),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<u32> {
        match self {
            Cell::Cat(v) => Some(*v),
            _ => None,
        }
    }

    /// Bit-exact key, usable for hashing rows.
    pub fn key(&self) -> (u8, u64) {
        match self {
            Cell::Missing => (0, 0),
            Cell::Num(v) => (1, v.to_bits()),
            Cell::Cat(c) => (2, *c as u64),
        }
    }
}

pub type Row = Vec<Cell>;

/// Stable identity of a row, independent of its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub u64);

impl RowId {
    /// Identity assigned to every freshly generated row.
    pub const SYNTHETIC: RowId = RowId(u64::MAX);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Synthetic,
    Resampled,
    Augmented,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<Schema>,
    rows: Vec<Row>,
    ids: Vec<RowId>,
    provenance: Provenance,
}

impl Dataset {
    /// Build a dataset, checking every cell against the schema. Rows get
    /// sequential ids starting at zero.
    pub fn new(schema: Arc<Schema>, rows: Vec<Row>, provenance: Provenance) -> Result<Self> {
        let ids = (0..rows.len() as u64).map(RowId).collect();
        Self::with_ids(schema, rows, ids, provenance)
    }

    pub fn with_ids(
        schema: Arc<Schema>,
        rows: Vec<Row>,
        ids: Vec<RowId>,
        provenance: Provenance,
    ) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::invalid("row id count differs from row count"));
        }
        let outcome = schema.outcome_index();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::SchemaViolation(format!(
                    "row {r} has {} cells, schema has {} columns",
                    row.len(),
                    schema.len()
                )));
            }
            for (c, (cell, spec)) in row.iter().zip(&schema.columns).enumerate() {
                let ok = match (cell, spec.kind) {
                    (Cell::Missing, _) => c != outcome,
                    (Cell::Num(v), ColumnKind::Numeric) => v.is_finite(),
                    (Cell::Cat(l), ColumnKind::Categorical | ColumnKind::BinaryOutcome) => {
                        (*l as usize) < spec.levels.len()
                    }
                    _ => false,
                };
                if !ok {
                    return Err(Error::SchemaViolation(format!(
                        "row {r}, column {:?}: invalid cell {cell:?}",
                        spec.name
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            rows,
            ids,
            provenance,
        })
    }

    pub(crate) fn from_parts_unchecked(
        schema: Arc<Schema>,
        rows: Vec<Row>,
        ids: Vec<RowId>,
        provenance: Provenance,
    ) -> Self {
        debug_assert_eq!(rows.len(), ids.len());
        Self {
            schema,
            rows,
            ids,
            provenance,
        }
    }

    pub fn empty(schema: Arc<Schema>, provenance: Provenance) -> Self {
        Self::from_parts_unchecked(schema, Vec::new(), Vec::new(), provenance)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    pub fn ids(&self) -> &[RowId] {
        &self.ids
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.rows[row][col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Cell> + '_ {
        self.rows.iter().map(move |r| r[col])
    }

    pub fn label(&self, row: usize) -> bool {
        self.rows[row][self.schema.outcome_index()] == Cell::Cat(1)
    }

    pub fn labels(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = (0..self.len()).filter(|&i| self.label(i)).count();
        (self.len() - pos, pos)
    }

    pub fn prevalence(&self) -> f64 {
        let (_, pos) = self.class_counts();
        pos as f64 / self.len().max(1) as f64
    }

    /// Fails unless both outcome classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        let (neg, pos) = self.class_counts();
        if neg == 0 || pos == 0 {
            return Err(Error::degenerate(format!(
                "single-class data ({neg} negative, {pos} positive)"
            )));
        }
        Ok(())
    }

    /// Rows at `indices`, in that order, keeping ids and provenance.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Self::from_parts_unchecked(
            self.schema.clone(),
            indices.iter().map(|&i| self.rows[i].clone()).collect(),
            indices.iter().map(|&i| self.ids[i]).collect(),
            self.provenance,
        )
    }

    /// Same rows re-labelled under a compatible schema (level lists may only
    /// grow by appending).
    pub fn with_schema(&self, schema: Arc<Schema>) -> Result<Dataset> {
        self.schema.unify(&schema)?;
        Dataset::with_ids(schema, self.rows.clone(), self.ids.clone(), self.provenance)
    }

    /// Replace one column's cells and spec.
    pub(crate) fn replace_column(&self, col: usize, spec: ColumnSpec, cells: Vec<Cell>) -> Result<Dataset> {
        let mut columns = self.schema.columns.clone();
        columns[col] = spec;
        let schema = Arc::new(Schema::new(columns)?);
        let rows = self
            .rows
            .iter()
            .zip(cells)
            .map(|(r, c)| {
                let mut r = r.clone();
                r[col] = c;
                r
            })
            .collect();
        Dataset::with_ids(schema, rows, self.ids.clone(), self.provenance)
    }

    /// Outcome labels swapped (positive becomes negative).
    pub fn with_flipped_outcome(&self) -> Dataset {
        let o = self.schema.outcome_index();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if let Cell::Cat(l) = r[o] {
                    r[o] = Cell::Cat(1 - l);
                }
                r
            })
            .collect();
        Self::from_parts_unchecked(self.schema.clone(), rows, self.ids.clone(), self.provenance)
    }
}

/// Append `extra` after `base`. The result is marked augmented.
pub fn concat(base: &Dataset, extra: &Dataset) -> Result<Dataset> {
    let schema = if Arc::ptr_eq(base.schema_arc(), extra.schema_arc()) || base.schema() == extra.schema() {
        base.schema_arc().clone()
    } else {
        Arc::new(base.schema().unify(extra.schema())?)
    };
    let mut rows = Vec::with_capacity(base.len() + extra.len());
    rows.extend_from_slice(base.rows());
    rows.extend_from_slice(extra.rows());
    let mut ids = Vec::with_capacity(rows.len());
    ids.extend_from_slice(base.ids());
    ids.extend_from_slice(extra.ids());
    Ok(Dataset::from_parts_unchecked(
        schema,
        rows,
        ids,
        Provenance::Augmented,
    ))
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_requires_one_two_level_outcome() {
        assert!(Schema::new(vec![ColumnSpec::numeric("x")]).is_err());
        assert!(Schema::new(vec![ColumnSpec::outcome("y", &["0", "1", "2"])]).is_err());
        assert!(Schema::new(vec![
            ColumnSpec::outcome("y", &["0", "1"]),
            ColumnSpec::outcome("z", &["0", "1"])
        ])
        .is_err());
        assert!(Schema::new(vec![ColumnSpec::categorical("c", &["a", "a"]), ColumnSpec::outcome("y", &["0", "1"])]).is_err());
        let mut bad = ColumnSpec::numeric("x");
        bad.levels = vec!["1".into()];
        assert!(Schema::new(vec![bad, ColumnSpec::outcome("y", &["0", "1"])]).is_err());
    }

    #[test]
    fn outcome_cells_may_not_be_missing() {
        let ds = fixtures::small(3);
        let mut rows = ds.rows().to_vec();
        rows[0][2] = Cell::Missing;
        assert!(Dataset::new(ds.schema_arc().clone(), rows, Provenance::Original).is_err());
    }

    #[test]
    fn concat_counts_and_order() {
        let base = fixtures::small(360);
        let extra = fixtures::small(720).with_provenance(Provenance::Synthetic);
        let aug = concat(&base, &extra).unwrap();
        assert_eq!(aug.len(), 1080);
        assert_eq!(aug.provenance(), Provenance::Augmented);
        assert_eq!(aug.row(359), base.row(359));
        assert_eq!(aug.row(360), extra.row(0));

        let empty = Dataset::empty(base.schema_arc().clone(), Provenance::Synthetic);
        let same = concat(&base, &empty).unwrap();
        assert_eq!(same.rows(), base.rows());
    }

    #[test]
    fn concat_rejects_schema_mismatch() {
        let base = fixtures::small(5);
        let other = Arc::new(
            Schema::new(vec![ColumnSpec::numeric("z"), ColumnSpec::outcome("y", &["0", "1"])]).unwrap(),
        );
        let extra = Dataset::empty(other, Provenance::Synthetic);
        assert!(concat(&base, &extra).is_err());
    }

    #[test]
    fn unify_accepts_appended_levels() {
        let a = Schema::new(vec![ColumnSpec::categorical("c", &["a"]), ColumnSpec::outcome("y", &["0", "1"])]).unwrap();
        let b = Schema::new(vec![ColumnSpec::categorical("c", &["a", "b"]), ColumnSpec::outcome("y", &["0", "1"])]).unwrap();
        assert_eq!(a.unify(&b).unwrap().columns[0].levels, vec!["a", "b"]);
        let c = Schema::new(vec![ColumnSpec::categorical("c", &["b"]), ColumnSpec::outcome("y", &["0", "1"])]).unwrap();
        assert!(a.unify(&c).is_err());
    }
}

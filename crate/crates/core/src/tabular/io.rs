//! CSV and schema-file input/output.
//!
//! Data files are RFC-4180 CSV with a header row. An empty cell or the
//! literal `NA` is a missing value. Schema files are JSON:
//!
//! ```json
//! {"columns": [
//!   {"name": "age", "kind": "numeric"},
//!   {"name": "drg", "kind": "categorical", "high_cardinality": true},
//!   {"name": "died", "kind": "binary-outcome", "levels": ["0", "1"]}
//! ]}
//! ```
//!
//! `role` defaults to `outcome` for the binary-outcome column and
//! `predictor` otherwise; absent `levels` are inferred from the data
//! (sorted); absent `high_cardinality` is inferred from the level count.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, ColumnSpec, Dataset, Provenance, Role, Schema, HIGH_CARDINALITY_LEVELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ColumnDecl {
    name: String,
    kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    role: Option<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    high_cardinality: Option<bool>,
}

/// Parsed schema file; levels may still be unresolved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaFile {
    columns: Vec<ColumnDecl>,
}

impl From<&Schema> for SchemaFile {
    fn from(schema: &Schema) -> Self {
        SchemaFile {
            columns: schema
                .columns
                .iter()
                .map(|c| ColumnDecl {
                    name: c.name.clone(),
                    kind: c.kind,
                    role: Some(c.role),
                    levels: (c.kind != ColumnKind::Numeric).then(|| c.levels.clone()),
                    high_cardinality: (c.kind == ColumnKind::Categorical).then_some(c.high_cardinality),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject categorical values outside the declared levels instead of
    /// appending them.
    pub strict: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub dropped_missing_outcome: usize,
    /// `(column, level)` pairs appended in lenient mode.
    pub added_levels: Vec<(String, String)>,
}

pub fn load_schema(path: &Path) -> Result<SchemaFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

pub fn save_schema(schema: &Schema, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&SchemaFile::from(schema))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s == "NA"
}

/// Load `path` against the schema file at `schema_path`.
pub fn load_csv(path: &Path, schema_path: &Path, opts: LoadOptions) -> Result<(Dataset, LoadReport)> {
    let decls = load_schema(schema_path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, &decls, opts)
}

/// Read a CSV whose schema is already resolved. In lenient mode unseen
/// levels are appended, so the returned dataset's schema may extend
/// `schema`.
pub fn read_csv_with_schema(path: &Path, schema: &Schema, opts: LoadOptions) -> Result<(Dataset, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, &SchemaFile::from(schema), opts)
}

pub fn parse_csv<R: Read>(reader: R, decls: &SchemaFile, opts: LoadOptions) -> Result<(Dataset, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| csv_error(&e))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();

    let mut by_name: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if by_name.insert(h.as_str(), i).is_some() {
            return Err(Error::Schema(format!("duplicate CSV header {h:?}")));
        }
    }
    if header.len() != decls.columns.len() {
        return Err(Error::Schema(format!(
            "CSV has {} columns, schema declares {}",
            header.len(),
            decls.columns.len()
        )));
    }
    // position in the CSV of each schema column
    let mut source = Vec::with_capacity(decls.columns.len());
    for d in &decls.columns {
        match by_name.get(d.name.as_str()) {
            Some(&i) => source.push(i),
            None => return Err(Error::Schema(format!("schema column {:?} missing from CSV header", d.name))),
        }
    }
    let outcome_pos = decls
        .columns
        .iter()
        .position(|d| d.kind == ColumnKind::BinaryOutcome)
        .ok_or_else(|| Error::Schema("no binary-outcome column".into()))?;

    let mut records: Vec<(u64, Vec<String>)> = Vec::new();
    let mut report = LoadReport::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<String> = source.iter().map(|&i| rec[i].trim().to_string()).collect();
        if is_missing(&fields[outcome_pos]) {
            report.dropped_missing_outcome += 1;
            continue;
        }
        records.push((line, fields));
    }
    if records.is_empty() {
        return Err(Error::NoRows);
    }

    let mut columns = Vec::with_capacity(decls.columns.len());
    for (j, d) in decls.columns.iter().enumerate() {
        let role = d.role.unwrap_or(if d.kind == ColumnKind::BinaryOutcome {
            Role::Outcome
        } else {
            Role::Predictor
        });
        let levels = match (d.kind, &d.levels) {
            (ColumnKind::Numeric, _) => Vec::new(),
            (_, Some(l)) => l.clone(),
            (_, None) => records
                .iter()
                .map(|(_, f)| f[j].as_str())
                .filter(|s| !is_missing(s))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .map(str::to_string)
                .collect(),
        };
        columns.push(ColumnSpec {
            name: d.name.clone(),
            kind: d.kind,
            role,
            levels,
            high_cardinality: false,
        });
    }

    let mut rows = Vec::with_capacity(records.len());
    for (line, fields) in &records {
        let mut row = Vec::with_capacity(columns.len());
        for (j, f) in fields.iter().enumerate() {
            let col = &mut columns[j];
            let cell = if is_missing(f) {
                Cell::Missing
            } else if col.kind == ColumnKind::Numeric {
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Cell::Num(v),
                    _ => {
                        return Err(Error::Csv {
                            line: *line,
                            message: format!("column {:?}: {f:?} is not a finite number", col.name),
                        })
                    }
                }
            } else {
                match col.level_index(f) {
                    Some(l) => Cell::Cat(l),
                    None if opts.strict || col.role == Role::Outcome => {
                        return Err(Error::SchemaViolation(format!(
                            "line {line}: column {:?} has undeclared level {f:?}",
                            col.name
                        )))
                    }
                    None => {
                        col.levels.push(f.clone());
                        report.added_levels.push((col.name.clone(), f.clone()));
                        Cell::Cat((col.levels.len() - 1) as u32)
                    }
                }
            };
            row.push(cell);
        }
        rows.push(row);
    }

    for (col, d) in columns.iter_mut().zip(&decls.columns) {
        if col.kind == ColumnKind::Categorical {
            col.high_cardinality = d
                .high_cardinality
                .unwrap_or(col.levels.len() > HIGH_CARDINALITY_LEVELS);
        }
    }
    let schema = Arc::new(Schema::new(columns)?);
    Ok((Dataset::new(schema, rows, Provenance::Original)?, report))
}

fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Csv {
        line,
        message: e.to_string(),
    }
}

fn format_cell(cell: Cell, spec: &ColumnSpec) -> String {
    match cell {
        Cell::Missing => "NA".to_string(),
        Cell::Num(v) => format!("{v}"),
        Cell::Cat(l) => spec.levels[l as usize].clone(),
    }
}

/// Write `ds` as CSV (header plus one line per row).
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let schema = ds.schema();
    let map = |e: csv::Error| Error::Csv {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(schema.columns.iter().map(|c| c.name.as_str())).map_err(map)?;
    for row in ds.rows() {
        w.write_record(row.iter().zip(&schema.columns).map(|(c, s)| format_cell(*c, s)))
            .map_err(map)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}

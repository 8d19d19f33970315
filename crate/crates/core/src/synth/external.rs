//! Adapter for synthesizers that run as separate programs.
//!
//! The work directory holds `train.csv`, `schema.json` and `request.json`
//! (`{"n_prime": .., "seed": ..}`). The command is run as
//! `<command> [args..] <workdir>` and must write `synthetic.csv` there and
//! exit 0.

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{read_csv_with_schema, save_csv, save_schema, Dataset, LoadOptions, Provenance, RowId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    /// Name used in sweep output, e.g. `ctgan`.
    pub name: String,
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Reject levels absent from the training schema.
    #[serde(default = "default_strict")]
    pub strict: bool,
}

fn default_strict() -> bool {
    true
}

impl ExternalConfig {
    pub fn new(name: &str, command: &str) -> Self {
        Self {
            name: name.to_string(),
            command: command.to_string(),
            args: Vec::new(),
            strict: true,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.command.trim().is_empty() {
            return Err(Error::invalid("external synthesizer needs a command"));
        }
        if self.name.trim().is_empty() {
            return Err(Error::invalid("external synthesizer needs a name"));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Request {
    n_prime: usize,
    seed: u64,
}

pub fn external_generate(config: &ExternalConfig, train: &Dataset, n_prime: usize, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let dir = tempfile::Builder::new()
        .prefix("augmentor-ext-")
        .tempdir()
        .map_err(|e| Error::io(std::env::temp_dir(), e))?;
    run_in(config, train, n_prime, seed, dir.path())
}

fn run_in(config: &ExternalConfig, train: &Dataset, n_prime: usize, seed: u64, dir: &Path) -> Result<Dataset> {
    save_csv(train, &dir.join("train.csv"))?;
    save_schema(train.schema(), &dir.join("schema.json"))?;
    let request = serde_json::to_string(&Request { n_prime, seed })?;
    let request_path = dir.join("request.json");
    std::fs::write(&request_path, request).map_err(|e| Error::io(&request_path, e))?;

    let output = Command::new(&config.command)
        .args(&config.args)
        .arg(dir)
        .output()
        .map_err(|e| Error::External {
            status: "spawn failed".into(),
            stderr: format!("{}: {e}", config.command),
        })?;
    if !output.status.success() {
        return Err(Error::External {
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim_end().to_string(),
        });
    }

    let synthetic = dir.join("synthetic.csv");
    if !synthetic.exists() {
        return Err(Error::External {
            status: output.status.to_string(),
            stderr: "command did not write synthetic.csv".into(),
        });
    }
    let (ds, report) = match read_csv_with_schema(&synthetic, train.schema(), LoadOptions { strict: config.strict }) {
        Ok(r) => r,
        // a file with only a header still counts as n_prime = 0 output
        Err(Error::NoRows) if n_prime == 0 => return Ok(Dataset::empty(train.schema_arc().clone(), Provenance::Synthetic)),
        Err(e) => return Err(e),
    };
    if report.dropped_missing_outcome > 0 {
        return Err(Error::SchemaViolation(format!(
            "synthetic.csv has {} rows with a missing outcome",
            report.dropped_missing_outcome
        )));
    }
    if ds.len() != n_prime {
        return Err(Error::SchemaViolation(format!(
            "synthetic.csv has {} rows, requested {n_prime}",
            ds.len()
        )));
    }
    let schema = if ds.schema() == train.schema() {
        train.schema_arc().clone()
    } else {
        ds.schema_arc().clone()
    };
    let ids = vec![RowId::SYNTHETIC; ds.len()];
    Ok(Dataset::from_parts_unchecked(schema, ds.rows().to_vec(), ids, Provenance::Synthetic))
}

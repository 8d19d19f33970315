//! Sequential synthesis with conditional CART trees.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cart::{grow, CartParams, Target, Tree};
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::tabular::{Cell, Dataset, Provenance, RowId, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeqConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Column names in synthesis order. Defaults to schema order with the
    /// outcome moved last.
    pub column_order: Option<Vec<String>>,
}

impl Default for SeqConfig {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 5,
            column_order: None,
        }
    }
}

impl SeqConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::invalid("seq min_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// One tree per column; tree `k` sees only the columns synthesized before it.
#[derive(Debug, Clone)]
pub struct SeqTreeModel {
    schema: Arc<Schema>,
    pub column_order: Vec<usize>,
    pub trees: Vec<Tree<Vec<Cell>>>,
}

impl SeqTreeModel {
    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn leaf_pool_sizes(&self) -> Vec<Vec<usize>> {
        self.trees
            .iter()
            .map(|t| t.leaves().iter().map(|l| l.len()).collect())
            .collect()
    }
}

fn resolve_order(schema: &Schema, names: Option<&[String]>) -> Result<Vec<usize>> {
    match names {
        None => {
            let mut order = schema.predictor_indices();
            order.push(schema.outcome_index());
            Ok(order)
        }
        Some(names) => {
            let order: Vec<usize> = names
                .iter()
                .map(|n| {
                    schema
                        .index_of(n)
                        .ok_or_else(|| Error::invalid(format!("column order names unknown column {n:?}")))
                })
                .collect::<Result<_>>()?;
            let mut seen = vec![false; schema.len()];
            for &c in &order {
                if std::mem::replace(&mut seen[c], true) {
                    return Err(Error::invalid("column order repeats a column"));
                }
            }
            if order.len() != schema.len() {
                return Err(Error::invalid("column order must list every column"));
            }
            Ok(order)
        }
    }
}

pub fn fit_seq(train: &Dataset, config: &SeqConfig) -> Result<SeqTreeModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::NoRows);
    }
    let order = resolve_order(train.schema(), config.column_order.as_deref())?;
    let params = CartParams {
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
    };
    let trees = crate::par::map_range(order.len(), |k| {
        let col = order[k];
        let target = Target::from_column(train, col);
        let tree = grow(train, &order[..k], &target, params);
        tree.map_leaves(|rows| rows.iter().map(|&r| train.cell(r, col)).collect())
    });
    Ok(SeqTreeModel {
        schema: train.schema_arc().clone(),
        column_order: order,
        trees,
    })
}

pub fn generate_seq(model: &SeqTreeModel, n_prime: usize, seed: u64) -> Dataset {
    let schema = model.schema().clone();
    let mut rng = rng_from(seed);
    let mut rows = Vec::with_capacity(n_prime);
    for _ in 0..n_prime {
        let mut row = vec![Cell::Missing; schema.len()];
        for (&col, tree) in model.column_order.iter().zip(&model.trees) {
            let pool = tree.route(&row);
            row[col] = pool[rng.random_range(0..pool.len())];
        }
        rows.push(row);
    }
    let ids = vec![RowId::SYNTHETIC; n_prime];
    Dataset::from_parts_unchecked(schema, rows, ids, Provenance::Synthetic)
}

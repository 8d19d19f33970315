//! Decide whether a small mixed-type tabular dataset will benefit from
//! synthetic-data augmentation, generate the augmentation, find the amount
//! that maximises downstream classifier AUC, and measure how much genuine
//! diversity it added.
//!
//! Module map:
//!
//! * [`tabular`]: typed data model, CSV/schema IO, stratified sampling, target encoding
//! * [`complexity`]: dataset-complexity profile
//! * [`synth`]: sequential-tree, Bayesian-network, bootstrap and external synthesizers
//! * [`workload`]: GBDT classifier, AUC, random-search tuning, nested CV
//! * [`diversity`]: extended isolation forest, contamination curves, diversity score
//! * [`decision`]: augmentation decision model
//! * [`harness`]: augmentation series, sweeps, part-1 simulation, permutation test, benchmark data
//! * [`cli`]: the `augmentor` command

pub mod cli;
pub mod complexity;
pub mod decision;
pub mod diversity;
pub mod error;
pub mod harness;
pub mod par;
pub mod rng;
pub mod synth;
pub mod tabular;
pub mod workload;

pub use error::{Error, Result};

//! Decision support: should a dataset be augmented at all?
//!
//! A logistic model over sample size, imbalance factor, degrees of freedom
//! and baseline AUC. The published coefficients ship as
//! [`published_model`]; [`train_decision`] refits the same form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::complexity::ComplexityProfile;
use crate::error::{Error, Result};
use crate::workload::auc;

pub const FEATURE_NAMES: [&str; 4] = ["n0", "imbalance", "dof", "baseline_auc"];

const MAX_ITERATIONS: usize = 500;
const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionFeatures {
    pub n0: f64,
    pub imbalance: f64,
    pub dof: f64,
    pub baseline_auc: f64,
}

impl DecisionFeatures {
    pub fn from_profile(profile: &ComplexityProfile) -> Result<Self> {
        let baseline_auc = profile
            .baseline_auc
            .ok_or_else(|| Error::invalid("profile has no baseline AUC"))?;
        Ok(Self {
            n0: profile.n0 as f64,
            imbalance: profile.imbalance,
            dof: profile.dof as f64,
            baseline_auc,
        })
    }

    fn as_array(&self) -> [f64; 4] {
        [self.n0, self.imbalance, self.dof, self.baseline_auc]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    pub intercept: f64,
    pub coef_n0: f64,
    pub coef_imbalance: f64,
    pub coef_dof: f64,
    pub coef_auc: f64,
    pub threshold: f64,
}

/// Coefficients of the published model, unstandardized.
pub fn published_model() -> DecisionModel {
    DecisionModel {
        intercept: 6.75,
        coef_n0: -4.79e-5,
        coef_imbalance: -4.94e-2,
        coef_dof: 5.12e-4,
        coef_auc: -7.63,
        threshold: 0.5,
    }
}

impl DecisionModel {
    fn coefficients(&self) -> [f64; 4] {
        [self.coef_n0, self.coef_imbalance, self.coef_dof, self.coef_auc]
    }

    pub fn logit(&self, f: &DecisionFeatures) -> f64 {
        self.intercept + self.coefficients().iter().zip(f.as_array()).map(|(c, x)| c * x).sum::<f64>()
    }

    pub fn probability(&self, f: &DecisionFeatures) -> f64 {
        1.0 / (1.0 + (-self.logit(f)).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub probability: f64,
    pub recommend: bool,
    pub features: DecisionFeatures,
}

pub fn recommend_features(model: &DecisionModel, features: DecisionFeatures) -> Recommendation {
    let probability = model.probability(&features);
    Recommendation { probability, recommend: probability > model.threshold, features }
}

/// Recommend augmentation when the predicted probability exceeds the
/// threshold (strictly).
pub fn recommend(model: &DecisionModel, profile: &ComplexityProfile) -> Result<Recommendation> {
    Ok(recommend_features(model, DecisionFeatures::from_profile(profile)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub dataset_id: String,
    pub generative_model: String,
    pub features: DecisionFeatures,
    /// Augmentation improved AUC over the baseline.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedDecision {
    pub model: DecisionModel,
    pub iterations: usize,
    pub converged: bool,
    /// The classes are (quasi-)separable; coefficients are the last iterate.
    pub separated: bool,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    for k in 0..5 {
        let p = (k..5).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())?;
        if a[p][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..5 {
            let f = a[i][k] / a[k][k];
            for j in k..5 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 5];
    for k in (0..5).rev() {
        let s: f64 = (k + 1..5).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares on standardized features. Stops when the mean log-likelihood
/// changes by less than 1e-8 or after 500 iterations.
pub fn train_decision(records: &[DecisionRecord]) -> Result<TrainedDecision> {
    if records.len() < 2 {
        return Err(Error::invalid("need at least two records"));
    }
    if records.iter().all(|r| r.label) || records.iter().all(|r| !r.label) {
        return Err(Error::degenerate("all records share one label"));
    }
    if records.iter().any(|r| r.features.as_array().iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("record features must be finite"));
    }
    let n = records.len() as f64;
    let scale: Vec<(f64, f64)> = (0..4)
        .map(|k| {
            let (m, sd) = mean_sd(records.iter().map(move |r| r.features.as_array()[k]));
            (m, if sd > 0.0 { sd } else { 1.0 })
        })
        .collect();
    let xs: Vec<[f64; 5]> = records
        .iter()
        .map(|r| {
            let f = r.features.as_array();
            let mut x = [1.0; 5];
            for k in 0..4 {
                x[k + 1] = (f[k] - scale[k].0) / scale[k].1;
            }
            x
        })
        .collect();
    let ys: Vec<f64> = records.iter().map(|r| r.label as u8 as f64).collect();
    let mean_ll = |beta: &[f64; 5]| {
        xs.iter()
            .zip(&ys)
            .map(|(x, &y)| {
                let z: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                // log(1 + e^z) computed stably
                let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                y * z - softplus
            })
            .sum::<f64>()
            / n
    };

    let mut beta = [0.0; 5];
    let mut ll = mean_ll(&beta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        let mut h = [[0.0; 5]; 5];
        let mut g = [0.0; 5];
        for (x, &y) in xs.iter().zip(&ys) {
            let p = sigmoid(x.iter().zip(&beta).map(|(a, b)| a * b).sum());
            let w = p * (1.0 - p);
            for i in 0..5 {
                g[i] += (y - p) * x[i] / n;
                for j in 0..5 {
                    h[i][j] += w * x[i] * x[j] / n;
                }
            }
        }
        for (i, row) in h.iter_mut().enumerate() {
            row[i] += 1e-12;
        }
        let Some(step) = solve(h, g) else { break };
        let mut next = beta;
        for i in 0..5 {
            next[i] += step[i];
        }
        let next_ll = mean_ll(&next);
        beta = next;
        let change = (next_ll - ll).abs();
        ll = next_ll;
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }

    let mut coef = [0.0; 4];
    let mut intercept = beta[0];
    for k in 0..4 {
        coef[k] = beta[k + 1] / scale[k].1;
        intercept -= coef[k] * scale[k].0;
    }
    let model = DecisionModel {
        intercept,
        coef_n0: coef[0],
        coef_imbalance: coef[1],
        coef_dof: coef[2],
        coef_auc: coef[3],
        threshold: 0.5,
    };
    let separated = records.iter().all(|r| {
        let p = model.probability(&r.features);
        (p > 0.5) == r.label && (p - r.label as u8 as f64).abs() < 1e-3
    });
    Ok(TrainedDecision { model, iterations, converged, separated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub dataset_id: String,
    /// `None` when the held-out group has a single label.
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub mean_auc: Option<f64>,
    pub mean_accuracy: f64,
    pub groups: Vec<GroupResult>,
}

/// Leave one dataset out at a time. Groups are processed in sorted id order.
pub fn loocv_by_group(records: &[DecisionRecord]) -> Result<LoocvReport> {
    let mut groups: BTreeMap<&str, Vec<&DecisionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.dataset_id).or_default().push(r);
    }
    if groups.len() < 2 {
        return Err(Error::invalid("leave-one-group-out needs at least two datasets"));
    }
    let ids: Vec<&str> = groups.keys().copied().collect();
    let results = crate::par::try_map(&ids, |&id| {
        let train: Vec<DecisionRecord> = records.iter().filter(|r| r.dataset_id != id).cloned().collect();
        let fit = train_decision(&train)?;
        let held = &groups[id];
        let probs: Vec<f64> = held.iter().map(|r| fit.model.probability(&r.features)).collect();
        let labels: Vec<bool> = held.iter().map(|r| r.label).collect();
        let correct = probs.iter().zip(&labels).filter(|(p, l)| (**p > 0.5) == **l).count();
        let auc = if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            Some(auc(&probs, &labels)?)
        } else {
            None
        };
        Ok::<_, Error>(GroupResult {
            dataset_id: id.to_string(),
            auc,
            accuracy: correct as f64 / labels.len() as f64,
            separated: fit.separated,
        })
    })?;
    let aucs: Vec<f64> = results.iter().filter_map(|g| g.auc).collect();
    Ok(LoocvReport {
        mean_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        mean_accuracy: results.iter().map(|g| g.accuracy).sum::<f64>() / results.len() as f64,
        groups: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedCoefficient {
    pub feature: String,
    pub value: f64,
    pub zero_variance: bool,
}

/// Each coefficient times the sample standard deviation of its feature.
pub fn standardize_coefficients(model: &DecisionModel, records: &[DecisionRecord]) -> Result<Vec<StandardizedCoefficient>> {
    if records.len() < 2 {
        return Err(Error::invalid("need at least two records"));
    }
    Ok(model
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let (_, sd) = mean_sd(records.iter().map(|r| r.features.as_array()[k]));
            StandardizedCoefficient {
                feature: FEATURE_NAMES[k].to_string(),
                value: if sd > 0.0 { c * sd } else { 0.0 },
                zero_variance: sd == 0.0,
            }
        })
        .collect())
}

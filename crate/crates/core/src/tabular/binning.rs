//! Equal-frequency discretization of numeric values.

use serde::{Deserialize, Serialize};

/// Cut points at the `k/B` quantiles, duplicates merged. A value lands in
/// bin `#{cuts <= value}`, so bins are `[min, c1), [c1, c2), .., [c_m, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBins {
    cuts: Vec<f64>,
    min: f64,
    max: f64,
}

impl QuantileBins {
    /// `values` must be finite; an empty slice gives a single empty bin.
    pub fn fit(values: &[f64], bins: usize) -> Self {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.is_empty() {
            return Self { cuts: Vec::new(), min: 0.0, max: 0.0 };
        }
        let n = sorted.len();
        let mut cuts: Vec<f64> = Vec::new();
        for k in 1..bins.max(1) {
            let v = sorted[(k * n) / bins];
            // a cut equal to the minimum would leave bin 0 empty
            if v > sorted[0] && cuts.last().is_none_or(|&last| v > last) {
                cuts.push(v);
            }
        }
        Self { cuts, min: sorted[0], max: sorted[n - 1] }
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn bin(&self, v: f64) -> usize {
        self.cuts.partition_point(|&c| c <= v)
    }

    /// `[lo, hi]` range of bin `b` over the fitted data.
    pub fn bounds(&self, b: usize) -> (f64, f64) {
        let lo = if b == 0 { self.min } else { self.cuts[b - 1] };
        let hi = if b < self.cuts.len() { self.cuts[b] } else { self.max };
        (lo, hi)
    }
}

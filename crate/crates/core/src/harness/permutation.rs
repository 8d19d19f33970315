use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_EXACT_PAIRS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    /// Alternative: the first value of each pair tends to be larger.
    Greater,
    Less,
}

impl Tail {
    pub fn opposite(self) -> Tail {
        match self {
            Tail::Greater => Tail::Less,
            Tail::Less => Tail::Greater,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestResult {
    pub observed_mean_diff: f64,
    pub p_value: f64,
    /// Sign assignments at least as extreme as the observed one.
    pub extreme: u64,
    pub enumerated: u64,
    pub tail: Tail,
}

impl PermutationTestResult {
    /// `extreme / enumerated` in lowest terms.
    pub fn fraction(&self) -> (u64, u64) {
        let (mut a, mut b) = (self.extreme, self.enumerated);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        (self.extreme / a.max(1), self.enumerated / a.max(1))
    }
}

/// Exact one-tailed paired test: flip the sign of each difference
/// `a - b` in all `2^k` ways and count sums at least as extreme as the
/// observed sum. Sums equal to within rounding count as ties.
pub fn exact_permutation_test(pairs: &[(f64, f64)], tail: Tail) -> Result<PermutationTestResult> {
    let k = pairs.len();
    if k == 0 {
        return Err(Error::invalid("permutation test needs at least one pair"));
    }
    if k > MAX_EXACT_PAIRS {
        return Err(Error::TooManyPairs(k));
    }
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("pairs must be finite"));
    }
    let observed: f64 = diffs.iter().sum();
    let eps = 1e-9 * diffs.iter().map(|d| d.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let total = 1u64 << k;
    let mut extreme = 0u64;
    for mask in 0..total {
        let s: f64 = diffs
            .iter()
            .enumerate()
            .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
            .sum();
        let hit = match tail {
            Tail::Greater => s >= observed - eps,
            Tail::Less => s <= observed + eps,
        };
        extreme += hit as u64;
    }
    Ok(PermutationTestResult {
        observed_mean_diff: observed / k as f64,
        p_value: extreme as f64 / total as f64,
        extreme,
        enumerated: total,
        tail,
    })
}

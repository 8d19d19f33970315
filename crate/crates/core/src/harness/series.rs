use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const SERIES_LEN: usize = 30;
pub const BASE_MEAN: f64 = 1.5;
pub const BASE_SD: f64 = 0.005;

/// Augmentation sizes `ceil(b^(i + 4))` for `i = 1..=30`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricSeries {
    pub b: f64,
    pub sizes: Vec<usize>,
}

impl GeometricSeries {
    pub fn with_base(b: f64) -> Result<Self> {
        if !(b > 1.0 && b.is_finite()) {
            return Err(Error::invalid("series base must exceed 1"));
        }
        let sizes = (1..=SERIES_LEN as i32).map(|i| b.powi(i + 4).ceil() as usize).collect();
        Ok(Self { b, sizes })
    }

    /// Size `i`, counting from 1.
    pub fn size(&self, i: usize) -> usize {
        self.sizes[i - 1]
    }

    /// Distinct sizes not above `max`, ascending.
    pub fn truncated(&self, max: Option<usize>) -> Vec<usize> {
        let mut out: Vec<usize> = self.sizes.iter().copied().filter(|&s| max.is_none_or(|m| s <= m)).collect();
        out.dedup();
        out
    }
}

/// Series with `b ~ Normal(1.5, sd)`.
pub fn geometric_series_with_sd(seed: u64, sd: f64) -> Result<GeometricSeries> {
    let dist = Normal::new(BASE_MEAN, sd).map_err(|e| Error::invalid(e.to_string()))?;
    GeometricSeries::with_base(rng_from(seed).sample(dist))
}

pub fn geometric_series(seed: u64) -> GeometricSeries {
    geometric_series_with_sd(seed, BASE_SD).expect("the default spread gives a valid base")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_base() {
        let s = GeometricSeries::with_base(1.5).unwrap();
        assert_eq!(s.size(1), 8);
        assert_eq!(s.size(30), 970_740);
        assert_eq!(s.sizes.len(), 30);
        assert_eq!(s.truncated(Some(5000)).last(), Some(&4_988));
        assert!(GeometricSeries::with_base(1.0).is_err());
    }

    #[test]
    fn seeded_draws() {
        let a = geometric_series(1);
        let b = geometric_series(2);
        assert_ne!(a.b, b.b);
        let mut top = Vec::new();
        for seed in 0..1000 {
            let s = geometric_series(seed);
            assert!((1.47..=1.53).contains(&s.b));
            assert_eq!(s.sizes.len(), 30);
            assert!(s.sizes.windows(2).all(|w| w[0] <= w[1]));
            top.push(s.size(30));
        }
        top.sort_unstable();
        assert!((800_000..=1_200_000).contains(&top[500]));
    }
}

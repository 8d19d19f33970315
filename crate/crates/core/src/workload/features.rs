//! Histogram binning of predictors for the boosted trees.

use crate::error::Result;
use crate::tabular::{fit_target_encoder, Cell, ColumnKind, Dataset, QuantileBins, TargetEncoder};

pub const MAX_BINS: usize = 255;
/// Bin code reserved for missing (and unseen) values.
pub const MISSING_BIN: u8 = 255;

/// Smoothing for the target encoding of high-cardinality columns.
pub const ENCODER_SMOOTHING: f64 = 20.0;

#[derive(Debug, Clone)]
enum Feature {
    Numeric { col: usize, bins: Option<QuantileBins> },
    Categorical { col: usize, n_levels: usize },
    Encoded { col: usize, encoder: TargetEncoder, bins: QuantileBins },
}

/// Per-predictor mapping from cells to bin codes, fitted on a training
/// partition.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    features: Vec<Feature>,
}

/// Column-major bin codes.
#[derive(Debug, Clone)]
pub struct Binned {
    pub n_rows: usize,
    pub codes: Vec<Vec<u8>>,
}

impl FeatureMap {
    pub fn fit(train: &Dataset) -> Result<Self> {
        let schema = train.schema();
        let mut features = Vec::new();
        for col in schema.predictor_indices() {
            let spec = &schema.columns[col];
            let feature = if spec.kind == ColumnKind::Numeric {
                let values: Vec<f64> = train.column(col).filter_map(|c| c.as_num()).collect();
                Feature::Numeric {
                    col,
                    bins: (!values.is_empty()).then(|| QuantileBins::fit(&values, MAX_BINS)),
                }
            } else if spec.high_cardinality || spec.n_levels() >= MAX_BINS {
                let encoder = fit_target_encoder(train, &spec.name, ENCODER_SMOOTHING)?;
                let values: Vec<f64> = train.column(col).map(|c| encoder.encode(spec, c)).collect();
                Feature::Encoded {
                    col,
                    bins: QuantileBins::fit(&values, MAX_BINS),
                    encoder,
                }
            } else {
                Feature::Categorical { col, n_levels: spec.n_levels() }
            };
            features.push(feature);
        }
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn is_categorical(&self, f: usize) -> bool {
        matches!(self.features[f], Feature::Categorical { .. })
    }

    /// Number of non-missing bins of feature `f`.
    pub fn n_bins(&self, f: usize) -> usize {
        match &self.features[f] {
            Feature::Numeric { bins, .. } => bins.as_ref().map_or(0, |b| b.n_bins()),
            Feature::Categorical { n_levels, .. } => *n_levels,
            Feature::Encoded { bins, .. } => bins.n_bins(),
        }
    }

    fn code(&self, ds: &Dataset, f: usize, cell: Cell) -> u8 {
        match (&self.features[f], cell) {
            (Feature::Numeric { bins: Some(b), .. }, Cell::Num(v)) => b.bin(v) as u8,
            (Feature::Categorical { n_levels, .. }, Cell::Cat(l)) if (l as usize) < *n_levels => l as u8,
            (Feature::Encoded { col, encoder, bins }, c) => {
                bins.bin(encoder.encode(&ds.schema().columns[*col], c)) as u8
            }
            _ => MISSING_BIN,
        }
    }

    pub fn transform(&self, ds: &Dataset) -> Binned {
        let codes = (0..self.features.len())
            .map(|f| {
                let col = match &self.features[f] {
                    Feature::Numeric { col, .. } | Feature::Categorical { col, .. } | Feature::Encoded { col, .. } => *col,
                };
                ds.column(col).map(|c| self.code(ds, f, c)).collect()
            })
            .collect();
        Binned { n_rows: ds.len(), codes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::fixtures::small;

    #[test]
    fn codes_cover_bins_and_missing() {
        let ds = small(600);
        let map = FeatureMap::fit(&ds).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.n_bins(0), MAX_BINS);
        assert!(map.is_categorical(1));
        let b = map.transform(&ds);
        assert!(b.codes[0].iter().all(|&c| (c as usize) < MAX_BINS));
        assert_eq!(b.codes[1][4], 1);
        let mut row = ds.rows().to_vec();
        row[0][0] = Cell::Missing;
        let ds2 = Dataset::new(ds.schema_arc().clone(), row, crate::tabular::Provenance::Original).unwrap();
        assert_eq!(map.transform(&ds2).codes[0][0], MISSING_BIN);
    }
}

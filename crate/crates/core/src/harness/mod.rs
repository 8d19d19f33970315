//! Experiment orchestration: augmentation series, sweeps, the decision-model
//! simulation, exact permutation tests and benchmark populations.

pub mod benchmark;
pub mod permutation;
pub mod series;
pub mod simulate;
pub mod sweep;

pub use benchmark::{benchmark_generator, calibrate, Calibration, PopulationSpec, PredictorKind, PredictorSpec};
pub use permutation::{exact_permutation_test, PermutationTestResult, Tail, MAX_EXACT_PAIRS};
pub use series::{geometric_series, geometric_series_with_sd, GeometricSeries, BASE_MEAN, BASE_SD, SERIES_LEN};
pub use simulate::{simulate_part1, SimBaseline, SimEvaluation, SimulationConfig, SimulationResult};
pub use sweep::{
    curves_csv, relative_auc_percent, run_sweep, summary_csv, synth_table_csv, BestCell, FoldDiversity, GridCell,
    SweepConfig, SweepResult, SynthRow,
};

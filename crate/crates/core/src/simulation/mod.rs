//! Synthetic data generators, accuracy metrics and the two Monte Carlo
//! experiments (model complexity at known parameters, estimation accuracy),
//! plus a timing benchmark.

mod experiment;
mod generate;
mod metrics;
mod streams;

pub use experiment::{
    run_accuracy_cell, run_accuracy_experiment, run_complexity_cell, run_complexity_experiment,
    run_timing_benchmark, AccuracyCell, AccuracyCellReport, AccuracyConfig, ComplexityCellReport,
    ComplexityConfig, FitRecord, ModelSummary, ReplicateRecord, SimulationReport, TimingRow, VariantSummary,
};
pub use generate::{
    generate_predictor, generate_svc_dataset, generate_svc_skeleton, PredictorGenSpec, SvcGenSpec,
    SyntheticDataset,
};
pub use metrics::{rmse_profile, AccuracyProfile};
pub use streams::{stream, Purpose};

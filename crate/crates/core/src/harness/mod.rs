//! Experiment orchestration: configs, runs, Monte Carlo comparisons and the
//! phase-detection demo.

mod compare;
mod config;
mod demo;
mod run;

pub use compare::{compare_schemes, median_iqr, write_comparison_csv, ComparisonRow, COMPARE_SEEDS};
pub use config::{
    apply_override, default_pointer, BasisSpec, DataMode, ExperimentConfig, PairSpec, StateSpec,
};
pub use demo::{demo_phase_detection, theta_from_imag, PhaseReport, SampledPhase};
pub use run::{
    measure, reconstruct_records, reconstruct_table, run_experiment, run_experiment_with,
    simulate_records, Metrics, ResultBundle, Workers, THREADS_ENV,
};

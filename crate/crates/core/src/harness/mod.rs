//! Experiment harness: configuration, Monte-Carlo sweeps over architectures
//! and SNRs, CSV results and SVG charts.

pub mod config;
pub mod plot;
pub mod sweep;

pub use config::ExperimentConfig;
pub use plot::{render_metric, write_charts};
pub use sweep::{
    channel_rng, estimator_rng, noise_sigma, read_results, rows_to_csv, run_cell, run_sweep, run_trial, thread_pool,
    worker_count, Cell, ResultRow, ResultWriter, CSV_HEADER,
};

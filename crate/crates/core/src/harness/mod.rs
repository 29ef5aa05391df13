//! Experiment orchestration: configuration, Monte-Carlo evaluation and
//! parameter sweeps.

mod artifacts;
mod config;
mod evaluate;
mod sweep;

pub use artifacts::{load_model_file, meta_path, save_model_file};
pub use config::ExperimentConfig;
pub use evaluate::{
    binomial_half_width, evaluate, evaluate_baseline, scenario_codes, suppression_ratio,
    ErrorCounts,
};
pub use sweep::{
    format_sweep_table, significant_baseline_inversions, sweep, write_loss_csv, write_sweep_csv,
    SweepResult, SweepRow, SweepSpec, SweepVariable, SWEEP_CSV_HEADER,
};

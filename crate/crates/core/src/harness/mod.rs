//! Run configuration, the run driver, metrics files and run comparison.
//!
//! A run directory contains:
//!
//! * `config.toml`: the fully resolved config.
//! * `initial_mean.toml`, `final_mean.toml`: parameter tables, one TOML table
//!   per parameter with `value`, `unit` and `kind`.
//! * `metrics.csv`: see [`metrics`] for the columns.
//! * `run_state.json`: round, mean and checkpoint path after the latest round.
//! * `model.ckpt`: the latest SPM or regression weights.
//! * `summary.json`: final errors, first round under 10% error, accuracies.
//! * `frames/`: optional PPM dumps of pseudo-real episodes.
//!
//! Plotting recipe: load `metrics.csv` in any dataframe tool, filter on
//! `param_name`, and plot `percent_error` against `round`.

pub mod compare;
pub mod config;
pub mod metrics;
pub mod run;

pub use compare::{cmd_compare, compare_runs, format_table, CompareRow};
pub use config::RunConfig;
pub use metrics::{read_metrics, strip_timestamps, MetricsRow, CSV_VERSION};
pub use run::{cmd_run, initial_mean, RunState, RunSummary};

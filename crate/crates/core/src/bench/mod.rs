//! Metrics, baselines and the benchmark orchestrator.

mod baselines;
mod config;
mod metrics;
mod report;
mod run;

pub use baselines::{baseline_ellipsoid, baseline_knn, default_knn_k};
pub use config::{ExperimentConfig, Method};
pub use metrics::{estimate_coverage, estimate_var, sample_costs, var_from_samples, var_of_costs, var_rank};
pub use report::{parse_report_csv, render_table, CsvRow, ExperimentReport, MethodFailure, ReportRow, CSV_HEADER};
pub use run::{base_instance, run_experiment, solve_set, BENCH_FW};

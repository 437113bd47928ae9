//! Config-driven experiments: benchmark, sampling-rate sweep and data-size
//! sweep, with JSON-lines results and table reports.

pub mod config;
pub mod registry;
pub mod report;
pub mod results;
pub mod runner;

pub use config::{DataSizeMode, DatasetSource, ExperimentConfig, Ini, DEFAULT_BUDGET_S, FREQUENCY_SWEEP_INTERVALS};
pub use registry::{fit_classifier, ClassifierParams};
pub use report::{average_ranks, mid_ranks, report, report_path, ReportFormat, ReportTable};
pub use results::{read_results, summarize, write_results, GroupKey, RunRecord, RunStatus, Summary};
pub use runner::{
    load_records, run_benchmark, run_benchmark_on, subset_train_pool, sweep_datasize, sweep_datasize_on,
    sweep_frequency, sweep_frequency_on,
};

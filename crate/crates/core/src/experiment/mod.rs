//! Monte-Carlo experiments: the results table (utility loss, fairness and
//! throughput per algorithm), the SSA-likeness percentiles of the MSA
//! optimum, and the cross-module validation suite.

mod config;
mod fig1;
mod runner;
mod validate;

pub use config::{default_algorithms, default_alpha_grid, AlgoSpec, ExperimentConfig};
pub use fig1::{run_fig1_analysis, Fig1Row, Fig1Table, FIG1_PERCENTILES};
pub use runner::{
    mean_ci95, read_records, run_experiment, run_experiment_with, write_csv, CsvHeader,
    ExperimentRecord, RecordDetail, RunOptions, RunOutput, SummaryRow, MSA_ROW,
};
pub use validate::{
    run_validation_suite, CategoryCount, CheckResult, ValidationReport, DEFAULT_SIZES,
    INSTANCES_PER_SIZE,
};

//! Command-line surface and Monte Carlo harness for immortal-time bias
//! experiments.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;

pub use commands::{CliError, Outcome};
pub use config::{parse_experiment, parse_scenario, ConfigError, DesignRun, ExperimentConfig};
pub use experiment::{
    oracle_seed, replicate_seed, run_experiment, DesignSummary, ExperimentError,
    ExperimentReport, TruthLabel,
};
pub use report::{parse_report_csv, render_csv, render_svg, write_report, Format, REPORT_HEADER};

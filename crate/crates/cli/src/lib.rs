//! Experiment driver for FTQC-DGD and the quantized baselines: TOML configs,
//! parallel cell runs, CSV tables and SVG plots.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;

pub use commands::{execute, load, prepare, render, Study};
pub use config::{ConfigError, Experiment, ExperimentConfig, Overrides};
pub use error::{CliError, Result};
pub use experiment::{run_cells, summarize, CellKey, CellRun, SummaryRow};

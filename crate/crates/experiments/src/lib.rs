//! Experiment driver for `mmia`: configuration files, figure presets, ε
//! calibration and sweeps written to CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod config;
pub mod presets;
pub mod runner;

pub use calibrate::{calibrate_epsilon, CalibrationOptions, CalibrationResult, CalibrationStatus};
pub use config::{emit_config, parse_config, ConfigError, ExperimentSpec, Preset};
pub use runner::{run_experiment, write_csv, write_outputs, Row};

//! Configuration-driven experiments.
//!
//! A config is a flat list of `key = value` lines with `#` comments; see
//! [`parse_config`] for the keys. [`run_experiment`] writes one CSV per
//! method or dynamic, a `rates.csv` summary and a `manifest.txt` that is
//! itself a valid config reproducing the run.

mod config;
mod demo;
mod run;

pub use config::{
    load_config, parse_config, ConfigErrors, ConfigIssue, DynamicsKind, ExperimentConfig,
    ExperimentKind, IntegratorChoice, MethodKind, StepChoice,
};
pub use demo::Demo;
pub use run::{initial_point, run_experiment, MethodOutcome, RunSummary, RATES_CSV_HEADER};

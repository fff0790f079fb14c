//! Experiment runner for the multi-level Parareal solvers: a registry of
//! reproducible experiments, their CSV output and expectation checks.

pub mod experiments;
pub mod params;
pub mod table;

pub use experiments::{
    check_experiment, find, registry, run_experiment, write_outputs, CheckLine, Context, ExperimentDef, Output,
    Tolerance,
};
pub use params::{parse_overrides, ConfigFile, Params};
pub use table::{format_float, plot_data, Table, Value, WALL_TIME};

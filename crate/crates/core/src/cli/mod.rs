//! Configuration and the experiment commands behind the `monodomain` binary.

pub mod commands;
pub mod config;

pub use commands::{
    convergence, load_or_build_reference, newton, probe_value, solve, upperbound, CommandOutput,
    REF_CACHE_ENV,
};
pub use config::{parse_config, parse_config_with, RunConfig, OUTPUT_DIR_ENV};

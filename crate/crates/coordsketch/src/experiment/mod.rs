//! Experiment driver: config parsing, protocol dispatch, and result tables
//! for the error-vs-communication and scaling studies.

pub mod config;
mod runner;
mod table;

pub use config::{
    apply_pairs, effective_budget, parse_seed, validate, validate_config, ExperimentConfig,
    Generator, ProtocolKind,
};
pub use runner::{
    build_instance, fsum_truth, generalized_eigen_range, grid_graph, load_graph, run_experiment,
    ExperimentError,
};
pub use table::Table;

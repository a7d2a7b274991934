//! Perturbation experiments around steady states and travelling waves.

mod config;
mod run;

pub use config::{
    field_from_spec, nonlinearity_from_spec, parse_vector, Base, BaseState, DistanceTask,
    ExperimentConfig, Perturbation, SteadySpec,
};
pub use run::{
    config_hash, manifest_path, max_column_gap, perturb, run_stability_experiment, Manifest,
    Perturbed, StabilityTimeSeries,
};

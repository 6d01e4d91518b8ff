//! Experiment harness: configuration, the sweep/table runners and the
//! verification suite behind the `slicelab` binary.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod verify;

pub use config::ExperimentConfig;

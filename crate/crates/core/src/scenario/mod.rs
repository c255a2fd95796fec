//! Scenario layer: configuration, input optimization, sweeps and reports.

pub mod config;
pub mod optimize;
pub mod output;
pub mod sweep;
pub mod validate;

pub use config::{Model, ScenarioConfig};
pub use optimize::{optimize_inputs, Optimum};
pub use sweep::{reference_beam_study, run_mc_saturation, sweep, McReport, ReferenceBeamStudy, SweepResult, SweepRow};
pub use validate::{validate, Check};

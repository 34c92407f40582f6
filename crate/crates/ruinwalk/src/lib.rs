//! Experiment harness around `ruinwalk-core`: a thread-pool executor,
//! experiment specs, bundled presets and flat-file outputs.

pub use ruinwalk_core as core;

pub mod error;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod presets;
pub mod spec;

pub use error::{Error, Result};
pub use experiment::{evaluate, run_experiment, Outcome, Report, Summary};
pub use presets::{list_presets, preset};
pub use spec::{Check, ExperimentSpec, Verdict};

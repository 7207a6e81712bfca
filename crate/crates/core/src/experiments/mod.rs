//! Config-driven runs, drift studies and identity checks behind the CLI.

pub mod config;
pub mod drift;
pub mod identities;
pub mod presets;
pub mod run;
pub mod svg;
pub mod trace;

pub use config::{Experiment, ExperimentConfig};
pub use drift::{drift_study, fit_slope, DriftStudy};
pub use identities::{identities, IdentityReport};
pub use presets::{preset, PRESET_NAMES};
pub use run::{run, simulate, RunArtifacts, RunSummary};

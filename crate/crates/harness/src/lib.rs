//! Datasets, experiment orchestration and CSV output for preferential
//! subsampling SGLD. The numerical core lives in `psgld-core`; this crate
//! adds file IO, configuration and the three experiment families.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod output;

pub use config::{ExperimentConfig, RawConfig};
pub use error::{HarnessError, Result};
pub use experiments::{run_experiment, ExperimentOutput};

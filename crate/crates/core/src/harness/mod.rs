//! Batch front end: configs, grid sweeps, single runs and the invariant suite.

pub mod config;
pub mod single;
pub mod sweep;
pub mod validate;

pub use config::Config;
pub use single::{run_single, run_single_from_config, write_single_outputs, GainStep, HopRecord, SingleReport};
pub use sweep::{run_sweep, write_sweep_outputs, PairErrors, PointRecord, SweepConfig, SweepReport};
pub use validate::{run_validation, Check};

//! Angle-of-attack hopping control for a hip-energized spring-loaded
//! inverted pendulum.
//!
//! The crate has two return maps from apex to apex: a hybrid simulator
//! ([`sim::return_map_numeric`]) and a closed-form approximation built on the
//! linearized stance flow ([`analytic::return_map_analytic`]). Gait fixed
//! points of either, and the closed-form fixed point itself, live in
//! [`fixed_point`]. [`harness`] drives sweeps and single runs from a config.

pub mod analytic;
pub mod controller;
pub mod error;
pub mod fixed_point;
pub mod format;
pub mod harness;
pub mod model;
pub mod sim;

pub use error::{Error, Phase, Result};
pub use fixed_point::{FixedPointResult, Provenance};
pub use model::{ApexState, ControlInputs, FlightState, SlipParams, StanceState};

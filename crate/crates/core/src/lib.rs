//! Deterministic point-queue simulation of signalised grid networks with
//! max-pressure signal control, perimeter gating and temporary holding of
//! connected automated vehicles at roadside parking.
//!
//! The usual entry point is a [`Scenario`], loaded from TOML or built in
//! code, run through [`runner::run_scenario`] or stepped by hand through a
//! [`Simulation`].

// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod demand;
pub mod error;
pub mod holding;
pub mod metrics;
pub mod rng;
pub mod routing;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod units;
pub mod vehicle;

pub use control::{ControllerKind, ControllerSpec, SignalController};
pub use demand::{DemandPattern, DemandSpec};
pub use error::{Error, Result};
pub use holding::HoldingParams;
pub use metrics::{AuditConfig, DelayRecord, MetricsFrame, StabilityVerdict};
pub use scenario::Scenario;
pub use sim::{RunOutput, SimConfig, Simulation, StepReport};
pub use topology::{Capacity, Centroid, GridSpec, Network, Street};
pub use vehicle::VehicleClass;

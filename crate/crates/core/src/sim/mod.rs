//! Deterministic discrete-event simulation of a vehicle population.
//!
//! Events are ordered by `(time, kind, vehicle, sequence)`, all randomness is
//! derived from the scenario seed, and every run yields a [`RunTrace`] plus
//! an [`ObservationLog`] recording what a global passive observer would see
//! in each slot.

mod engine;
pub mod invariants;
pub mod mobility;
mod scenario;
pub mod trace;

pub use engine::{assign_classes, run, RunError, RunOutput};
pub use scenario::{
    ExhaustedSpec, MobilityConfig, Preload, Revocation, Scenario, ScenarioError, Scheme,
};
pub use trace::{
    ObservationLog, RunStats, RunTrace, SlotRecord, TraceEvent, VehicleClass, VehicleRecord,
};

//! Deterministic soft-PLC runtime and batch-plant simulator.
//!
//! The crate models a four-silo liqueur plant controlled by a scan-cycle
//! executor in the IEC 61131 style: every function-block instance carries a
//! unique priority and is invoked once per scan against a single sensor
//! snapshot, actuator commands are applied as an output image, and the plant
//! advances one discrete time step per scan. Two batch recipes run in
//! parallel and synchronize on two shared resources (the transfer pipe and
//! the mixer power budget).
//!
//! Modules:
//! * [`plant`] — discrete-time physics of the silos, valves, heaters and
//!   mixers, generic over the scalar type.
//! * [`statechart`] — flat run-to-completion state machine engine used by
//!   every controller.
//! * [`bus`] — message routing between component endpoints, with
//!   whole-scan latency for distributed deployments.
//! * [`runtime`] — the priority-ordered scan executor and trace collection.
//! * [`components`] — silo drivers and controllers, resource arbiters,
//!   the two recipe controllers, and the DFB/OFB comparison variant.
//! * [`scenario`] — scenario configuration, assembly and execution.
//! * [`trace`] — the line-oriented trace file format.
//! * [`check`] — trace verification and comparison.

pub mod bus;
pub mod check;
pub mod components;
pub mod plant;
pub mod runtime;
pub mod scenario;
pub mod statechart;
pub mod trace;

/// Scalar type used by the shipped simulator. The plant physics are generic
/// over `num_traits::Float`; everything downstream works in `f64`.
pub type Scalar = f64;

pub type Plant = plant::Plant<Scalar>;
pub type PlantConfig = plant::PlantConfig<Scalar>;
pub type SiloState = plant::SiloState<Scalar>;
pub type SensorReadings = plant::SensorReadings<Scalar>;

pub use plant::{Actuator, PlantFault, PlantFaultKind, Route, SiloId};

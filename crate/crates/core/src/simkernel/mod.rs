//! Deterministic discrete-event kernel and shared-medium channel model.
//!
//! One [`EventQueue`] drives one simulation on one thread. Events are
//! totally ordered by `(at, seq)`; the clock never moves backwards.
//! The [`Channel`] tracks what is on air and flags any two transmissions
//! that overlap in time inside a shared collision domain; collided frames
//! are lost for every receiver in that domain (no capture effect).

mod channel;
mod queue;
mod service;

pub use channel::{deliver_blocks, detect_collisions, BlockErrorModel, Channel, EndedTx, PhyConfig, Transmission};
pub use queue::{Event, EventKind, EventQueue, ScheduleError, SimTime, TraceDetail};
pub use service::{DistributionError, ServiceTimeDistribution};

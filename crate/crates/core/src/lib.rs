//! Simulation and protocol library for link-quality-aware bulk data
//! dissemination in multi-hop wireless networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: nodes, the rank-annotated dissemination tree, collision
//!   domains and time-varying link-quality traces.
//! - [`simkernel`]: the deterministic event queue and the shared-medium
//!   channel model.
//! - [`mac`]: traditional CSMA and link-quality-aware CSMA backoff.
//! - [`rateless`]: LT-style fountain encoder/decoder with per-block CRC.
//! - [`protocols`]: DRP, EDRP, Rateless Deluge and MNP state machines.
//! - [`mlbss`]: cost-sensitive ordinal decision trees for block-size
//!   selection (greedy CART and TAO refinement).
//! - [`analytics`]: closed-form collision and goodput models plus the
//!   empirical metrics emitted by experiment campaigns.
//! - [`campaign`]: run configuration and seeded multi-round campaigns.

pub mod analytics;
pub mod campaign;
pub mod mac;
pub mod mlbss;
pub mod protocols;
pub mod rateless;
pub mod rng;
pub mod simkernel;
pub mod topology;

pub use topology::{Network, NodeId};

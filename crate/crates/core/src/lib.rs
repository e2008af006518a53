//! HAVEN: a three-tier security pipeline for autonomous-vehicle fleets.
//!
//! * [`sensors`]: seeded synthetic feature streams, attack injection, windows.
//! * [`edge`]: per-vehicle ensemble anomaly detection (tier 1).
//! * [`federated`]: trimmed-mean federated learning with Laplace privacy (tier 2).
//! * [`chain`]: selective event logging, hash-chained ledger, PBFT (tier 3).
//! * [`netsim`]: the deterministic discrete-event engine binding the tiers.
//! * [`harness`]: scenario configuration, orchestration, metrics, acceptance.

// Validation reads `!(x > 0.0)` so that NaN is rejected along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod edge;
pub mod federated;
pub mod harness;
mod hexbytes;
pub mod ids;
pub mod math;
pub mod netsim;
pub mod scalar;
pub mod seed;
pub mod sensors;

pub use ids::{NodeId, RegionId, VehicleId};
pub use scalar::Real;

/// Ensemble weights in the simulator's precision.
pub type EnsembleWeights = edge::EnsembleWeights<f64>;
pub type EnsembleWeightsF32 = edge::EnsembleWeights<f32>;

pub type GlobalModel = federated::GlobalModel<f64>;
pub type GlobalModelF32 = federated::GlobalModel<f32>;
pub type ClientUpdate = federated::ClientUpdate<f64>;
pub type ClientUpdateF32 = federated::ClientUpdate<f32>;

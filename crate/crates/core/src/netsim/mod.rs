//! Deterministic discrete-event engine shared by all three tiers.
//!
//! Events are dispatched in `(fire_at_ms, sequence)` order from a single
//! queue; sequence numbers are assigned at scheduling time, so the order is
//! a pure function of the calls made, never of host scheduling.

mod channel;
mod engine;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NodeId, RegionId, VehicleId};

pub use channel::{ChannelModel, JamWindow, Tier};
pub use engine::{Delivery, Engine, EventId, EventKind, NetCounters, SimEvent, TraceRecord};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("negative delay {0} ms")]
    NegativeDelay(i64),
    #[error("cannot run to {target} ms: clock already at {now} ms")]
    TimeInPast { now: u64, target: u64 },
    #[error("jamming requires a CommJam scenario, got {0}")]
    NotCommJam(crate::sensors::AttackKind),
    #[error("invalid channel model: {0}")]
    InvalidChannel(&'static str),
    #[error("invalid jam window: {0}")]
    InvalidJam(&'static str),
}

/// Message endpoint, used for routing and the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    Vehicle(VehicleId),
    Coordinator(RegionId),
    Global,
    Validator(NodeId),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Vehicle(v) => write!(f, "{v}"),
            Endpoint::Coordinator(r) => write!(f, "coord-{r}"),
            Endpoint::Global => f.write_str("global"),
            Endpoint::Validator(n) => write!(f, "{n}"),
        }
    }
}

/// A regional cluster and its coordinator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub region_id: RegionId,
    pub vehicle_ids: BTreeSet<VehicleId>,
}

/// Maps a vehicle to the region it belongs to.
pub trait RegionLookup {
    fn region_of(&self, vehicle: VehicleId) -> Option<RegionId>;
}

impl RegionLookup for [Region] {
    fn region_of(&self, vehicle: VehicleId) -> Option<RegionId> {
        self.iter()
            .find(|r| r.vehicle_ids.contains(&vehicle))
            .map(|r| r.region_id)
    }
}

/// Vehicle `i` joins region `i mod n_regions`.
pub fn assign_regions(n_vehicles: usize, n_regions: usize) -> Vec<Region> {
    let mut regions: Vec<Region> = (0..n_regions)
        .map(|r| Region {
            region_id: RegionId(r as u32),
            vehicle_ids: BTreeSet::new(),
        })
        .collect();
    if n_regions > 0 {
        for v in 0..n_vehicles {
            regions[v % n_regions]
                .vehicle_ids
                .insert(VehicleId(v as u32));
        }
    }
    regions
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_vehicle_in_exactly_one_region() {
        let regions = assign_regions(103, 4);
        let all: Vec<VehicleId> = regions
            .iter()
            .flat_map(|r| r.vehicle_ids.iter().copied())
            .collect();
        assert_eq!(all.len(), 103);
        assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), 103);
        assert_eq!(regions[3].vehicle_ids.len(), 25);
    }
}

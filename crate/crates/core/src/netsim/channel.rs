use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetError;
use crate::ids::RegionId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    EdgeLocal,
    RegionalV2X,
    GlobalWAN,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::EdgeLocal => "edge_local",
            Tier::RegionalV2X => "regional_v2x",
            Tier::GlobalWAN => "global_wan",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub tier: Tier,
    pub base_latency_ms: f64,
    /// Latency is `base · (1 + U(−j, j))`.
    pub jitter_fraction: f64,
    pub loss_probability: f64,
}

impl ChannelModel {
    /// 5 ms on-vehicle, 100 ms vehicle-to-coordinator, 200 ms wide area,
    /// each with ±10% jitter and no loss. The federated-update budget of
    /// 200 ms is checked against the regional channel, whose nominal value
    /// is 100 ms.
    pub fn for_tier(tier: Tier) -> Self {
        let base_latency_ms = match tier {
            Tier::EdgeLocal => 5.0,
            Tier::RegionalV2X => 100.0,
            Tier::GlobalWAN => 200.0,
        };
        ChannelModel {
            tier,
            base_latency_ms,
            jitter_fraction: 0.1,
            loss_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.base_latency_ms >= 0.0 && self.base_latency_ms.is_finite()) {
            return Err(NetError::InvalidChannel(
                "base latency must be finite and non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.jitter_fraction) {
            return Err(NetError::InvalidChannel("jitter fraction outside [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.loss_probability) {
            return Err(NetError::InvalidChannel("loss probability outside [0, 1)"));
        }
        Ok(())
    }

    pub(crate) fn sample_latency<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.jitter_fraction == 0.0 {
            return self.base_latency_ms;
        }
        let u: f64 = rng.random_range(-1.0..=1.0);
        (self.base_latency_ms * (1.0 + u * self.jitter_fraction)).max(0.0)
    }
}

/// Extra loss and delay on one tier, optionally restricted to a region,
/// during `[start_ms, end_ms)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JamWindow {
    pub tier: Tier,
    pub region: Option<RegionId>,
    pub start_ms: u64,
    pub end_ms: u64,
    pub loss_boost: f64,
    pub delay_boost_ms: f64,
}

impl JamWindow {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.start_ms >= self.end_ms {
            return Err(NetError::InvalidJam("start must precede end"));
        }
        if !(0.0..=1.0).contains(&self.loss_boost) {
            return Err(NetError::InvalidJam("loss boost outside [0, 1]"));
        }
        if !(self.delay_boost_ms >= 0.0 && self.delay_boost_ms.is_finite()) {
            return Err(NetError::InvalidJam(
                "delay boost must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn affects(&self, tier: Tier, region: Option<RegionId>, at_ms: u64) -> bool {
        self.tier == tier
            && at_ms >= self.start_ms
            && at_ms < self.end_ms
            && (self.region.is_none() || self.region == region)
    }
}

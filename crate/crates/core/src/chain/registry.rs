use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::Block;
use crate::edge::{ThreatClass, ThreatLevel, ThreatSignature};
use crate::ids::RegionId;

/// Sliding-window count of distinct regions reporting the same coarse
/// threat pattern.
#[derive(Clone, Debug, Default)]
pub struct CrossRegionalTracker {
    window_ms: i64,
    sightings: BTreeMap<[u8; 8], VecDeque<(i64, RegionId)>>,
}

impl CrossRegionalTracker {
    pub fn new(window_ms: i64) -> Self {
        CrossRegionalTracker {
            window_ms,
            sightings: BTreeMap::new(),
        }
    }

    /// Records a sighting and returns the number of distinct regions that
    /// reported the pattern within the last `window_ms` (inclusive).
    pub fn track(&mut self, signature: &ThreatSignature, region: RegionId, now_ms: i64) -> u32 {
        let q = self.sightings.entry(signature.pattern_key()).or_default();
        while q.front().is_some_and(|&(t, _)| now_ms - t > self.window_ms) {
            q.pop_front();
        }
        q.push_back((now_ms, region));
        q.iter().map(|&(_, r)| r).collect::<BTreeSet<_>>().len() as u32
    }

    /// Drops patterns with no sighting inside the window.
    pub fn evict(&mut self, now_ms: i64) {
        let w = self.window_ms;
        self.sightings.retain(|_, q| {
            while q.front().is_some_and(|&(t, _)| now_ms - t > w) {
                q.pop_front();
            }
            !q.is_empty()
        });
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    RegionWideAlert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationDirective {
    pub directive: Directive,
    pub region_id: RegionId,
    pub attack_class: ThreatClass,
    #[serde(with = "crate::hexbytes")]
    pub signature_digest: [u8; 32],
    #[serde(with = "crate::hexbytes")]
    pub block_hash: [u8; 32],
}

/// Rule engine applied to committed blocks.
#[derive(Clone, Debug, Default)]
pub struct ThreatRegistry {
    applied: BTreeSet<[u8; 32]>,
    pub directives: Vec<MitigationDirective>,
}

impl ThreatRegistry {
    pub fn applied_blocks(&self) -> usize {
        self.applied.len()
    }
}

/// Emits a region-wide alert for every High transaction of a block not
/// applied before; re-applying a block yields nothing.
pub fn registry_apply(registry: &mut ThreatRegistry, block: &Block) -> Vec<MitigationDirective> {
    if !registry.applied.insert(block.block_hash) {
        return Vec::new();
    }
    let new: Vec<MitigationDirective> = block
        .transactions
        .iter()
        .filter(|tx| tx.signature.threat_level == ThreatLevel::High)
        .map(|tx| MitigationDirective {
            directive: Directive::RegionWideAlert,
            region_id: tx.signature.region_id,
            attack_class: tx.signature.attack_class,
            signature_digest: tx.signature.digest,
            block_hash: block.block_hash,
        })
        .collect();
    registry.directives.extend(new.iter().cloned());
    new
}

#[cfg(test)]
mod tests {
    use super::super::testing::event;
    use super::super::{assemble_block, ThreatEvent};
    use super::*;
    use crate::ids::NodeId;

    #[test]
    fn distinct_regions_within_window() {
        let sig = event(0.9, 0, 0.0, 0).signature;
        let mut t = CrossRegionalTracker::new(60_000);
        assert_eq!(t.track(&sig, RegionId(0), 0), 1);
        assert_eq!(t.track(&sig, RegionId(0), 10), 1);
        for r in 1..4 {
            t.track(&sig, RegionId(r), 100 * r as i64);
        }
        assert_eq!(t.track(&sig, RegionId(3), 500), 4);

        let mut t = CrossRegionalTracker::new(60_000);
        let counts: Vec<u32> = (0..4)
            .map(|r| t.track(&sig, RegionId(r), 61_000 * r as i64))
            .collect();
        assert_eq!(counts, vec![1, 1, 1, 1]);
    }

    #[test]
    fn sliding_window_matches_rescan_oracle() {
        use rand::Rng;
        let rng = &mut crate::seed::rng(9, &[]);
        let sig = event(0.9, 0, 0.0, 0).signature;
        let mut t = CrossRegionalTracker::new(5_000);
        let mut history: Vec<(i64, RegionId)> = Vec::new();
        let mut now = 0;
        for _ in 0..2000 {
            now += rng.random_range(0..1500);
            let r = RegionId(rng.random_range(0..6));
            history.push((now, r));
            let oracle = history
                .iter()
                .filter(|(ts, _)| now - ts <= 5_000)
                .map(|(_, r)| *r)
                .collect::<BTreeSet<_>>()
                .len() as u32;
            assert_eq!(t.track(&sig, r, now), oracle);
        }
    }

    #[test]
    fn patterns_are_kept_apart() {
        let a = event(0.9, 0, 0.0, 0).signature;
        let mut b = a.clone();
        b.attack_class = ThreatClass::Unknown;
        let mut t = CrossRegionalTracker::new(60_000);
        t.track(&a, RegionId(0), 0);
        assert_eq!(t.track(&b, RegionId(1), 0), 1);
    }

    fn block(sevs: &[f64]) -> crate::chain::Block {
        let mut pending: Vec<ThreatEvent> = sevs
            .iter()
            .enumerate()
            .map(|(i, &s)| event(s, 0, 0.0, i as i64))
            .collect();
        assemble_block(&mut pending, None, NodeId(0), 0, 10).unwrap()
    }

    #[test]
    fn directives_for_high_only_and_idempotent() {
        let mut reg = ThreatRegistry::default();
        assert_eq!(registry_apply(&mut reg, &block(&[0.9, 0.95])).len(), 2);
        let mixed = block(&[0.9, 0.5, 0.75, 0.86]);
        let d = registry_apply(&mut reg, &mixed);
        assert_eq!(d.len(), 2);
        assert!(registry_apply(&mut reg, &mixed).is_empty());
        assert_eq!(reg.directives.len(), 4);
        assert_eq!(reg.applied_blocks(), 2);
    }
}

//! Tier 3: selective logging onto a hash-chained, PBFT-replicated ledger.

mod block;
mod pbft;
mod registry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edge::ThreatSignature;

pub use block::{
    assemble_block, block_hash, export_ledger_jsonl, genesis_prev_hash, read_ledger_jsonl,
    transaction_digest, verify_chain, write_ledger_jsonl, Block,
};
pub use pbft::{
    pbft_consensus, pbft_round, quorum, ConsensusOutcome, ConsensusTiming, FaultConfig, FaultMode,
    LinkModel, Phase, RoundOutcome, UniformLink, ValidatorState, VoteLog,
};
pub use registry::{
    registry_apply, CrossRegionalTracker, Directive, MitigationDirective, ThreatRegistry,
};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("no pending events to assemble")]
    EmptyPending,
    #[error("batch size must be positive")]
    ZeroBatch,
    #[error("validator set is empty")]
    NoValidators,
    #[error("total event count is zero")]
    ZeroTotal,
    #[error("logged count {logged} exceeds total {total}")]
    LoggedExceedsTotal { logged: u64, total: u64 },
    #[error("invalid filter configuration: {0}")]
    InvalidFilter(&'static str),
    #[error("ledger line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A tier-1 detection as seen by the global tier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreatEvent {
    pub signature: ThreatSignature,
    pub severity: f64,
    /// Distinct regions that reported a matching pattern within the window.
    pub cross_regional_frequency: u32,
    pub consensus_confidence: f64,
    pub observed_at_ms: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub severity_threshold: f64,
    pub frequency_threshold: u32,
    pub confidence_threshold: f64,
    pub frequency_window_ms: i64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            severity_threshold: 0.85,
            frequency_threshold: 3,
            confidence_threshold: 0.9,
            frequency_window_ms: 60_000,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), ChainError> {
        if !(0.0..=1.0).contains(&self.severity_threshold) {
            return Err(ChainError::InvalidFilter(
                "severity_threshold outside [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(ChainError::InvalidFilter(
                "confidence_threshold outside [0, 1]",
            ));
        }
        if self.frequency_window_ms <= 0 {
            return Err(ChainError::InvalidFilter(
                "frequency_window_ms must be positive",
            ));
        }
        Ok(())
    }
}

/// An event is logged when any one of severity, cross-regional frequency or
/// consensus confidence strictly exceeds its threshold.
pub fn should_log(event: &ThreatEvent, cfg: &FilterConfig) -> bool {
    event.severity > cfg.severity_threshold
        || event.cross_regional_frequency > cfg.frequency_threshold
        || event.consensus_confidence > cfg.confidence_threshold
}

/// Logged fraction φ.
pub fn storage_stats(total_events: u64, logged_events: u64) -> Result<f64, ChainError> {
    if total_events == 0 {
        return Err(ChainError::ZeroTotal);
    }
    if logged_events > total_events {
        return Err(ChainError::LoggedExceedsTotal {
            logged: logged_events,
            total: total_events,
        });
    }
    Ok(logged_events as f64 / total_events as f64)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::edge::{ThreatClass, ThreatLevel};
    use crate::ids::{RegionId, VehicleId};
    use crate::sensors::AttackKind;

    pub fn event(severity: f64, freq: u32, conf: f64, t: i64) -> ThreatEvent {
        ThreatEvent {
            signature: ThreatSignature {
                digest: [t as u8; 32],
                severity,
                threat_level: ThreatLevel::from_severity(severity),
                attack_class: ThreatClass::Attack(AttackKind::GpsSpoof),
                vehicle_id: VehicleId(t as u32),
                region_id: RegionId(0),
                timestamp_ms: t,
            },
            severity,
            cross_regional_frequency: freq,
            consensus_confidence: conf,
            observed_at_ms: t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::event;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn filter_clauses() {
        let cfg = FilterConfig::default();
        assert!(should_log(&event(0.9, 0, 0.0, 0), &cfg));
        assert!(!should_log(&event(0.85, 3, 0.9, 0), &cfg));
        assert!(should_log(&event(0.0, 4, 0.0, 0), &cfg));
        assert!(should_log(&event(0.0, 0, 0.91, 0), &cfg));
    }

    #[test]
    fn logged_fraction() {
        assert_eq!(storage_stats(1000, 50).unwrap(), 0.05);
        assert_eq!(storage_stats(10, 0).unwrap(), 0.0);
        assert!(matches!(storage_stats(0, 0), Err(ChainError::ZeroTotal)));
        assert!(matches!(
            storage_stats(3, 4),
            Err(ChainError::LoggedExceedsTotal { .. })
        ));
    }

    proptest! {
        #[test]
        fn predicate_matches_clause_oracle(sev in 0.0f64..1.0, freq in 0u32..8, conf in 0.0f64..1.0,
                                           st in 0.0f64..1.0, ft in 0u32..8, ct in 0.0f64..1.0) {
            let cfg = FilterConfig { severity_threshold: st, frequency_threshold: ft, confidence_threshold: ct, ..Default::default() };
            let mut clauses = 0;
            if sev > st { clauses += 1; }
            if freq > ft { clauses += 1; }
            if conf > ct { clauses += 1; }
            prop_assert_eq!(should_log(&event(sev, freq, conf, 0), &cfg), clauses > 0);
        }
    }
}

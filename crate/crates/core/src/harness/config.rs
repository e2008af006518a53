use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::FilterConfig;
use crate::edge::DetectorConfig;
use crate::federated::{Aggregation, ByzantineBehavior, ByzantineKind};
use crate::netsim::{ChannelModel, Tier};
use crate::sensors::{AttackKind, AttackMagnitudes, CorpusSpec, DriveProfile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// How attack campaigns are laid over the timeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// Fraction of the simulated timeline covered by campaigns.
    pub coverage: f64,
    /// Campaign length; campaigns start on multiples of this length.
    pub duration_s: f64,
    /// Fraction of the fleet targeted by each campaign.
    pub target_fraction: f64,
    pub intensity: (f64, f64),
    /// Relative frequency of each kind among campaigns.
    pub attack_mix: BTreeMap<AttackKind, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederatedSettings {
    pub round_interval_s: f64,
    /// Collection deadline as a fraction of the round interval.
    pub deadline_fraction: f64,
    pub trim_ratio: f64,
    pub learning_rate: f64,
    pub aggregation: Aggregation,
    pub weighted: bool,
    pub byzantine_ratio: f64,
    pub byzantine_behavior: ByzantineBehavior,
    pub epsilon: f64,
    pub delta_fail: f64,
    /// Training windows held by each vehicle.
    pub local_samples: usize,
    pub l2: f64,
    /// Missing-update monitor fires below this fraction of the region.
    pub quorum_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSettings {
    pub edge_local: ChannelModel,
    pub regional_v2x: ChannelModel,
    pub global_wan: ChannelModel,
    pub jam_loss_boost: f64,
    pub jam_delay_boost_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorSettings {
    pub count: usize,
    pub crashed: usize,
    pub byzantine: usize,
    pub equivocate: bool,
    pub batch_size: usize,
    pub flush_interval_s: f64,
    pub view_change_timeout_ms: f64,
}

/// Complete description of one simulated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_vehicles: usize,
    pub n_regions: usize,
    pub duration_s: f64,
    pub window_len: usize,
    pub campaigns: CampaignConfig,
    pub detector: DetectorConfig,
    pub filter: FilterConfig,
    pub federated: FederatedSettings,
    pub channels: ChannelSettings,
    pub validators: ValidatorSettings,
    pub corpus: CorpusSpec,
    /// Profile of the bootstrap drives the detector is trained on.
    pub profile: DriveProfile,
    /// Spread of the deployed fleet's sensors relative to `profile`.
    pub fleet_noise_scale: f64,
    pub magnitudes: AttackMagnitudes,
    /// Tier-1 response budget; windows above it are counted, not failed.
    pub tau_max_ms: f64,
    /// Accuracy floor; a lower accuracy is flagged in the report.
    pub alpha_min: f64,
    /// Time allowed after the horizon for in-flight messages and consensus.
    pub drain_s: f64,
}

impl ScenarioConfig {
    /// 100 vehicles in 4 regions for 20 simulated seconds, with campaigns
    /// over a fifth of the timeline.
    pub fn reference() -> Self {
        ScenarioConfig {
            seed: 2024,
            n_vehicles: 100,
            n_regions: 4,
            duration_s: 20.0,
            window_len: 50,
            campaigns: CampaignConfig {
                coverage: 0.2,
                duration_s: 0.5,
                target_fraction: 0.35,
                intensity: (0.4, 1.0),
                attack_mix: AttackKind::ALL.iter().map(|&k| (k, 1.0 / 7.0)).collect(),
            },
            detector: DetectorConfig::default(),
            filter: FilterConfig::default(),
            federated: FederatedSettings {
                round_interval_s: 0.5,
                deadline_fraction: 0.8,
                trim_ratio: 0.3,
                learning_rate: 0.5,
                aggregation: Aggregation::TrimmedMean,
                weighted: false,
                byzantine_ratio: 0.2,
                byzantine_behavior: ByzantineBehavior {
                    kind: ByzantineKind::SignFlip,
                    magnitude: 10.0,
                },
                epsilon: 1.0,
                delta_fail: 1e-5,
                local_samples: 24,
                l2: 1e-3,
                quorum_fraction: 2.0 / 3.0,
            },
            channels: ChannelSettings {
                edge_local: ChannelModel::for_tier(Tier::EdgeLocal),
                regional_v2x: ChannelModel::for_tier(Tier::RegionalV2X),
                global_wan: ChannelModel::for_tier(Tier::GlobalWAN),
                jam_loss_boost: 0.9,
                jam_delay_boost_ms: 50.0,
            },
            validators: ValidatorSettings {
                count: 10,
                crashed: 0,
                byzantine: 0,
                equivocate: true,
                batch_size: 5,
                flush_interval_s: 2.0,
                view_change_timeout_ms: 2_000.0,
            },
            corpus: CorpusSpec {
                episodes: 150,
                ..CorpusSpec::default()
            },
            profile: DriveProfile::default(),
            fleet_noise_scale: 1.0,
            magnitudes: AttackMagnitudes::default(),
            tau_max_ms: 10.0,
            alpha_min: 0.94,
            drain_s: 5.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn fleet_profile(&self) -> DriveProfile {
        self.profile.scaled_noise(self.fleet_noise_scale)
    }

    pub fn duration_ms(&self) -> i64 {
        (self.duration_s * 1000.0).round() as i64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(100..=1000).contains(&self.n_vehicles) {
            return Err(invalid(
                "n_vehicles",
                format!("{} outside [100, 1000]", self.n_vehicles),
            ));
        }
        if self.n_regions == 0 || self.n_regions > self.n_vehicles {
            return Err(invalid("n_regions", "must be between 1 and n_vehicles"));
        }
        if self.window_len == 0 {
            return Err(invalid("window_len", "must be positive"));
        }
        let period = self.profile.sample_period_ms;
        if period <= 0 {
            return Err(invalid("profile.sample_period_ms", "must be positive"));
        }
        let window_ms = period * self.window_len as i64;
        let dur = self.duration_ms();
        if !(self.duration_s > 0.0) || dur < window_ms || dur % period != 0 {
            return Err(invalid(
                "duration_s",
                "must be positive, a multiple of the sample period, and hold one window",
            ));
        }

        let c = &self.campaigns;
        if !(0.0..=1.0).contains(&c.coverage) {
            return Err(invalid("campaigns.coverage", "outside [0, 1]"));
        }
        let camp_ms = (c.duration_s * 1000.0).round() as i64;
        if camp_ms <= 0 || camp_ms % window_ms != 0 {
            return Err(invalid(
                "campaigns.duration_s",
                format!("must be a positive multiple of the {window_ms} ms window"),
            ));
        }
        if !(c.target_fraction > 0.0 && c.target_fraction <= 1.0) {
            return Err(invalid("campaigns.target_fraction", "outside (0, 1]"));
        }
        let (lo, hi) = c.intensity;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(invalid("campaigns.intensity", "need 0 < lo <= hi <= 1"));
        }
        if c.attack_mix.values().any(|&f| !(f >= 0.0 && f.is_finite())) {
            return Err(invalid(
                "campaigns.attack_mix",
                "fractions must be non-negative",
            ));
        }
        let total: f64 = c.attack_mix.values().sum();
        if c.coverage > 0.0 && (total - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "campaigns.attack_mix",
                format!("fractions sum to {total}, expected 1"),
            ));
        }

        self.detector
            .validate()
            .map_err(|e| invalid("detector", e.to_string()))?;
        self.filter
            .validate()
            .map_err(|e| invalid("filter", e.to_string()))?;

        let f = &self.federated;
        if !(f.round_interval_s > 0.0) {
            return Err(invalid("federated.round_interval_s", "must be positive"));
        }
        if !(f.deadline_fraction > 0.0 && f.deadline_fraction <= 1.0) {
            return Err(invalid("federated.deadline_fraction", "outside (0, 1]"));
        }
        if !(0.0..0.5).contains(&f.trim_ratio) {
            return Err(invalid("federated.trim_ratio", "outside [0, 0.5)"));
        }
        if !(0.0..=0.3).contains(&f.byzantine_ratio) {
            return Err(invalid("federated.byzantine_ratio", "outside [0, 0.3]"));
        }
        if f.aggregation == Aggregation::TrimmedMean && f.byzantine_ratio > f.trim_ratio {
            return Err(invalid(
                "federated.byzantine_ratio",
                "exceeds trim capacity (trim_ratio)",
            ));
        }
        if !(f.byzantine_behavior.magnitude > 0.0 && f.byzantine_behavior.magnitude.is_finite()) {
            return Err(invalid(
                "federated.byzantine_behavior.magnitude",
                "must be positive and finite",
            ));
        }
        if !(f.learning_rate > 0.0) {
            return Err(invalid("federated.learning_rate", "must be positive"));
        }
        if !(f.epsilon > 0.0) {
            return Err(invalid("federated.epsilon", "must be positive"));
        }
        if !(f.delta_fail > 0.0 && f.delta_fail < 1.0) {
            return Err(invalid("federated.delta_fail", "outside (0, 1)"));
        }
        if f.local_samples == 0 {
            return Err(invalid("federated.local_samples", "must be positive"));
        }
        if !(0.0..=1.0).contains(&f.quorum_fraction) {
            return Err(invalid("federated.quorum_fraction", "outside [0, 1]"));
        }

        let ch = &self.channels;
        for (name, model, tier) in [
            ("channels.edge_local", &ch.edge_local, Tier::EdgeLocal),
            ("channels.regional_v2x", &ch.regional_v2x, Tier::RegionalV2X),
            ("channels.global_wan", &ch.global_wan, Tier::GlobalWAN),
        ] {
            model.validate().map_err(|e| invalid(name, e.to_string()))?;
            if model.tier != tier {
                return Err(invalid(name, format!("tier must be {tier}")));
            }
        }
        if !(0.0..=1.0).contains(&ch.jam_loss_boost) || !(ch.jam_delay_boost_ms >= 0.0) {
            return Err(invalid(
                "channels.jam_loss_boost",
                "loss boost outside [0, 1] or negative delay",
            ));
        }

        let v = &self.validators;
        if v.count == 0 {
            return Err(invalid("validators.count", "must be positive"));
        }
        let tolerance = (v.count - 1) / 3;
        if v.crashed + v.byzantine > tolerance {
            return Err(invalid(
                "validators.crashed",
                format!(
                    "{} faulty validators exceed the tolerance f = {tolerance}",
                    v.crashed + v.byzantine
                ),
            ));
        }
        if v.batch_size == 0 {
            return Err(invalid("validators.batch_size", "must be positive"));
        }
        if !(v.flush_interval_s > 0.0) {
            return Err(invalid("validators.flush_interval_s", "must be positive"));
        }
        if !(self.fleet_noise_scale > 0.0 && self.fleet_noise_scale.is_finite()) {
            return Err(invalid("fleet_noise_scale", "must be positive and finite"));
        }
        if self.corpus.episodes == 0 || self.corpus.window_len != self.window_len {
            return Err(invalid(
                "corpus",
                "needs episodes and the scenario window length",
            ));
        }
        if !(self.tau_max_ms > 0.0) {
            return Err(invalid("tau_max_ms", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha_min) {
            return Err(invalid("alpha_min", "outside [0, 1]"));
        }
        if !(self.drain_s >= 0.0) {
            return Err(invalid("drain_s", "must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid_and_roundtrips() {
        let cfg = ScenarioConfig::reference();
        cfg.validate().unwrap();
        let back = ScenarioConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value =
            serde_json::from_str(&ScenarioConfig::reference().to_json_pretty()).unwrap();
        v["federated"]["bogus"] = 1.into();
        assert!(matches!(
            ScenarioConfig::from_json(&v.to_string()),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn field_specific_errors() {
        let check = |f: fn(&mut ScenarioConfig), field: &str| {
            let mut c = ScenarioConfig::reference();
            f(&mut c);
            match c.validate() {
                Err(ConfigError::Invalid { field: got, .. }) => assert_eq!(got, field),
                other => panic!("expected error on {field}, got {other:?}"),
            }
        };
        check(|c| c.n_vehicles = 50, "n_vehicles");
        check(
            |c| {
                c.campaigns.attack_mix.insert(AttackKind::GpsSpoof, 0.5);
            },
            "campaigns.attack_mix",
        );
        check(
            |c| c.federated.byzantine_ratio = 0.35,
            "federated.byzantine_ratio",
        );
        check(
            |c| c.federated.trim_ratio = 0.1,
            "federated.byzantine_ratio",
        );
        check(|c| c.validators.crashed = 4, "validators.crashed");
        check(|c| c.campaigns.duration_s = 0.3, "campaigns.duration_s");
        check(|c| c.detector.theta2 = 1.5, "detector");
    }
}

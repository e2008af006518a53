use serde::{Deserialize, Serialize};

use super::features::{summary_group, FeatureGroup, WindowFeatures, SUMMARY_DIM};
use super::ThreatClass;
use crate::math::Standardizer;
use crate::sensors::AttackKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Minimum |z| a group must reach to be attributed.
    pub min_deviation: f64,
    /// The leading group must exceed the runner-up by this factor.
    pub dominance_ratio: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            min_deviation: 4.0,
            dominance_ratio: 1.5,
        }
    }
}

/// Clean-traffic statistics of the window summary, against which a flagged
/// window's per-group deviation is measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationBaseline {
    norm: Standardizer,
}

const GROUPS: [(FeatureGroup, AttackKind); 5] = [
    (FeatureGroup::Position, AttackKind::GpsSpoof),
    (FeatureGroup::Lidar, AttackKind::LidarSpoof),
    (FeatureGroup::Camera, AttackKind::CameraPatch),
    (FeatureGroup::Orientation, AttackKind::ImuManip),
    (FeatureGroup::Actuator, AttackKind::ActuatorCompromise),
];

impl DeviationBaseline {
    pub fn fit<'a>(clean: impl IntoIterator<Item = &'a [f64; SUMMARY_DIM]>) -> Self {
        DeviationBaseline {
            norm: Standardizer::fit(clean.into_iter().map(|s| s.as_slice()), SUMMARY_DIM),
        }
    }

    /// Exponential update of the baseline mean with a window judged clean.
    pub fn observe_clean(&mut self, features: &WindowFeatures, rate: f64) {
        for (m, x) in self.norm.mean.iter_mut().zip(&features.summary) {
            *m += rate * (x - *m);
        }
    }

    /// Largest |z| per attributable sensor group.
    pub fn group_deviation(&self, features: &WindowFeatures) -> [(AttackKind, f64); 5] {
        let z = self.norm.transform(&features.summary);
        GROUPS.map(|(group, kind)| {
            let dev = z
                .iter()
                .enumerate()
                .filter(|(i, _)| summary_group(*i) == group)
                .map(|(_, v)| v.abs())
                .fold(0.0, f64::max);
            (kind, dev)
        })
    }

    /// Attributes the window to the sensor group that deviates most, or
    /// `Unknown` when no group dominates.
    pub fn classify_threat(
        &self,
        features: &WindowFeatures,
        cfg: &ClassifierConfig,
    ) -> ThreatClass {
        let mut devs = self.group_deviation(features);
        devs.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (kind, top) = devs[0];
        let second = devs[1].1;
        if top >= cfg.min_deviation && top >= cfg.dominance_ratio * second {
            ThreatClass::Attack(kind)
        } else {
            ThreatClass::Unknown
        }
    }
}

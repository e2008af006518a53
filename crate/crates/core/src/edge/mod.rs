//! Tier 1: per-vehicle real-time anomaly detection.
//!
//! Three base scorers (bagged trees, a max-margin linear model and a
//! recurrent cell) are combined with accuracy-softmax weights. A window is
//! flagged only when both the weighted score and the ensemble confidence
//! clear their thresholds; flagged windows are classified by their dominant
//! sensor-group deviation and hashed into a [`ThreatSignature`].

mod classify;
pub mod ensemble;
pub mod features;
mod forest;
mod margin;
mod recurrent;
mod scorer;
mod signature;
mod train;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensors::{AttackKind, FeatureWindow};

pub use classify::{ClassifierConfig, DeviationBaseline};
pub use ensemble::{
    combine, compute_weights, dual_threshold, update_accuracy, Combined, EnsembleWeights,
};
pub use features::WindowFeatures;
pub use forest::{ForestParams, ForestScorer};
pub use margin::{MarginParams, MarginScorer};
pub use recurrent::{RecurrentParams, RecurrentScorer};
pub use scorer::{binary_entropy, BaseScorer, Prediction, ScorerKind};
pub use signature::{make_signature, pattern_key, signature_digest, ThreatSignature};
pub use train::{train_base_scorers, train_base_scorers_with, TrainedScorers, TrainingParams};

#[derive(Debug, Error, PartialEq)]
pub enum EdgeError {
    #[error("temperature must be positive and finite, got {0}")]
    NonPositiveTemperature(f64),
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("accuracy {0} outside [0, 1]")]
    InvalidAccuracy(f64),
    #[error("{scorers} scorers but {weights} weights")]
    WeightMismatch { scorers: usize, weights: usize },
    #[error("scorer index {index} out of range for {len} scorers")]
    ScorerIndex { index: usize, len: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("training set must contain both clean and attack windows")]
    SingleClass,
    #[error("threshold {name} = {value} outside (0, 1)")]
    InvalidThreshold { name: &'static str, value: f64 },
}

/// Detection thresholds and weighting temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Anomaly-score threshold θ1.
    pub theta1: f64,
    /// Confidence threshold θ2.
    pub theta2: f64,
    /// Softmax temperature Υ.
    pub temperature: f64,
    /// EMA decay for accuracy tracking.
    pub accuracy_decay: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            theta1: 0.7,
            theta2: 0.8,
            temperature: 1.0,
            accuracy_decay: 0.99,
        }
    }
}

impl DetectorConfig {
    /// Thresholds must lie in `[0, 1)`; zero disables that gate.
    pub fn validate(&self) -> Result<(), EdgeError> {
        for (name, value) in [("theta1", self.theta1), ("theta2", self.theta2)] {
            if !(0.0..1.0).contains(&value) {
                return Err(EdgeError::InvalidThreshold { name, value });
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(EdgeError::NonPositiveTemperature(self.temperature));
        }
        if !(0.0..=1.0).contains(&self.accuracy_decay) {
            return Err(EdgeError::InvalidThreshold {
                name: "accuracy_decay",
                value: self.accuracy_decay,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThreatLevel {
    Low,
    Medium,
    High,
}

impl ThreatLevel {
    /// Low below 0.7, Medium in [0.7, 0.85), High from 0.85.
    pub fn from_severity(severity: f64) -> Self {
        if severity >= 0.85 {
            ThreatLevel::High
        } else if severity >= 0.7 {
            ThreatLevel::Medium
        } else {
            ThreatLevel::Low
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ThreatLevel::Low => 0,
            ThreatLevel::Medium => 1,
            ThreatLevel::High => 2,
        }
    }
}

/// Attack attribution of a flagged window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThreatClass {
    Attack(AttackKind),
    Unknown,
}

impl ThreatClass {
    pub fn code(self) -> u8 {
        match self {
            ThreatClass::Attack(k) => k.code(),
            ThreatClass::Unknown => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyVerdict {
    pub anomaly_score: f64,
    pub confidence: f64,
    pub ensemble_variance: f64,
    pub is_anomaly: bool,
    pub severity: f64,
    pub threat_level: ThreatLevel,
    /// Wall-clock duration of the prediction call.
    pub inference_time_us: u64,
    pub components: Vec<Prediction>,
}

/// Runs every scorer on `window` and applies the weighted combination and
/// dual-threshold gate.
pub fn ensemble_predict(
    window: &FeatureWindow,
    scorers: &[Box<dyn BaseScorer>],
    weights: &EnsembleWeights<f64>,
    config: &DetectorConfig,
) -> Result<AnomalyVerdict, EdgeError> {
    let start = Instant::now();
    let features = WindowFeatures::from_window(window);
    predict_features(&features, scorers, weights, config, start)
}

fn predict_features(
    features: &WindowFeatures,
    scorers: &[Box<dyn BaseScorer>],
    weights: &EnsembleWeights<f64>,
    config: &DetectorConfig,
    start: Instant,
) -> Result<AnomalyVerdict, EdgeError> {
    if scorers.len() != weights.weights.len() {
        return Err(EdgeError::WeightMismatch {
            scorers: scorers.len(),
            weights: weights.weights.len(),
        });
    }
    let components: Vec<Prediction> = scorers.iter().map(|s| s.predict(features)).collect();
    let pairs: Vec<(f64, f64)> = components
        .iter()
        .map(|p| (p.score, p.uncertainty))
        .collect();
    let c = combine(&pairs, &weights.weights)?;
    let severity = c.anomaly_score;
    let elapsed = start.elapsed();
    Ok(AnomalyVerdict {
        anomaly_score: c.anomaly_score,
        confidence: c.confidence,
        ensemble_variance: c.variance,
        is_anomaly: dual_threshold(c.anomaly_score, c.confidence, config.theta1, config.theta2),
        severity,
        threat_level: ThreatLevel::from_severity(severity),
        inference_time_us: elapsed.as_micros() as u64,
        components,
    })
}

/// A trained tier-1 detector: scorers, weights, thresholds and the
/// deviation baseline used for attribution.
pub struct EdgeDetector {
    pub scorers: Vec<Box<dyn BaseScorer>>,
    pub weights: EnsembleWeights<f64>,
    pub config: DetectorConfig,
    pub baseline: DeviationBaseline,
    pub classifier: ClassifierConfig,
}

/// Verdict plus attribution for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub verdict: AnomalyVerdict,
    pub class: Option<ThreatClass>,
    pub features: WindowFeatures,
}

impl EdgeDetector {
    pub fn from_trained(
        trained: TrainedScorers,
        config: DetectorConfig,
    ) -> Result<Self, EdgeError> {
        let weights = compute_weights(&trained.accuracies, config.temperature)?;
        Ok(EdgeDetector {
            scorers: trained.scorers,
            weights,
            config,
            baseline: trained.baseline,
            classifier: ClassifierConfig::default(),
        })
    }

    pub fn predict(&self, window: &FeatureWindow) -> Result<AnomalyVerdict, EdgeError> {
        ensemble_predict(window, &self.scorers, &self.weights, &self.config)
    }

    /// Prediction followed, for flagged windows, by threat classification.
    pub fn detect(&self, window: &FeatureWindow) -> Result<Detection, EdgeError> {
        let start = Instant::now();
        let features = WindowFeatures::from_window(window);
        let verdict =
            predict_features(&features, &self.scorers, &self.weights, &self.config, start)?;
        let class = verdict
            .is_anomaly
            .then(|| self.baseline.classify_threat(&features, &self.classifier));
        Ok(Detection {
            verdict,
            class,
            features,
        })
    }

    /// Feeds back whether scorer `index` was right on a labelled window.
    pub fn record_outcome(&mut self, index: usize, correct: bool) -> Result<(), EdgeError> {
        self.weights = update_accuracy(&self.weights, index, correct, self.config.accuracy_decay)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::VehicleId;
    use crate::sensors::{generate_clean_stream, DriveProfile};

    struct Fixed(f64, f64);

    impl BaseScorer for Fixed {
        fn kind(&self) -> ScorerKind {
            ScorerKind::ForestScorer
        }
        fn predict(&self, _: &WindowFeatures) -> Prediction {
            Prediction {
                score: self.0,
                uncertainty: self.1,
            }
        }
    }

    fn window() -> FeatureWindow {
        let samples =
            generate_clean_stream(1, VehicleId(0), 500, &DriveProfile::default()).unwrap();
        FeatureWindow {
            vehicle_id: VehicleId(0),
            window_start_ms: 0,
            samples,
        }
    }

    fn fixed(p: &[(f64, f64)]) -> Vec<Box<dyn BaseScorer>> {
        p.iter()
            .map(|&(s, u)| Box::new(Fixed(s, u)) as Box<dyn BaseScorer>)
            .collect()
    }

    #[test]
    fn confident_unanimous_anomaly() {
        let w = compute_weights(&[0.9, 0.9, 0.9], 1.0).unwrap();
        let v = ensemble_predict(
            &window(),
            &fixed(&[(1.0, 0.0); 3]),
            &w,
            &DetectorConfig::default(),
        )
        .unwrap();
        assert!((v.anomaly_score - 1.0).abs() < 1e-12);
        assert!((v.confidence - 1.0).abs() < 1e-12);
        assert!(v.is_anomaly);
        assert_eq!(v.threat_level, ThreatLevel::High);
    }

    #[test]
    fn low_confidence_is_gated() {
        let w = compute_weights(&[0.9, 0.9, 0.9], 1.0).unwrap();
        let v = ensemble_predict(
            &window(),
            &fixed(&[(0.9, 0.5); 3]),
            &w,
            &DetectorConfig::default(),
        )
        .unwrap();
        assert!(v.anomaly_score > 0.7);
        assert!((v.confidence - 0.5).abs() < 1e-12);
        assert!(!v.is_anomaly);
    }

    #[test]
    fn weighted_example() {
        let w = EnsembleWeights {
            accuracies: vec![0.0; 3],
            temperature: 1.0,
            weights: vec![0.5, 0.3, 0.2],
        };
        let v = ensemble_predict(
            &window(),
            &fixed(&[(0.2, 0.0), (0.8, 0.0), (0.5, 0.0)]),
            &w,
            &DetectorConfig::default(),
        )
        .unwrap();
        assert!((v.anomaly_score - 0.44).abs() < 1e-12);
        assert!((v.ensemble_variance - 0.0684).abs() < 1e-9);
        assert_eq!(v.severity, v.anomaly_score);
        assert_eq!(v.threat_level, ThreatLevel::Low);
    }

    #[test]
    fn mismatched_counts() {
        let w = compute_weights(&[0.9, 0.9], 1.0).unwrap();
        assert_eq!(
            ensemble_predict(
                &window(),
                &fixed(&[(1.0, 0.0); 3]),
                &w,
                &DetectorConfig::default()
            ),
            Err(EdgeError::WeightMismatch {
                scorers: 3,
                weights: 2
            })
        );
    }

    #[test]
    fn threat_level_boundaries() {
        assert_eq!(ThreatLevel::from_severity(0.6999), ThreatLevel::Low);
        assert_eq!(ThreatLevel::from_severity(0.7), ThreatLevel::Medium);
        assert_eq!(ThreatLevel::from_severity(0.8499), ThreatLevel::Medium);
        assert_eq!(ThreatLevel::from_severity(0.85), ThreatLevel::High);
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = DetectorConfig {
            theta2: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(EdgeError::InvalidThreshold { name: "theta2", .. })
        ));
    }
}

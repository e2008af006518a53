//! Tier 2: regional federated learning.
//!
//! Clients send one-step gradient differences; the regional coordinator
//! aggregates them with a coordinate-wise trimmed mean, adds Laplace noise
//! once per round and charges the privacy accountant.

mod local;
mod oracle;
mod privacy;
mod robust;
mod round;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::VehicleId;

pub use local::{byzantine_update, local_train, LocalLoss, LogisticData, Quadratic};
pub use oracle::{convergence_oracle, OracleParams, OracleTrajectory};
pub use privacy::{
    accountant_charge, add_laplace, laplace_sample, privatize_signature, PrivacyAccountant,
    PrivacyConfig,
};
pub use robust::{quantile, trimmed_fraction, trimmed_mean, trimmed_mean_weighted};
pub use round::{aggregate_round, RoundSummary};

#[derive(Debug, Error, PartialEq)]
pub enum FederatedError {
    #[error("local data set is empty")]
    EmptyLocalData,
    #[error("learning rate must be positive, got {0}")]
    NonPositiveLearningRate(f64),
    #[error("trimmed mean needs at least 3 updates, got {0}")]
    TooFewUpdates(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("trim ratio {0} outside [0, 0.5)")]
    InvalidTrimRatio(f64),
    #[error(
        "Laplace scale parameters must be positive: sensitivity {sensitivity}, epsilon {epsilon}"
    )]
    InvalidPrivacyScale { sensitivity: f64, epsilon: f64 },
    #[error("delta {0} outside (0, 1)")]
    InvalidDelta(f64),
    #[error("no updates received")]
    NoUpdates,
    #[error("all {0} updates were rejected")]
    AllRejected(usize),
    #[error("regional vehicle count is zero")]
    ZeroVehicles,
    #[error("byzantine fraction {fraction} exceeds trim capacity {capacity}")]
    InfeasibleByzantineFraction { fraction: f64, capacity: f64 },
    #[error("invalid oracle parameter: {0}")]
    InvalidOracle(&'static str),
    #[error("weight count {weights} does not match update count {updates}")]
    WeightMismatch { updates: usize, weights: usize },
}

/// Regional model `w⁽ᵗ⁾` at round `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel<T> {
    pub weights: Vec<T>,
    pub round: u64,
}

impl<T: crate::Real> GlobalModel<T> {
    pub fn zeros(dim: usize) -> Self {
        GlobalModel {
            weights: vec![T::zero(); dim],
            round: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// A client's gradient difference `g_k = w_k⁽ᵗ⁺¹⁾ − w⁽ᵗ⁾` for `round`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate<T> {
    pub vehicle_id: VehicleId,
    pub round: u64,
    pub delta: Vec<T>,
    pub sample_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    TrimmedMean,
    /// Plain coordinate mean, used as a no-defence baseline.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregatorConfig {
    /// β: quantile of absolute deviations above which values are trimmed.
    pub trim_ratio: f64,
    pub learning_rate: f64,
    pub round_interval_s: f64,
    #[serde(default = "default_aggregation")]
    pub aggregation: Aggregation,
    /// Weight survivors by sample count instead of averaging them uniformly.
    #[serde(default)]
    pub weighted: bool,
}

fn default_aggregation() -> Aggregation {
    Aggregation::TrimmedMean
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        AggregatorConfig {
            trim_ratio: 0.3,
            learning_rate: 0.5,
            round_interval_s: 30.0,
            aggregation: Aggregation::TrimmedMean,
            weighted: false,
        }
    }
}

impl AggregatorConfig {
    pub fn validate(&self) -> Result<(), FederatedError> {
        if !(0.0..0.5).contains(&self.trim_ratio) {
            return Err(FederatedError::InvalidTrimRatio(self.trim_ratio));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(FederatedError::NonPositiveLearningRate(self.learning_rate));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByzantineKind {
    SignFlip,
    LargeNorm,
    RandomNoise,
    LabelFlip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ByzantineBehavior {
    pub kind: ByzantineKind,
    pub magnitude: f64,
}

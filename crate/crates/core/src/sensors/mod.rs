//! Synthetic multimodal sensor streams for the vehicle fleet.
//!
//! A stream is an ordered list of [`FeatureVector`]s sampled at a fixed
//! period (10 ms by default). Streams are generated from seeded
//! mean-reverting processes, perturbed by [`inject_attack`], and cut into
//! fixed-length [`FeatureWindow`]s for the edge detector.

mod corpus;
mod csv_io;
mod generate;
mod inject;
mod window;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::VehicleId;

pub use corpus::{build_corpus, CorpusSpec};
pub use csv_io::{
    export_feature_csv, ingest_feature_csv, read_feature_csv, write_feature_csv, CSV_HEADER,
};
pub use generate::{generate_clean_stream, DriveProfile};
pub use inject::{inject_attack, inject_attack_labeled, label_stream, AttackMagnitudes};
pub use window::{make_windows, make_windows_with_period};

/// Default sampling period (100 Hz).
pub const DEFAULT_PERIOD_MS: i64 = 10;
/// Default window length in samples (500 ms at 100 Hz).
pub const DEFAULT_WINDOW_LEN: usize = 50;
/// Nominal actuator response latency of an uncompromised vehicle.
pub const NOMINAL_ACTUATOR_LATENCY_MS: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("duration must be positive, got {0} ms")]
    NonPositiveDuration(i64),
    #[error("sample period must be positive")]
    ZeroPeriod,
    #[error("sample period {period_ms} ms does not divide duration {duration_ms} ms")]
    PeriodDoesNotDivide { duration_ms: i64, period_ms: i64 },
    #[error("unknown attack kind `{0}`")]
    UnknownAttackKind(String),
    #[error("attack intensity {0} outside (0, 1]")]
    InvalidIntensity(f64),
    #[error("attack time range [{start_ms}, {end_ms}) is empty")]
    EmptyAttackRange { start_ms: i64, end_ms: i64 },
    #[error("attack target set is empty")]
    NoTargets,
    #[error("attack range [{start_ms}, {end_ms}) does not overlap the stream")]
    NoOverlap { start_ms: i64, end_ms: i64 },
    #[error("stream of {len} samples is shorter than window length {window}")]
    StreamTooShort { len: usize, window: usize },
    #[error("window length and stride must be at least 1")]
    InvalidWindowShape,
    #[error("samples at index {index} break the constant {period_ms} ms spacing")]
    IrregularSpacing { index: usize, period_ms: i64 },
    #[error("csv: missing column `{0}`")]
    MissingColumn(String),
    #[error("csv row {row}: column `{column}` is not numeric: `{value}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv row {row}: timestamp {timestamp_ms} does not increase")]
    NonMonotoneTimestamp { row: usize, timestamp_ms: i64 },
    #[error("csv row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for SensorError {
    fn from(e: std::io::Error) -> Self {
        SensorError::Io(e.to_string())
    }
}

impl From<csv::Error> for SensorError {
    fn from(e: csv::Error) -> Self {
        SensorError::Csv(e.to_string())
    }
}

/// One timestep of multimodal features.
///
/// `actuator_latency_ms` is an auxiliary channel that carries the
/// actuator-response observation; it is not part of the feature CSV schema and
/// ingested rows receive the nominal value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub timestamp_ms: i64,
    pub lidar_point_density: f64,
    pub lidar_mean_distance: f64,
    pub lidar_height_variance: f64,
    pub lidar_spatial_density: f64,
    pub cam_brightness: f64,
    pub cam_contrast: f64,
    pub cam_sharpness: f64,
    pub cam_saturation: f64,
    pub pos_x: f64,
    pub pos_y: f64,
    pub pos_z: f64,
    pub quat_w: f64,
    pub quat_x: f64,
    pub quat_y: f64,
    pub quat_z: f64,
    pub actuator_latency_ms: f64,
}

impl FeatureVector {
    pub fn quat_norm(&self) -> f64 {
        (self.quat_w * self.quat_w
            + self.quat_x * self.quat_x
            + self.quat_y * self.quat_y
            + self.quat_z * self.quat_z)
            .sqrt()
    }

    /// Heading about the vertical axis encoded by the orientation quaternion.
    pub fn yaw(&self) -> f64 {
        let (w, x, y, z) = (self.quat_w, self.quat_x, self.quat_y, self.quat_z);
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }

    /// Checks the range invariants of a single sample. `require_unit_quat`
    /// additionally enforces the clean-sample quaternion norm.
    pub fn check(&self, require_unit_quat: bool) -> Result<(), String> {
        let nonneg = [
            ("lidar_point_density", self.lidar_point_density),
            ("lidar_mean_distance", self.lidar_mean_distance),
            ("lidar_height_variance", self.lidar_height_variance),
            ("lidar_spatial_density", self.lidar_spatial_density),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        let unit = [
            ("cam_brightness", self.cam_brightness),
            ("cam_contrast", self.cam_contrast),
            ("cam_sharpness", self.cam_sharpness),
            ("cam_saturation", self.cam_saturation),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("pos_x", self.pos_x),
            ("pos_y", self.pos_y),
            ("pos_z", self.pos_z),
        ] {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        if require_unit_quat && (self.quat_norm() - 1.0).abs() > 1e-6 {
            return Err(format!(
                "quaternion norm {} is not within 1e-6 of 1",
                self.quat_norm()
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackKind {
    GpsSpoof,
    LidarSpoof,
    CameraPatch,
    ImuManip,
    CommJam,
    MlPoison,
    ActuatorCompromise,
}

impl AttackKind {
    pub const ALL: [AttackKind; 7] = [
        AttackKind::GpsSpoof,
        AttackKind::LidarSpoof,
        AttackKind::CameraPatch,
        AttackKind::ImuManip,
        AttackKind::CommJam,
        AttackKind::MlPoison,
        AttackKind::ActuatorCompromise,
    ];

    /// Kinds that perturb on-board sensor features.
    pub const SENSOR: [AttackKind; 5] = [
        AttackKind::GpsSpoof,
        AttackKind::LidarSpoof,
        AttackKind::CameraPatch,
        AttackKind::ImuManip,
        AttackKind::ActuatorCompromise,
    ];

    pub fn is_sensor(self) -> bool {
        !matches!(self, AttackKind::CommJam | AttackKind::MlPoison)
    }

    pub fn code(self) -> u8 {
        match self {
            AttackKind::GpsSpoof => 1,
            AttackKind::LidarSpoof => 2,
            AttackKind::CameraPatch => 3,
            AttackKind::ImuManip => 4,
            AttackKind::CommJam => 5,
            AttackKind::MlPoison => 6,
            AttackKind::ActuatorCompromise => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::GpsSpoof => "GpsSpoof",
            AttackKind::LidarSpoof => "LidarSpoof",
            AttackKind::CameraPatch => "CameraPatch",
            AttackKind::ImuManip => "ImuManip",
            AttackKind::CommJam => "CommJam",
            AttackKind::MlPoison => "MlPoison",
            AttackKind::ActuatorCompromise => "ActuatorCompromise",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = SensorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SensorError::UnknownAttackKind(s.to_string()))
    }
}

/// A labelled attack campaign over a time range `[start_ms, end_ms)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub kind: AttackKind,
    pub intensity: f64,
    pub start_ms: i64,
    pub end_ms: i64,
    pub target_vehicles: BTreeSet<VehicleId>,
}

impl AttackScenario {
    pub fn new(
        kind: AttackKind,
        intensity: f64,
        start_ms: i64,
        end_ms: i64,
        target_vehicles: impl IntoIterator<Item = VehicleId>,
    ) -> Result<Self, SensorError> {
        let s = AttackScenario {
            kind,
            intensity,
            start_ms,
            end_ms,
            target_vehicles: target_vehicles.into_iter().collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        if !(self.intensity > 0.0 && self.intensity <= 1.0) {
            return Err(SensorError::InvalidIntensity(self.intensity));
        }
        if self.start_ms >= self.end_ms {
            return Err(SensorError::EmptyAttackRange {
                start_ms: self.start_ms,
                end_ms: self.end_ms,
            });
        }
        if self.target_vehicles.is_empty() {
            return Err(SensorError::NoTargets);
        }
        Ok(())
    }

    pub fn covers(&self, vehicle: VehicleId, t_ms: i64) -> bool {
        t_ms >= self.start_ms && t_ms < self.end_ms && self.target_vehicles.contains(&vehicle)
    }
}

/// A sample with its ground-truth attack label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledSample {
    pub sample: FeatureVector,
    pub attack: Option<AttackKind>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureWindow {
    pub vehicle_id: VehicleId,
    pub window_start_ms: i64,
    pub samples: Vec<FeatureVector>,
}

impl FeatureWindow {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn end_ms(&self) -> i64 {
        self.samples
            .last()
            .map_or(self.window_start_ms, |s| s.timestamp_ms)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledWindow {
    pub window: FeatureWindow,
    pub is_attack: bool,
    pub attack_kind: Option<AttackKind>,
}

impl LabeledWindow {
    pub fn clean(window: FeatureWindow) -> Self {
        LabeledWindow {
            window,
            is_attack: false,
            attack_kind: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attack_kind_parses_case_insensitively() {
        assert_eq!(
            "gpsspoof".parse::<AttackKind>().unwrap(),
            AttackKind::GpsSpoof
        );
        assert_eq!(
            "Teleport".parse::<AttackKind>(),
            Err(SensorError::UnknownAttackKind("Teleport".into()))
        );
    }

    #[test]
    fn scenario_rejects_bad_intensity_and_range() {
        let v = [VehicleId(1)];
        assert_eq!(
            AttackScenario::new(AttackKind::GpsSpoof, 0.0, 0, 10, v),
            Err(SensorError::InvalidIntensity(0.0))
        );
        assert!(AttackScenario::new(AttackKind::GpsSpoof, 1.2, 0, 10, v).is_err());
        assert!(AttackScenario::new(AttackKind::GpsSpoof, 0.5, 10, 10, v).is_err());
        assert_eq!(
            AttackScenario::new(AttackKind::GpsSpoof, 0.5, 0, 10, []),
            Err(SensorError::NoTargets)
        );
        assert!(AttackScenario::new(AttackKind::GpsSpoof, 1.0, 0, 10, v).is_ok());
    }

    #[test]
    fn yaw_matches_planar_quaternion() {
        let psi: f64 = 0.7;
        let fv = FeatureVector {
            timestamp_ms: 0,
            lidar_point_density: 1.0,
            lidar_mean_distance: 1.0,
            lidar_height_variance: 1.0,
            lidar_spatial_density: 1.0,
            cam_brightness: 0.5,
            cam_contrast: 0.5,
            cam_sharpness: 0.5,
            cam_saturation: 0.5,
            pos_x: 0.0,
            pos_y: 0.0,
            pos_z: 0.0,
            quat_w: (psi / 2.0).cos(),
            quat_x: 0.0,
            quat_y: 0.0,
            quat_z: (psi / 2.0).sin(),
            actuator_latency_ms: NOMINAL_ACTUATOR_LATENCY_MS,
        };
        assert!((fv.yaw() - psi).abs() < 1e-12);
        assert!(fv.check(true).is_ok());
    }
}

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{WindowFeatures, SUMMARY_DIM};
use super::{ThreatClass, ThreatLevel};
use crate::ids::{RegionId, VehicleId};
use crate::sensors::FeatureWindow;

/// Hashed, escalatable description of a detected anomaly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreatSignature {
    #[serde(with = "crate::hexbytes")]
    pub digest: [u8; 32],
    pub severity: f64,
    pub threat_level: ThreatLevel,
    pub attack_class: ThreatClass,
    pub vehicle_id: VehicleId,
    pub region_id: RegionId,
    pub timestamp_ms: i64,
}

fn quantize(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

/// SHA-256 over the canonical encoding of (window summary, threat level,
/// vehicle, timestamp): a domain tag, each summary statistic rounded to six
/// decimals as little-endian `i64`, the level byte, the vehicle as `u32` LE
/// and the timestamp as `i64` LE.
pub fn signature_digest(
    summary: &[f64; SUMMARY_DIM],
    level: ThreatLevel,
    vehicle: VehicleId,
    timestamp_ms: i64,
) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"haven.signature.v1");
    for &x in summary {
        h.update(quantize(x).to_le_bytes());
    }
    h.update([level.code()]);
    h.update(vehicle.0.to_le_bytes());
    h.update(timestamp_ms.to_le_bytes());
    h.finalize().into()
}

pub fn make_signature(
    window: &FeatureWindow,
    threat_level: ThreatLevel,
    vehicle_id: VehicleId,
    timestamp_ms: i64,
) -> [u8; 32] {
    signature_digest(
        &WindowFeatures::from_window(window).summary,
        threat_level,
        vehicle_id,
        timestamp_ms,
    )
}

impl ThreatSignature {
    /// Coarse matching key shared by the same campaign across vehicles: the
    /// first eight bytes of SHA-256 over the attack class and the severity
    /// quantized to tenths.
    pub fn pattern_key(&self) -> [u8; 8] {
        pattern_key(self.attack_class, self.severity)
    }
}

pub fn pattern_key(class: ThreatClass, severity: f64) -> [u8; 8] {
    let mut h = Sha256::new();
    h.update(b"haven.pattern.v1");
    h.update([
        class.code(),
        (severity.clamp(0.0, 1.0) * 10.0).floor() as u8,
    ]);
    let d: [u8; 32] = h.finalize().into();
    d[..8].try_into().expect("8-byte prefix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::{generate_clean_stream, AttackKind, DriveProfile};

    fn window() -> FeatureWindow {
        let samples =
            generate_clean_stream(4, VehicleId(7), 500, &DriveProfile::default()).unwrap();
        FeatureWindow {
            vehicle_id: VehicleId(7),
            window_start_ms: 0,
            samples,
        }
    }

    #[test]
    fn digest_is_deterministic_and_input_sensitive() {
        let w = window();
        let a = make_signature(&w, ThreatLevel::High, VehicleId(7), 1000);
        assert_eq!(a, make_signature(&w, ThreatLevel::High, VehicleId(7), 1000));
        assert_eq!(a.len(), 32);
        assert_ne!(a, make_signature(&w, ThreatLevel::High, VehicleId(7), 1001));
        assert_ne!(
            a,
            make_signature(&w, ThreatLevel::Medium, VehicleId(7), 1000)
        );
        assert_ne!(a, make_signature(&w, ThreatLevel::High, VehicleId(8), 1000));
        let mut w2 = w.clone();
        w2.samples[10].cam_brightness += 0.01;
        assert_ne!(
            a,
            make_signature(&w2, ThreatLevel::High, VehicleId(7), 1000)
        );
    }

    #[test]
    fn pattern_key_ignores_vehicle_but_not_class() {
        let g = ThreatClass::Attack(AttackKind::GpsSpoof);
        assert_eq!(pattern_key(g, 0.91), pattern_key(g, 0.97));
        assert_ne!(pattern_key(g, 0.91), pattern_key(g, 0.81));
        assert_ne!(
            pattern_key(g, 0.91),
            pattern_key(ThreatClass::Attack(AttackKind::LidarSpoof), 0.91)
        );
    }
}

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AttackKind, AttackScenario, FeatureVector, LabeledSample, SensorError};
use crate::ids::VehicleId;
use crate::seed::{self, tag};

/// Perturbation magnitude range per attack kind.
///
/// Intensity `s ∈ (0, 1]` maps linearly from the just-noticeable end `lo` to
/// the saturating end `hi`: `lo + s·(hi − lo)`. These are calibration
/// constants of the synthetic fleet, not measured quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackMagnitudes {
    /// Lateral GPS drift speed (m/s).
    pub gps_drift_mps: (f64, f64),
    /// GPS jitter amplitude (m).
    pub gps_jitter_m: (f64, f64),
    /// Relative LiDAR distortion (fraction).
    pub lidar_distortion: (f64, f64),
    /// Additive camera-statistic shift.
    pub camera_shift: (f64, f64),
    /// Peak injected yaw oscillation (rad).
    pub imu_yaw_amplitude: (f64, f64),
    /// Relative position-increment inflation under IMU manipulation.
    pub imu_increment_scale: (f64, f64),
    /// Added actuator response latency (ms).
    pub actuator_delay_ms: (f64, f64),
}

impl Default for AttackMagnitudes {
    fn default() -> Self {
        AttackMagnitudes {
            gps_drift_mps: (1.0, 6.0),
            gps_jitter_m: (0.02, 0.3),
            lidar_distortion: (0.1, 0.6),
            camera_shift: (0.05, 0.35),
            imu_yaw_amplitude: (0.1, 0.8),
            imu_increment_scale: (0.02, 0.15),
            actuator_delay_ms: (10.0, 60.0),
        }
    }
}

fn lerp((lo, hi): (f64, f64), s: f64) -> f64 {
    lo + s * (hi - lo)
}

/// Wraps a clean stream with empty labels.
pub fn label_stream(stream: &[FeatureVector]) -> Vec<LabeledSample> {
    stream
        .iter()
        .map(|&sample| LabeledSample {
            sample,
            attack: None,
        })
        .collect()
}

/// Applies `scenario` to a clean stream of `vehicle`, returning labelled samples.
pub fn inject_attack(
    stream: &[FeatureVector],
    vehicle: VehicleId,
    scenario: &AttackScenario,
    seed: u64,
) -> Result<Vec<LabeledSample>, SensorError> {
    let mut labeled = label_stream(stream);
    inject_attack_labeled(
        &mut labeled,
        vehicle,
        scenario,
        seed,
        &AttackMagnitudes::default(),
    )?;
    Ok(labeled)
}

/// In-place variant used when several campaigns hit one vehicle.
///
/// Samples outside `[start_ms, end_ms)`, and every sample of a vehicle outside
/// the target set, are left untouched. CommJam and MlPoison leave features
/// unchanged: they act on the network and the federated tier respectively.
pub fn inject_attack_labeled(
    stream: &mut [LabeledSample],
    vehicle: VehicleId,
    scenario: &AttackScenario,
    seed: u64,
    mags: &AttackMagnitudes,
) -> Result<(), SensorError> {
    scenario.validate()?;
    let (Some(first), Some(last)) = (stream.first(), stream.last()) else {
        return Err(SensorError::NoOverlap {
            start_ms: scenario.start_ms,
            end_ms: scenario.end_ms,
        });
    };
    if scenario.start_ms > last.sample.timestamp_ms || scenario.end_ms <= first.sample.timestamp_ms
    {
        return Err(SensorError::NoOverlap {
            start_ms: scenario.start_ms,
            end_ms: scenario.end_ms,
        });
    }
    if !scenario.kind.is_sensor() || !scenario.target_vehicles.contains(&vehicle) {
        return Ok(());
    }

    let s = scenario.intensity;
    let rng = &mut seed::rng(
        seed,
        &[
            tag::INJECT,
            vehicle.0 as u64,
            scenario.kind.code() as u64,
            scenario.start_ms as u64,
        ],
    );
    let Some(begin) = stream
        .iter()
        .position(|l| scenario.covers(vehicle, l.sample.timestamp_ms))
    else {
        return Ok(());
    };
    let anchor = stream[begin].sample;
    let heading = anchor.yaw();
    let lateral = (-heading.sin(), heading.cos());

    for l in stream[begin..].iter_mut() {
        let t = l.sample.timestamp_ms;
        if !scenario.covers(vehicle, t) {
            break;
        }
        let tau = (t - scenario.start_ms) as f64 / 1000.0;
        let f = &mut l.sample;
        match scenario.kind {
            AttackKind::GpsSpoof => {
                let n: f64 = rng.sample(StandardNormal);
                let off = lerp(mags.gps_drift_mps, s) * tau + lerp(mags.gps_jitter_m, s) * n.abs();
                f.pos_x += off * lateral.0;
                f.pos_y += off * lateral.1;
            }
            AttackKind::LidarSpoof => {
                let k = lerp(mags.lidar_distortion, s);
                f.lidar_point_density *= 1.0 - k;
                f.lidar_mean_distance *= 1.0 + k;
                f.lidar_height_variance *= 1.0 + 4.0 * k;
                f.lidar_spatial_density *= 1.0 - 0.8 * k;
            }
            AttackKind::CameraPatch => {
                let d = lerp(mags.camera_shift, s);
                f.cam_brightness = (f.cam_brightness + d).clamp(0.0, 1.0);
                f.cam_contrast = (f.cam_contrast - d).clamp(0.0, 1.0);
                f.cam_sharpness = (f.cam_sharpness - d).clamp(0.0, 1.0);
                f.cam_saturation = (f.cam_saturation + d).clamp(0.0, 1.0);
            }
            AttackKind::ImuManip => {
                let dpsi = lerp(mags.imu_yaw_amplitude, s) * (std::f64::consts::TAU * tau).sin();
                rotate_yaw(f, dpsi);
                let k = lerp(mags.imu_increment_scale, s);
                f.pos_x = anchor.pos_x + (f.pos_x - anchor.pos_x) * (1.0 + k);
                f.pos_y = anchor.pos_y + (f.pos_y - anchor.pos_y) * (1.0 + k);
            }
            AttackKind::ActuatorCompromise => {
                let n: f64 = rng.sample(StandardNormal);
                f.actuator_latency_ms += lerp(mags.actuator_delay_ms, s) * (1.0 + 0.2 * n.abs());
            }
            AttackKind::CommJam | AttackKind::MlPoison => unreachable!("filtered above"),
        }
        l.attack = Some(scenario.kind);
    }
    Ok(())
}

/// Right-multiplies the orientation by a rotation of `angle` about the
/// vertical axis. Unit norm is preserved.
fn rotate_yaw(f: &mut FeatureVector, angle: f64) {
    let (rw, rz) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let (w, x, y, z) = (f.quat_w, f.quat_x, f.quat_y, f.quat_z);
    f.quat_w = w * rw - z * rz;
    f.quat_x = x * rw + y * rz;
    f.quat_y = y * rw - x * rz;
    f.quat_z = z * rw + w * rz;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::{generate_clean_stream, DriveProfile};

    fn clean() -> Vec<FeatureVector> {
        generate_clean_stream(5, VehicleId(1), 4000, &DriveProfile::default()).unwrap()
    }

    fn scenario(kind: AttackKind, s: f64) -> AttackScenario {
        AttackScenario::new(kind, s, 1000, 2000, [VehicleId(1)]).unwrap()
    }

    #[test]
    fn gps_spoof_is_local() {
        let c = clean();
        let out = inject_attack(&c, VehicleId(1), &scenario(AttackKind::GpsSpoof, 1.0), 1).unwrap();
        for (a, b) in c.iter().zip(&out) {
            let inside = (1000..2000).contains(&a.timestamp_ms);
            assert_eq!(b.attack.is_some(), inside);
            if inside {
                assert!(a.pos_x != b.sample.pos_x || a.pos_y != b.sample.pos_y);
                assert_eq!(a.lidar_mean_distance, b.sample.lidar_mean_distance);
            } else {
                assert_eq!(*a, b.sample);
            }
        }
    }

    #[test]
    fn untargeted_vehicle_is_untouched() {
        let c = clean();
        let out =
            inject_attack(&c, VehicleId(9), &scenario(AttackKind::LidarSpoof, 1.0), 1).unwrap();
        assert!(out
            .iter()
            .zip(&c)
            .all(|(l, f)| l.sample == *f && l.attack.is_none()));
    }

    #[test]
    fn network_kinds_do_not_touch_features() {
        let c = clean();
        for kind in [AttackKind::CommJam, AttackKind::MlPoison] {
            let out = inject_attack(&c, VehicleId(1), &scenario(kind, 1.0), 1).unwrap();
            assert!(out
                .iter()
                .zip(&c)
                .all(|(l, f)| l.sample == *f && l.attack.is_none()));
        }
    }

    #[test]
    fn non_overlapping_range_is_rejected() {
        let c = clean();
        let sc =
            AttackScenario::new(AttackKind::GpsSpoof, 0.5, 5000, 6000, [VehicleId(1)]).unwrap();
        assert!(matches!(
            inject_attack(&c, VehicleId(1), &sc, 1),
            Err(SensorError::NoOverlap { .. })
        ));
    }

    #[test]
    fn imu_manipulation_keeps_unit_quaternions() {
        let c = clean();
        let out = inject_attack(&c, VehicleId(1), &scenario(AttackKind::ImuManip, 1.0), 1).unwrap();
        for l in &out {
            assert!((l.sample.quat_norm() - 1.0).abs() < 1e-9);
        }
        assert!(out
            .iter()
            .zip(&c)
            .any(|(l, f)| (l.sample.yaw() - f.yaw()).abs() > 0.1));
    }

    type Dev = fn(&FeatureVector, &FeatureVector) -> f64;

    fn mean_abs_dev(c: &[FeatureVector], kind: AttackKind, s: f64, dev: Dev) -> f64 {
        let out = inject_attack(c, VehicleId(1), &scenario(kind, s), 3).unwrap();
        let devs: Vec<f64> = out
            .iter()
            .zip(c)
            .filter(|(l, _)| l.attack.is_some())
            .map(|(l, f)| dev(&l.sample, f))
            .collect();
        devs.iter().sum::<f64>() / devs.len() as f64
    }

    #[test]
    fn lidar_deviation_is_positive_and_monotone() {
        let c = clean();
        let d: Vec<f64> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&s| {
                mean_abs_dev(&c, AttackKind::LidarSpoof, s, |a, b| {
                    (a.lidar_mean_distance - b.lidar_mean_distance).abs()
                })
            })
            .collect();
        assert!(d[1] > 0.0);
        assert!(d[0] < d[1] && d[1] < d[2], "{d:?}");
    }

    #[test]
    fn deviation_monotone_for_each_sensor_kind() {
        let c = clean();
        let kinds: [(AttackKind, Dev); 4] = [
            (AttackKind::GpsSpoof, |a, b| {
                (a.pos_x - b.pos_x).hypot(a.pos_y - b.pos_y)
            }),
            (AttackKind::CameraPatch, |a, b| {
                (a.cam_brightness - b.cam_brightness).abs()
                    + (a.cam_contrast - b.cam_contrast).abs()
                    + (a.cam_sharpness - b.cam_sharpness).abs()
                    + (a.cam_saturation - b.cam_saturation).abs()
            }),
            (AttackKind::ImuManip, |a, b| {
                let d = a.yaw() - b.yaw();
                d.sin().atan2(d.cos()).abs()
            }),
            (AttackKind::ActuatorCompromise, |a, b| {
                (a.actuator_latency_ms - b.actuator_latency_ms).abs()
            }),
        ];
        for (kind, dev) in kinds {
            let d: Vec<f64> = [0.1, 0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|&s| mean_abs_dev(&c, kind, s, dev))
                .collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{kind}: {d:?}");
        }
    }
}

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeatureVector, SensorError, DEFAULT_PERIOD_MS, NOMINAL_ACTUATOR_LATENCY_MS};
use crate::ids::VehicleId;
use crate::seed::{self, tag, SimRng};

/// Stationary mean and standard deviation of one mean-reverting channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub mean: f64,
    pub sd: f64,
}

const fn ch(mean: f64, sd: f64) -> Channel {
    Channel { mean, sd }
}

/// Drive-profile parameters for the clean-stream generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveProfile {
    pub sample_period_ms: i64,
    /// Mean-reversion rate (1/s) shared by the perception channels.
    pub reversion_per_s: f64,
    pub speed_mps: Channel,
    pub yaw_rate_rps: Channel,
    pub vertical_speed_mps: Channel,
    pub gps_noise_m: f64,
    pub lidar_point_density: Channel,
    pub lidar_mean_distance: Channel,
    pub lidar_height_variance: Channel,
    pub lidar_spatial_density: Channel,
    pub cam_brightness: Channel,
    pub cam_contrast: Channel,
    pub cam_sharpness: Channel,
    pub cam_saturation: Channel,
    /// Per-sample measurement noise as a fraction of each channel's sd.
    pub measurement_noise: f64,
}

impl Default for DriveProfile {
    fn default() -> Self {
        DriveProfile {
            sample_period_ms: DEFAULT_PERIOD_MS,
            reversion_per_s: 1.0,
            speed_mps: ch(12.0, 1.5),
            yaw_rate_rps: ch(0.0, 0.05),
            vertical_speed_mps: ch(0.0, 0.05),
            gps_noise_m: 0.001,
            lidar_point_density: ch(1.0, 0.05),
            lidar_mean_distance: ch(25.0, 1.5),
            lidar_height_variance: ch(1.5, 0.1),
            lidar_spatial_density: ch(0.6, 0.04),
            cam_brightness: ch(0.5, 0.03),
            cam_contrast: ch(0.6, 0.03),
            cam_sharpness: ch(0.7, 0.03),
            cam_saturation: ch(0.45, 0.03),
            measurement_noise: 0.2,
        }
    }
}

impl DriveProfile {
    /// The same drive with every stochastic spread multiplied by `k`.
    pub fn scaled_noise(&self, k: f64) -> Self {
        let s = |c: Channel| Channel {
            mean: c.mean,
            sd: c.sd * k,
        };
        DriveProfile {
            speed_mps: s(self.speed_mps),
            yaw_rate_rps: s(self.yaw_rate_rps),
            vertical_speed_mps: s(self.vertical_speed_mps),
            gps_noise_m: self.gps_noise_m * k,
            lidar_point_density: s(self.lidar_point_density),
            lidar_mean_distance: s(self.lidar_mean_distance),
            lidar_height_variance: s(self.lidar_height_variance),
            lidar_spatial_density: s(self.lidar_spatial_density),
            cam_brightness: s(self.cam_brightness),
            cam_contrast: s(self.cam_contrast),
            cam_sharpness: s(self.cam_sharpness),
            cam_saturation: s(self.cam_saturation),
            measurement_noise: self.measurement_noise * k,
            ..self.clone()
        }
    }
}

/// Ornstein-Uhlenbeck state with exact discretization.
struct Ou {
    value: f64,
    mean: f64,
    decay: f64,
    step_sd: f64,
}

impl Ou {
    fn new(c: Channel, rate: f64, dt: f64, rng: &mut SimRng) -> Self {
        let decay = (-rate * dt).exp();
        let step_sd = c.sd * (1.0 - decay * decay).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        Ou {
            value: c.mean + c.sd * z,
            mean: c.mean,
            decay,
            step_sd,
        }
    }

    fn step(&mut self, rng: &mut SimRng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.value = self.mean + (self.value - self.mean) * self.decay + self.step_sd * z;
        self.value
    }
}

/// Generates a clean, smooth multimodal stream for one vehicle.
///
/// The output is a pure function of `(seed, vehicle_id, duration_ms, profile)`.
pub fn generate_clean_stream(
    seed: u64,
    vehicle_id: VehicleId,
    duration_ms: i64,
    profile: &DriveProfile,
) -> Result<Vec<FeatureVector>, SensorError> {
    if duration_ms <= 0 {
        return Err(SensorError::NonPositiveDuration(duration_ms));
    }
    let period = profile.sample_period_ms;
    if period <= 0 {
        return Err(SensorError::ZeroPeriod);
    }
    if duration_ms % period != 0 {
        return Err(SensorError::PeriodDoesNotDivide {
            duration_ms,
            period_ms: period,
        });
    }
    let n = (duration_ms / period) as usize;
    let dt = period as f64 / 1000.0;
    let rng = &mut seed::rng(seed, &[tag::CLEAN_STREAM, vehicle_id.0 as u64]);

    let rate = profile.reversion_per_s;
    // Kinematics revert more slowly than perception statistics.
    let mut speed = Ou::new(profile.speed_mps, 0.2, dt, rng);
    let mut yaw_rate = Ou::new(profile.yaw_rate_rps, 0.5, dt, rng);
    let mut vz = Ou::new(profile.vertical_speed_mps, 1.0, dt, rng);
    let perception = [
        profile.lidar_point_density,
        profile.lidar_mean_distance,
        profile.lidar_height_variance,
        profile.lidar_spatial_density,
        profile.cam_brightness,
        profile.cam_contrast,
        profile.cam_sharpness,
        profile.cam_saturation,
    ];
    let mut channels: Vec<Ou> = perception
        .iter()
        .map(|&c| Ou::new(c, rate, dt, rng))
        .collect();

    let mut yaw: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let (mut x, mut y, mut z) = (
        rng.random_range(-500.0..500.0),
        rng.random_range(-500.0..500.0),
        0.0f64,
    );

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            let v = speed.step(rng).max(1.0);
            yaw += yaw_rate.step(rng) * dt;
            x += v * yaw.cos() * dt;
            y += v * yaw.sin() * dt;
            z += vz.step(rng) * dt;
        }
        let mut obs = [0.0; 8];
        for (k, ou) in channels.iter_mut().enumerate() {
            let latent = if i > 0 { ou.step(rng) } else { ou.value };
            let noise: f64 = rng.sample(StandardNormal);
            obs[k] = latent + noise * perception[k].sd * profile.measurement_noise;
        }
        let gx: f64 = rng.sample(StandardNormal);
        let gy: f64 = rng.sample(StandardNormal);
        let gz: f64 = rng.sample(StandardNormal);
        let half = yaw / 2.0;
        out.push(FeatureVector {
            timestamp_ms: i as i64 * period,
            lidar_point_density: obs[0].max(0.0),
            lidar_mean_distance: obs[1].max(0.0),
            lidar_height_variance: obs[2].max(0.0),
            lidar_spatial_density: obs[3].max(0.0),
            cam_brightness: obs[4].clamp(0.0, 1.0),
            cam_contrast: obs[5].clamp(0.0, 1.0),
            cam_sharpness: obs[6].clamp(0.0, 1.0),
            cam_saturation: obs[7].clamp(0.0, 1.0),
            pos_x: x + gx * profile.gps_noise_m,
            pos_y: y + gy * profile.gps_noise_m,
            pos_z: z + gz * profile.gps_noise_m,
            quat_w: half.cos(),
            quat_x: 0.0,
            quat_y: 0.0,
            quat_z: half.sin(),
            actuator_latency_ms: NOMINAL_ACTUATOR_LATENCY_MS,
        });
    }
    Ok(out)
}

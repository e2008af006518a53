//! Per-step channels and fixed-length window summaries.

use crate::sensors::FeatureWindow;

pub const N_CHANNELS: usize = 13;
/// Mean, standard deviation and mean absolute first difference per channel.
pub const STATS_PER_CHANNEL: usize = 3;
pub const SUMMARY_DIM: usize = N_CHANNELS * STATS_PER_CHANNEL;

/// Sensor group a channel belongs to, used for threat classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureGroup {
    Lidar,
    Camera,
    Position,
    Orientation,
    Actuator,
    /// Cross-sensor consistency channels; they feed the detectors but do not
    /// attribute a deviation to any single sensor.
    CrossCheck,
}

pub const CHANNELS: [(&str, FeatureGroup); N_CHANNELS] = [
    ("lidar_point_density", FeatureGroup::Lidar),
    ("lidar_mean_distance", FeatureGroup::Lidar),
    ("lidar_height_variance", FeatureGroup::Lidar),
    ("lidar_spatial_density", FeatureGroup::Lidar),
    ("cam_brightness", FeatureGroup::Camera),
    ("cam_contrast", FeatureGroup::Camera),
    ("cam_sharpness", FeatureGroup::Camera),
    ("cam_saturation", FeatureGroup::Camera),
    ("speed", FeatureGroup::Position),
    ("vertical_speed", FeatureGroup::Position),
    ("yaw_rate", FeatureGroup::Orientation),
    ("heading_mismatch", FeatureGroup::CrossCheck),
    ("actuator_latency", FeatureGroup::Actuator),
];

pub fn summary_group(index: usize) -> FeatureGroup {
    CHANNELS[index / STATS_PER_CHANNEL].1
}

fn wrap_angle(a: f64) -> f64 {
    a.sin().atan2(a.cos())
}

/// Features computed once per window and shared by every scorer.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowFeatures {
    pub steps: Vec<[f64; N_CHANNELS]>,
    pub summary: [f64; SUMMARY_DIM],
}

impl WindowFeatures {
    pub fn from_window(window: &FeatureWindow) -> Self {
        let steps = channel_steps(window);
        let summary = summarize(&steps);
        WindowFeatures { steps, summary }
    }
}

/// Per-step channel values. Motion channels are finite differences against
/// the previous sample; the first step repeats the second's motion values.
pub fn channel_steps(window: &FeatureWindow) -> Vec<[f64; N_CHANNELS]> {
    let s = &window.samples;
    let mut out: Vec<[f64; N_CHANNELS]> = Vec::with_capacity(s.len());
    for (i, f) in s.iter().enumerate() {
        let mut c = [0.0; N_CHANNELS];
        c[0] = f.lidar_point_density;
        c[1] = f.lidar_mean_distance;
        c[2] = f.lidar_height_variance;
        c[3] = f.lidar_spatial_density;
        c[4] = f.cam_brightness;
        c[5] = f.cam_contrast;
        c[6] = f.cam_sharpness;
        c[7] = f.cam_saturation;
        c[12] = f.actuator_latency_ms;
        if i > 0 {
            let p = &s[i - 1];
            let dt = ((f.timestamp_ms - p.timestamp_ms) as f64 / 1000.0).max(1e-6);
            let (dx, dy, dz) = (f.pos_x - p.pos_x, f.pos_y - p.pos_y, f.pos_z - p.pos_z);
            c[8] = dx.hypot(dy) / dt;
            c[9] = dz / dt;
            c[10] = wrap_angle(f.yaw() - p.yaw()) / dt;
            c[11] = if dx.hypot(dy) > 1e-9 {
                wrap_angle(dy.atan2(dx) - f.yaw()).abs()
            } else {
                0.0
            };
        }
        out.push(c);
    }
    if out.len() > 1 {
        let next = out[1];
        out[0][8..12].copy_from_slice(&next[8..12]);
    }
    out
}

pub fn summarize(steps: &[[f64; N_CHANNELS]]) -> [f64; SUMMARY_DIM] {
    let mut out = [0.0; SUMMARY_DIM];
    let n = steps.len().max(1) as f64;
    for k in 0..N_CHANNELS {
        let mean = steps.iter().map(|s| s[k]).sum::<f64>() / n;
        let var = steps.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / n;
        let mad = if steps.len() > 1 {
            steps
                .windows(2)
                .map(|w| (w[1][k] - w[0][k]).abs())
                .sum::<f64>()
                / (steps.len() - 1) as f64
        } else {
            0.0
        };
        out[k * STATS_PER_CHANNEL] = mean;
        out[k * STATS_PER_CHANNEL + 1] = var.sqrt();
        out[k * STATS_PER_CHANNEL + 2] = mad;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::VehicleId;
    use crate::sensors::{generate_clean_stream, DriveProfile};

    #[test]
    fn clean_window_channels_are_plausible() {
        let samples =
            generate_clean_stream(3, VehicleId(0), 500, &DriveProfile::default()).unwrap();
        let w = FeatureWindow {
            vehicle_id: VehicleId(0),
            window_start_ms: 0,
            samples,
        };
        let f = WindowFeatures::from_window(&w);
        assert_eq!(f.steps.len(), 50);
        let speed = f.summary[8 * 3];
        assert!((5.0..20.0).contains(&speed), "speed {speed}");
        // heading agrees with travel direction on clean data
        assert!(f.summary[11 * 3] < 0.1, "mismatch {}", f.summary[11 * 3]);
        assert_eq!(f.summary[12 * 3 + 1], 0.0);
        assert_eq!(summary_group(12 * 3 + 2), FeatureGroup::Actuator);
    }
}

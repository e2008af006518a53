use super::{FeatureWindow, LabeledSample, LabeledWindow, SensorError};
use crate::ids::VehicleId;

/// Cuts a labelled stream into sliding windows of `len` samples advanced by
/// `stride`. The sample period is taken from the first two timestamps.
///
/// A window is labelled as an attack iff any constituent sample is.
pub fn make_windows(
    stream: &[LabeledSample],
    vehicle_id: VehicleId,
    len: usize,
    stride: usize,
) -> Result<Vec<LabeledWindow>, SensorError> {
    let period = match stream {
        [a, b, ..] => b.sample.timestamp_ms - a.sample.timestamp_ms,
        _ => super::DEFAULT_PERIOD_MS,
    };
    make_windows_with_period(stream, vehicle_id, len, stride, period)
}

pub fn make_windows_with_period(
    stream: &[LabeledSample],
    vehicle_id: VehicleId,
    len: usize,
    stride: usize,
    period_ms: i64,
) -> Result<Vec<LabeledWindow>, SensorError> {
    if len == 0 || stride == 0 {
        return Err(SensorError::InvalidWindowShape);
    }
    if period_ms <= 0 {
        return Err(SensorError::ZeroPeriod);
    }
    if stream.len() < len {
        return Err(SensorError::StreamTooShort {
            len: stream.len(),
            window: len,
        });
    }
    if let Some(i) = stream
        .windows(2)
        .position(|w| w[1].sample.timestamp_ms - w[0].sample.timestamp_ms != period_ms)
    {
        return Err(SensorError::IrregularSpacing {
            index: i + 1,
            period_ms,
        });
    }

    let count = (stream.len() - len) / stride + 1;
    Ok((0..count)
        .map(|k| {
            let chunk = &stream[k * stride..k * stride + len];
            let attack_kind = chunk.iter().find_map(|l| l.attack);
            LabeledWindow {
                window: FeatureWindow {
                    vehicle_id,
                    window_start_ms: chunk[0].sample.timestamp_ms,
                    samples: chunk.iter().map(|l| l.sample).collect(),
                },
                is_attack: attack_kind.is_some(),
                attack_kind,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::{
        generate_clean_stream, inject_attack, label_stream, AttackKind, AttackScenario,
        DriveProfile,
    };

    fn stream(ms: i64) -> Vec<LabeledSample> {
        label_stream(&generate_clean_stream(1, VehicleId(0), ms, &DriveProfile::default()).unwrap())
    }

    /// Loop-based count: every start position that leaves room for a window.
    fn count_oracle(len: usize, window: usize, stride: usize) -> usize {
        let mut n = 0;
        let mut start = 0;
        while start + window <= len {
            n += 1;
            start += stride;
        }
        n
    }

    #[test]
    fn window_counts() {
        assert_eq!(
            make_windows(&stream(1000), VehicleId(0), 50, 50)
                .unwrap()
                .len(),
            2
        );
        assert_eq!(
            make_windows(&stream(500), VehicleId(0), 50, 1)
                .unwrap()
                .len(),
            1
        );
        let long = stream(20_000);
        assert_eq!(count_oracle(2000, 50, 10), 196);
        assert_eq!(
            make_windows(&long, VehicleId(0), 50, 10).unwrap().len(),
            196
        );
        for (w, st) in [(1, 1), (7, 3), (50, 49), (2000, 1), (13, 2000)] {
            assert_eq!(
                make_windows(&long, VehicleId(0), w, st).unwrap().len(),
                count_oracle(2000, w, st)
            );
        }
    }

    #[test]
    fn windows_satisfy_spacing_invariants() {
        for w in make_windows(&stream(2000), VehicleId(4), 50, 25).unwrap() {
            assert_eq!(w.window.len(), 50);
            assert_eq!(w.window.vehicle_id, VehicleId(4));
            assert_eq!(w.window.window_start_ms, w.window.samples[0].timestamp_ms);
            assert!(w
                .window
                .samples
                .windows(2)
                .all(|p| p[1].timestamp_ms - p[0].timestamp_ms == 10));
        }
    }

    #[test]
    fn label_is_or_of_sample_labels() {
        let clean = generate_clean_stream(1, VehicleId(0), 3000, &DriveProfile::default()).unwrap();
        let sc =
            AttackScenario::new(AttackKind::CameraPatch, 0.7, 1230, 1470, [VehicleId(0)]).unwrap();
        let labeled = inject_attack(&clean, VehicleId(0), &sc, 2).unwrap();
        let windows = make_windows(&labeled, VehicleId(0), 50, 7).unwrap();
        for (k, w) in windows.iter().enumerate() {
            let brute = labeled[k * 7..k * 7 + 50]
                .iter()
                .any(|l| l.attack.is_some());
            assert_eq!(w.is_attack, brute);
            assert_eq!(w.attack_kind.is_some(), w.is_attack);
        }
        assert!(windows.iter().any(|w| w.is_attack));
    }

    #[test]
    fn errors() {
        assert_eq!(
            make_windows(&stream(400), VehicleId(0), 50, 1),
            Err(SensorError::StreamTooShort {
                len: 40,
                window: 50
            })
        );
        assert_eq!(
            make_windows(&stream(400), VehicleId(0), 0, 1),
            Err(SensorError::InvalidWindowShape)
        );
        let mut s = stream(1000);
        s[30].sample.timestamp_ms += 3;
        assert!(matches!(
            make_windows(&s, VehicleId(0), 50, 50),
            Err(SensorError::IrregularSpacing { .. })
        ));
    }
}

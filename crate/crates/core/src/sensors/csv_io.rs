use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureVector, SensorError, NOMINAL_ACTUATOR_LATENCY_MS};

/// Column schema of the feature CSV, in order.
pub const CSV_HEADER: [&str; 16] = [
    "timestamp_ms",
    "lidar_point_density",
    "lidar_mean_distance",
    "lidar_height_variance",
    "lidar_spatial_density",
    "cam_brightness",
    "cam_contrast",
    "cam_sharpness",
    "cam_saturation",
    "pos_x",
    "pos_y",
    "pos_z",
    "quat_w",
    "quat_x",
    "quat_y",
    "quat_z",
];

/// Reads one vehicle's feature stream. Rows are numbered from 1 (the first
/// data row after the header).
pub fn ingest_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>, SensorError> {
    read_feature_csv(File::open(path)?)
}

pub fn read_feature_csv(reader: impl Read) -> Result<Vec<FeatureVector>, SensorError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 16];
    for (slot, name) in index.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SensorError::MissingColumn(name.to_string()))?;
    }

    let mut out: Vec<FeatureVector> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let mut vals = [0.0f64; 16];
        let mut ts = 0i64;
        for (k, &col) in index.iter().enumerate() {
            let cell = record.get(col).unwrap_or("");
            let bad = || SensorError::NonNumeric {
                row,
                column: CSV_HEADER[k].to_string(),
                value: cell.to_string(),
            };
            if k == 0 {
                ts = cell.parse().map_err(|_| bad())?;
            } else {
                vals[k] = cell.parse().map_err(|_| bad())?;
                if !vals[k].is_finite() {
                    return Err(bad());
                }
            }
        }
        if let Some(prev) = out.last() {
            if ts <= prev.timestamp_ms {
                return Err(SensorError::NonMonotoneTimestamp {
                    row,
                    timestamp_ms: ts,
                });
            }
        }
        let fv = FeatureVector {
            timestamp_ms: ts,
            lidar_point_density: vals[1],
            lidar_mean_distance: vals[2],
            lidar_height_variance: vals[3],
            lidar_spatial_density: vals[4],
            cam_brightness: vals[5],
            cam_contrast: vals[6],
            cam_sharpness: vals[7],
            cam_saturation: vals[8],
            pos_x: vals[9],
            pos_y: vals[10],
            pos_z: vals[11],
            quat_w: vals[12],
            quat_x: vals[13],
            quat_y: vals[14],
            quat_z: vals[15],
            actuator_latency_ms: NOMINAL_ACTUATOR_LATENCY_MS,
        };
        fv.check(true)
            .map_err(|reason| SensorError::InvalidRow { row, reason })?;
        out.push(fv);
    }
    Ok(out)
}

pub fn export_feature_csv(
    path: impl AsRef<Path>,
    stream: &[FeatureVector],
) -> Result<(), SensorError> {
    write_feature_csv(File::create(path)?, stream)
}

/// Writes the stream with shortest round-trip float formatting, so
/// export→ingest reproduces every value bit-for-bit.
pub fn write_feature_csv(writer: impl Write, stream: &[FeatureVector]) -> Result<(), SensorError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for f in stream {
        w.write_record([
            f.timestamp_ms.to_string(),
            f.lidar_point_density.to_string(),
            f.lidar_mean_distance.to_string(),
            f.lidar_height_variance.to_string(),
            f.lidar_spatial_density.to_string(),
            f.cam_brightness.to_string(),
            f.cam_contrast.to_string(),
            f.cam_sharpness.to_string(),
            f.cam_saturation.to_string(),
            f.pos_x.to_string(),
            f.pos_y.to_string(),
            f.pos_z.to_string(),
            f.quat_w.to_string(),
            f.quat_x.to_string(),
            f.quat_y.to_string(),
            f.quat_z.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::VehicleId;
    use crate::sensors::{generate_clean_stream, DriveProfile};

    const HEADER: &str = "timestamp_ms,lidar_point_density,lidar_mean_distance,lidar_height_variance,lidar_spatial_density,cam_brightness,cam_contrast,cam_sharpness,cam_saturation,pos_x,pos_y,pos_z,quat_w,quat_x,quat_y,quat_z";

    #[test]
    fn header_matches_documented_schema() {
        assert_eq!(CSV_HEADER.join(","), HEADER);
    }

    #[test]
    fn three_rows() {
        let body = format!(
            "{HEADER}\n0,1,20,1.5,0.6,0.5,0.6,0.7,0.45,0,0,0,1,0,0,0\n10,1,20,1.5,0.6,0.5,0.6,0.7,0.45,0.1,0,0,1,0,0,0\n20,1,20,1.5,0.6,0.5,0.6,0.7,0.45,0.2,0,0,1,0,0,0\n"
        );
        let s = read_feature_csv(body.as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2].pos_x, 0.2);
    }

    #[test]
    fn bad_quaternion_names_row() {
        let body = format!(
            "{HEADER}\n0,1,20,1.5,0.6,0.5,0.6,0.7,0.45,0,0,0,1,0,0,0\n10,1,20,1.5,0.6,0.5,0.6,0.7,0.45,0.1,0,0,0.5,0,0,0\n"
        );
        match read_feature_csv(body.as_bytes()) {
            Err(SensorError::InvalidRow { row, reason }) => {
                assert_eq!(row, 2);
                assert!(reason.contains("quaternion"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_and_cell_errors() {
        let missing = "timestamp_ms,lidar_point_density\n0,1\n";
        assert_eq!(
            read_feature_csv(missing.as_bytes()),
            Err(SensorError::MissingColumn("lidar_mean_distance".into()))
        );
        let nonnum = format!("{HEADER}\n0,abc,20,1.5,0.6,0.5,0.6,0.7,0.45,0,0,0,1,0,0,0\n");
        assert!(matches!(
            read_feature_csv(nonnum.as_bytes()),
            Err(SensorError::NonNumeric { row: 1, .. })
        ));
        let backwards = format!(
            "{HEADER}\n10,1,20,1.5,0.6,0.5,0.6,0.7,0.45,0,0,0,1,0,0,0\n10,1,20,1.5,0.6,0.5,0.6,0.7,0.45,0,0,0,1,0,0,0\n"
        );
        assert_eq!(
            read_feature_csv(backwards.as_bytes()),
            Err(SensorError::NonMonotoneTimestamp {
                row: 2,
                timestamp_ms: 10
            })
        );
    }

    #[test]
    fn export_ingest_roundtrip() {
        let s = generate_clean_stream(11, VehicleId(2), 2000, &DriveProfile::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v2.csv");
        export_feature_csv(&path, &s).unwrap();
        assert_eq!(ingest_feature_csv(&path).unwrap(), s);
    }
}

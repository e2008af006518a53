//! Scenario metrics, their export formats and the per-window verdict log.
//!
//! # CSV schema
//!
//! Reports are exported in long format with the header `section,key,value`.
//! Sections `scenario`, `detection`, `federated`, `chain` and `network` hold
//! one row per field, keyed by field name. `per_attack_detection_rate` is
//! keyed by attack kind, `fl_convergence` by round number (the value is the
//! held-out loss) and `notes` by note index. Numbers are written in their
//! shortest exact decimal form, so an export re-imports to an equal report.
//!
//! Verdict logs use the header
//! `vehicle_id,window_start_ms,actual,predicted,attack_kind,anomaly_score,confidence`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::federated::quantile;
use crate::sensors::AttackKind;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown export format {0:?} (expected csv or json)")]
    UnknownFormat(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed row {row}: {reason}")]
    Malformed { row: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

/// Window-level confusion counts against injected ground truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 1.0,
            t => (self.tp + self.tn) as f64 / t as f64,
        }
    }

    /// 1.0 when nothing was flagged.
    pub fn precision(&self) -> f64 {
        match self.tp + self.fp {
            0 => 1.0,
            p => self.tp as f64 / p as f64,
        }
    }

    /// 1.0 when there was nothing to find.
    pub fn recall(&self) -> f64 {
        match self.tp + self.fn_ {
            0 => 1.0,
            p => self.tp as f64 / p as f64,
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub seed: u64,
    pub n_vehicles: usize,
    pub n_regions: usize,
    pub duration_s: f64,
    pub campaigns: usize,
    pub byzantine_clients: usize,
    pub crashed_validators: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub windows: u64,
    pub attack_windows: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub alpha_min: f64,
    /// Accuracy fell below `alpha_min`.
    pub alpha_min_violated: bool,
}

impl DetectionMetrics {
    pub fn from_confusion(c: &Confusion, alpha_min: f64) -> Self {
        DetectionMetrics {
            windows: c.total(),
            attack_windows: c.tp + c.fn_,
            true_positives: c.tp,
            false_positives: c.fp,
            true_negatives: c.tn,
            false_negatives: c.fn_,
            accuracy: c.accuracy(),
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            alpha_min,
            alpha_min_violated: c.accuracy() < alpha_min,
        }
    }

    pub fn confusion(&self) -> Confusion {
        Confusion {
            tp: self.true_positives,
            fp: self.false_positives,
            tn: self.true_negatives,
            fn_: self.false_negatives,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FederatedMetrics {
    pub rounds: u64,
    pub rounds_to_converge: u64,
    pub final_loss: f64,
    pub initial_loss: f64,
    pub updates_received: u64,
    pub updates_missing: u64,
    /// Region-rounds where fewer updates than the quorum arrived.
    pub missing_update_alarms: u64,
    pub poisoned_updates: u64,
    pub poisoned_flagged: u64,
    pub privacy_budget_basic: f64,
    pub privacy_budget_advanced: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMetrics {
    /// Every classified window counts as one candidate event.
    pub total_events: u64,
    pub escalated_events: u64,
    pub logged_events: u64,
    pub logged_fraction: f64,
    pub blocks_mined: u64,
    pub ledger_valid: bool,
    /// Mean simulated time from block assembly to commit.
    pub mean_block_time_s: f64,
    pub consensus_messages: u64,
    pub consensus_retries: u64,
    pub consensus_failures: u64,
    pub directives_issued: u64,
    /// Threat reports reaching a coordinator, per simulated second per region.
    pub throughput_threats_per_s_per_region: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub drop_count: u64,
    pub jam_windows: u64,
    /// Simulated vehicle-to-coordinator latency of delivered threat reports.
    pub tier2_latency_mean_ms: f64,
    /// Simulated vehicle-to-ledger time of logged threats.
    pub tier3_latency_mean_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub round: u64,
    pub loss: f64,
}

/// Everything a scenario run measures in simulated terms. It is a pure
/// function of the configuration; wall-clock timings live in [`WallClock`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: ScenarioInfo,
    pub detection: DetectionMetrics,
    pub per_attack_detection_rate: BTreeMap<String, f64>,
    pub federated: FederatedMetrics,
    pub fl_convergence: Vec<ConvergencePoint>,
    pub chain: ChainMetrics,
    pub network: NetworkMetrics,
    pub notes: Vec<String>,
}

/// Host timings. They vary between runs and are kept out of the report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub inference_samples: u64,
    pub latency_mean_ms: f64,
    pub latency_median_ms: f64,
    pub latency_p95_ms: f64,
    pub latency_max_ms: f64,
    pub tau_max_ms: f64,
    /// Windows whose inference exceeded `tau_max_ms`.
    pub tau_max_violations: u64,
    pub training_ms: f64,
    pub total_ms: f64,
}

impl WallClock {
    pub fn from_latencies(latencies_ms: &[f64], tau_max_ms: f64) -> Self {
        if latencies_ms.is_empty() {
            return WallClock {
                tau_max_ms,
                ..WallClock::default()
            };
        }
        let mut sorted = latencies_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        WallClock {
            inference_samples: sorted.len() as u64,
            latency_mean_ms: sorted.iter().sum::<f64>() / sorted.len() as f64,
            latency_median_ms: quantile(&sorted, 0.5),
            latency_p95_ms: quantile(&sorted, 0.95),
            latency_max_ms: sorted[sorted.len() - 1],
            tau_max_ms,
            tau_max_violations: sorted.iter().filter(|&&l| l > tau_max_ms).count() as u64,
            training_ms: 0.0,
            total_ms: 0.0,
        }
    }
}

/// First round whose loss lies within 5% of the final loss.
pub fn rounds_to_converge(series: &[ConvergencePoint]) -> u64 {
    let Some(last) = series.last() else { return 0 };
    let tol = 0.05 * last.loss.abs();
    series
        .iter()
        .find(|p| (p.loss - last.loss).abs() <= tol)
        .map_or(last.round, |p| p.round)
}

const STRUCT_SECTIONS: [&str; 5] = ["scenario", "detection", "federated", "chain", "network"];

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), ReportError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["section", "key", "value"])?;
        let tree = serde_json::to_value(self)?;
        for section in STRUCT_SECTIONS {
            for (key, value) in tree[section].as_object().expect("struct section") {
                out.write_record([section, key.as_str(), &scalar_text(value)])?;
            }
        }
        for (kind, rate) in &self.per_attack_detection_rate {
            out.write_record([
                "per_attack_detection_rate",
                kind.as_str(),
                &rate.to_string(),
            ])?;
        }
        for p in &self.fl_convergence {
            out.write_record(["fl_convergence", &p.round.to_string(), &p.loss.to_string()])?;
        }
        for (i, note) in self.notes.iter().enumerate() {
            out.write_record(["notes", &i.to_string(), note.as_str()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv(r: impl Read) -> Result<Self, ReportError> {
        let mut tree = Map::new();
        for s in STRUCT_SECTIONS {
            tree.insert(s.to_string(), Value::Object(Map::new()));
        }
        let mut rates = Map::new();
        let mut series = Vec::new();
        let mut notes = Vec::new();
        let mut reader = csv::Reader::from_reader(r);
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let bad = |reason: &str| ReportError::Malformed {
                row,
                reason: reason.to_string(),
            };
            let [section, key, value] = [0, 1, 2].map(|c| rec.get(c).unwrap_or_default());
            if rec.len() != 3 {
                return Err(bad("expected three columns"));
            }
            let number = || {
                value
                    .parse::<f64>()
                    .map_err(|_| bad("value is not a number"))
            };
            match section {
                "per_attack_detection_rate" => {
                    rates.insert(key.to_string(), number()?.into());
                }
                "fl_convergence" => {
                    let round = key
                        .parse::<u64>()
                        .map_err(|_| bad("round is not an integer"))?;
                    series.push(ConvergencePoint {
                        round,
                        loss: number()?,
                    });
                }
                "notes" => notes.push(value.to_string()),
                s if STRUCT_SECTIONS.contains(&s) => {
                    let v = serde_json::from_str::<Value>(value)
                        .unwrap_or_else(|_| Value::String(value.to_string()));
                    tree[s]
                        .as_object_mut()
                        .expect("section object")
                        .insert(key.to_string(), v);
                }
                _ => return Err(bad("unknown section")),
            }
        }
        tree.insert("per_attack_detection_rate".into(), Value::Object(rates));
        tree.insert("fl_convergence".into(), serde_json::to_value(series)?);
        tree.insert("notes".into(), serde_json::to_value(notes)?);
        Ok(serde_json::from_value(Value::Object(tree))?)
    }

    pub fn render(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Csv => self.to_csv(),
            ExportFormat::Json => self.to_json(),
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => f.to_string(),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// Writes `report` to `path` in the given format.
pub fn export_report(
    report: &MetricsReport,
    path: impl AsRef<Path>,
    format: ExportFormat,
) -> Result<(), ReportError> {
    std::fs::write(path, report.render(format))?;
    Ok(())
}

/// Reads a report back, choosing the format from the file extension.
pub fn import_report(path: impl AsRef<Path>) -> Result<MetricsReport, ReportError> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default();
    let format: ExportFormat = ext.parse()?;
    let text = std::fs::read_to_string(path)?;
    match format {
        ExportFormat::Csv => MetricsReport::read_csv(text.as_bytes()),
        ExportFormat::Json => MetricsReport::from_json(&text),
    }
}

/// Outcome of tier-1 classification on one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub vehicle_id: u32,
    pub window_start_ms: i64,
    pub actual: bool,
    pub predicted: bool,
    pub attack_kind: Option<AttackKind>,
    pub anomaly_score: f64,
    pub confidence: f64,
}

pub fn write_verdicts_csv(w: impl Write, records: &[VerdictRecord]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "vehicle_id",
        "window_start_ms",
        "actual",
        "predicted",
        "attack_kind",
        "anomaly_score",
        "confidence",
    ])?;
    for r in records {
        out.write_record([
            r.vehicle_id.to_string(),
            r.window_start_ms.to_string(),
            u8::from(r.actual).to_string(),
            u8::from(r.predicted).to_string(),
            r.attack_kind
                .map_or_else(String::new, |k| k.name().to_string()),
            r.anomaly_score.to_string(),
            r.confidence.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_verdicts_csv(r: impl Read) -> Result<Vec<VerdictRecord>, ReportError> {
    let mut reader = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |reason: String| ReportError::Malformed { row: i + 2, reason };
        let field = |c: usize| rec.get(c).ok_or_else(|| bad(format!("missing column {c}")));
        let flag = |c: usize| match field(c)? {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(bad(format!("expected 0 or 1, got {other:?}"))),
        };
        let num = |c: usize| field(c)?.parse::<f64>().map_err(|e| bad(e.to_string()));
        let kind = match field(4)? {
            "" => None,
            k => Some(k.parse::<AttackKind>().map_err(|e| bad(e.to_string()))?),
        };
        out.push(VerdictRecord {
            vehicle_id: field(0)?
                .parse()
                .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            window_start_ms: field(1)?
                .parse()
                .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            actual: flag(2)?,
            predicted: flag(3)?,
            attack_kind: kind,
            anomaly_score: num(5)?,
            confidence: num(6)?,
        });
    }
    Ok(out)
}

pub fn confusion_of(records: &[VerdictRecord]) -> Confusion {
    let mut c = Confusion::default();
    for r in records {
        c.record(r.actual, r.predicted);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsReport {
        let c = Confusion {
            tp: 30,
            fp: 3,
            tn: 900,
            fn_: 7,
        };
        MetricsReport {
            scenario: ScenarioInfo {
                seed: 7,
                n_vehicles: 100,
                n_regions: 4,
                duration_s: 20.0,
                campaigns: 8,
                byzantine_clients: 20,
                crashed_validators: 0,
            },
            detection: DetectionMetrics::from_confusion(&c, 0.94),
            per_attack_detection_rate: [
                ("GpsSpoof".to_string(), 0.875),
                ("CommJam".to_string(), 1.0),
            ]
            .into(),
            federated: FederatedMetrics {
                rounds: 3,
                rounds_to_converge: 2,
                final_loss: 0.312_345_678_9,
                initial_loss: std::f64::consts::LN_2,
                updates_received: 290,
                updates_missing: 10,
                missing_update_alarms: 1,
                poisoned_updates: 9,
                poisoned_flagged: 8,
                privacy_budget_basic: 3.0,
                privacy_budget_advanced: 1.0 / 3.0,
            },
            fl_convergence: vec![
                ConvergencePoint {
                    round: 1,
                    loss: 0.5,
                },
                ConvergencePoint {
                    round: 2,
                    loss: 0.33,
                },
                ConvergencePoint {
                    round: 3,
                    loss: 0.312_345_678_9,
                },
            ],
            chain: ChainMetrics {
                total_events: 940,
                escalated_events: 33,
                logged_events: 25,
                logged_fraction: 25.0 / 940.0,
                blocks_mined: 5,
                ledger_valid: true,
                mean_block_time_s: 2.0,
                consensus_messages: 1500,
                consensus_retries: 0,
                consensus_failures: 0,
                directives_issued: 60,
                throughput_threats_per_s_per_region: 0.4125,
            },
            network: NetworkMetrics {
                messages_sent: 5000,
                messages_delivered: 4900,
                drop_count: 100,
                jam_windows: 3,
                tier2_latency_mean_ms: 100.25,
                tier3_latency_mean_ms: 2345.5,
            },
            notes: vec!["a note, with a comma".into(), "\"quoted\"".into()],
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let r = sample();
        assert_eq!(MetricsReport::read_csv(r.to_csv().as_bytes()).unwrap(), r);
        assert_eq!(MetricsReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn f1_column_is_harmonic_mean() {
        let d = sample().detection;
        assert!((d.f1 - 2.0 * d.precision * d.recall / (d.precision + d.recall)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_confusions() {
        let none = Confusion {
            tn: 10,
            ..Confusion::default()
        };
        assert_eq!(
            (none.precision(), none.recall(), none.accuracy()),
            (1.0, 1.0, 1.0)
        );
        let blind = Confusion {
            fn_: 3,
            tn: 1,
            ..Confusion::default()
        };
        assert_eq!(
            (blind.precision(), blind.recall(), blind.f1()),
            (1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn unknown_format_is_an_error() {
        assert!(matches!(
            "xml".parse::<ExportFormat>(),
            Err(ReportError::UnknownFormat(_))
        ));
        assert!(matches!(
            import_report("report.xml"),
            Err(ReportError::UnknownFormat(_))
        ));
    }

    #[test]
    fn convergence_round_and_percentiles() {
        let s: Vec<ConvergencePoint> = [1.0, 0.5, 0.31, 0.3]
            .iter()
            .enumerate()
            .map(|(i, &loss)| ConvergencePoint {
                round: i as u64 + 1,
                loss,
            })
            .collect();
        assert_eq!(rounds_to_converge(&s), 3);
        assert_eq!(rounds_to_converge(&[]), 0);
        let w = WallClock::from_latencies(&[1.0, 2.0, 3.0, 4.0, 20.0], 10.0);
        assert_eq!(w.tau_max_violations, 1);
        assert!(w.latency_p95_ms >= w.latency_median_ms);
        assert_eq!(w.latency_mean_ms, 6.0);
    }

    #[test]
    fn verdict_log_round_trip() {
        let recs = vec![
            VerdictRecord {
                vehicle_id: 3,
                window_start_ms: 500,
                actual: true,
                predicted: false,
                attack_kind: Some(AttackKind::ImuManip),
                anomaly_score: 0.41,
                confidence: 0.93,
            },
            VerdictRecord {
                vehicle_id: 4,
                window_start_ms: 0,
                actual: false,
                predicted: false,
                attack_kind: None,
                anomaly_score: 0.01,
                confidence: 0.99,
            },
        ];
        let mut buf = Vec::new();
        write_verdicts_csv(&mut buf, &recs).unwrap();
        assert_eq!(read_verdicts_csv(buf.as_slice()).unwrap(), recs);
        assert_eq!(
            confusion_of(&recs),
            Confusion {
                fn_: 1,
                tn: 1,
                ..Confusion::default()
            }
        );
    }
}

//! Fleet-size sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ScenarioConfig};
use super::metrics::{MetricsReport, ReportError, WallClock};
use super::scenario::{run_scenario_full, ScenarioError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub vehicle_counts: Vec<usize>,
    pub repetitions: usize,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    pub fn new(base: ScenarioConfig) -> Self {
        SweepSpec {
            vehicle_counts: vec![100, 250, 500, 1000],
            repetitions: 1,
            base,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::Invalid {
            field: "vehicle_counts",
            reason: reason.to_string(),
        };
        if self.vehicle_counts.is_empty() {
            return Err(bad("at least one count is required"));
        }
        if self.vehicle_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("counts must be strictly ascending"));
        }
        if self.repetitions == 0 {
            return Err(ConfigError::Invalid {
                field: "repetitions",
                reason: "must be positive".into(),
            });
        }
        for &n in &self.vehicle_counts {
            self.config_for(n, 0).validate()?;
        }
        Ok(())
    }

    /// Repetition `r` runs with seed `base.seed + r`.
    pub fn config_for(&self, n_vehicles: usize, repetition: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_vehicles,
            seed: self.base.seed.wrapping_add(repetition as u64),
            ..self.base.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub n_vehicles: usize,
    pub repetition: usize,
    pub report: MetricsReport,
    pub wall_clock: WallClock,
}

/// Per-count averages over repetitions and the trend checks derived from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub vehicle_counts: Vec<usize>,
    pub latency_mean_ms: Vec<f64>,
    pub throughput_per_region: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub tau_max_ms: f64,
    /// Tier-1 mean latency stays below `tau_max_ms` at every scale.
    pub latency_flat: bool,
    pub throughput_non_decreasing: bool,
    /// Accuracy at the smallest fleet minus accuracy at the largest, in
    /// percentage points.
    pub accuracy_degradation_pp: f64,
    /// Least-squares slope of accuracy against fleet size, in percentage
    /// points per 100 vehicles.
    pub accuracy_slope_pp_per_100: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub trend: TrendSummary,
}

/// Runs every (count, repetition) pair, one scenario per worker.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, ScenarioError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = spec
        .vehicle_counts
        .iter()
        .flat_map(|&n| (0..spec.repetitions).map(move |r| (n, r)))
        .collect();
    let points = jobs
        .into_par_iter()
        .map(|(n, r)| {
            let run = run_scenario_full(&spec.config_for(n, r))?;
            Ok(SweepPoint {
                n_vehicles: n,
                repetition: r,
                report: run.report,
                wall_clock: run.wall_clock,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let trend = summarize(spec, &points);
    Ok(SweepResult { points, trend })
}

fn summarize(spec: &SweepSpec, points: &[SweepPoint]) -> TrendSummary {
    let mean_of = |n: usize, f: &dyn Fn(&SweepPoint) -> f64| {
        let xs: Vec<f64> = points.iter().filter(|p| p.n_vehicles == n).map(f).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let counts = spec.vehicle_counts.clone();
    let latency: Vec<f64> = counts
        .iter()
        .map(|&n| mean_of(n, &|p| p.wall_clock.latency_mean_ms))
        .collect();
    let throughput: Vec<f64> = counts
        .iter()
        .map(|&n| mean_of(n, &|p| p.report.chain.throughput_threats_per_s_per_region))
        .collect();
    let accuracy: Vec<f64> = counts
        .iter()
        .map(|&n| mean_of(n, &|p| p.report.detection.accuracy))
        .collect();

    let xs: Vec<f64> = counts.iter().map(|&n| n as f64 / 100.0).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = accuracy.iter().sum::<f64>() / accuracy.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&accuracy)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let slope = if sxx > 0.0 { 100.0 * sxy / sxx } else { 0.0 };

    TrendSummary {
        latency_flat: latency.iter().all(|&l| l < spec.base.tau_max_ms),
        throughput_non_decreasing: throughput.windows(2).all(|w| w[1] >= w[0]),
        accuracy_degradation_pp: 100.0 * (accuracy[0] - accuracy[accuracy.len() - 1]),
        accuracy_slope_pp_per_100: slope,
        tau_max_ms: spec.base.tau_max_ms,
        vehicle_counts: counts,
        latency_mean_ms: latency,
        throughput_per_region: throughput,
        accuracy,
    }
}

/// One row per run: the quantities plotted against fleet size.
pub fn write_sweep_csv(w: impl Write, points: &[SweepPoint]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "n_vehicles",
        "repetition",
        "seed",
        "accuracy",
        "f1",
        "logged_fraction",
        "throughput_threats_per_s_per_region",
        "blocks_mined",
        "tier2_latency_mean_ms",
        "tier1_latency_mean_ms",
        "tier1_latency_p95_ms",
    ])?;
    for p in points {
        let r = &p.report;
        out.write_record([
            p.n_vehicles.to_string(),
            p.repetition.to_string(),
            r.scenario.seed.to_string(),
            r.detection.accuracy.to_string(),
            r.detection.f1.to_string(),
            r.chain.logged_fraction.to_string(),
            r.chain.throughput_threats_per_s_per_region.to_string(),
            r.chain.blocks_mined.to_string(),
            r.network.tier2_latency_mean_ms.to_string(),
            p.wall_clock.latency_mean_ms.to_string(),
            p.wall_clock.latency_p95_ms.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_must_ascend() {
        let mut spec = SweepSpec::new(ScenarioConfig::reference());
        spec.validate().unwrap();
        spec.vehicle_counts = vec![250, 100];
        assert!(spec.validate().is_err());
        spec.vehicle_counts = vec![100, 100];
        assert!(spec.validate().is_err());
        spec.vehicle_counts = vec![100, 2000];
        assert!(matches!(
            spec.validate(),
            Err(ConfigError::Invalid {
                field: "n_vehicles",
                ..
            })
        ));
    }

    #[test]
    fn repetitions_shift_the_seed() {
        let spec = SweepSpec::new(ScenarioConfig::reference());
        assert_eq!(spec.config_for(250, 2).seed, spec.base.seed + 2);
        assert_eq!(spec.config_for(250, 2).n_vehicles, 250);
    }
}

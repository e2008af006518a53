//! Scenario configuration, end-to-end orchestration, metrics and the
//! acceptance suite.

pub mod acceptance;
pub mod campaign;
pub mod config;
pub mod metrics;
pub mod scenario;
pub mod sweep;

pub use acceptance::{run_acceptance, run_criterion, CriterionResult, Overrides, CRITERIA};
pub use campaign::{largest_remainder, plan_campaigns};
pub use config::{
    CampaignConfig, ChannelSettings, ConfigError, FederatedSettings, ScenarioConfig,
    ValidatorSettings,
};
pub use metrics::{
    confusion_of, export_report, import_report, read_verdicts_csv, rounds_to_converge,
    write_verdicts_csv, Confusion, ExportFormat, MetricsReport, ReportError, VerdictRecord,
    WallClock,
};
pub use scenario::{run_scenario, run_scenario_full, ScenarioError, ScenarioRun};
pub use sweep::{run_sweep, write_sweep_csv, SweepPoint, SweepResult, SweepSpec, TrendSummary};

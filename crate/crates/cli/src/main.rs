use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use haven::chain::write_ledger_jsonl;
use haven::harness::{
    export_report, run_acceptance, run_scenario_full, run_sweep, write_sweep_csv,
    write_verdicts_csv, ConfigError, ExportFormat, Overrides, ScenarioConfig, ScenarioError,
    SweepSpec,
};

/// Drives HAVEN scenarios, fleet-size sweeps and the acceptance suite.
#[derive(Parser)]
#[command(name = "haven", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Json => ExportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write the report, verdicts, ledger and timings.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Replaces the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario at several fleet sizes.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "100,250,500,1000")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Run the acceptance criteria; exits with 3 if any fails.
    Acceptance {
        /// Criterion id or a substring of its name.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Print a configuration template.
    GenConfig {
        #[arg(long, default_value = "reference")]
        template: String,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
    Acceptance,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(config: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    let cfg = match config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::reference(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(
    config: Option<&Path>,
    out: &Path,
    format: Format,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = run_scenario_full(&cfg)?;
    fs::create_dir_all(out).map_err(runtime)?;
    let format = ExportFormat::from(format);
    export_report(
        &result.report,
        out.join(format!("report.{}", format.extension())),
        format,
    )
    .map_err(runtime)?;
    write_verdicts_csv(
        BufWriter::new(File::create(out.join("verdicts.csv")).map_err(runtime)?),
        &result.verdicts,
    )
    .map_err(runtime)?;
    write_ledger_jsonl(
        BufWriter::new(File::create(out.join("ledger.jsonl")).map_err(runtime)?),
        &result.ledger,
    )
    .map_err(runtime)?;
    let timing = serde_json::to_string_pretty(&result.wall_clock).map_err(runtime)?;
    fs::write(out.join("timing.json"), timing).map_err(runtime)?;

    let d = &result.report.detection;
    let c = &result.report.chain;
    println!(
        "accuracy {:.4}  f1 {:.4}  logged {:.4}  blocks {}  ledger valid {}  tier-1 mean {:.4} ms",
        d.accuracy,
        d.f1,
        c.logged_fraction,
        c.blocks_mined,
        c.ledger_valid,
        result.wall_clock.latency_mean_ms
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn sweep(
    config: Option<&Path>,
    counts: Vec<usize>,
    reps: usize,
    out: &Path,
) -> Result<(), Failure> {
    let spec = SweepSpec {
        vehicle_counts: counts,
        repetitions: reps,
        base: load(config)?,
    };
    spec.validate()?;
    let result = run_sweep(&spec)?;
    fs::create_dir_all(out).map_err(runtime)?;
    write_sweep_csv(
        BufWriter::new(File::create(out.join("sweep.csv")).map_err(runtime)?),
        &result.points,
    )
    .map_err(runtime)?;
    let trend = serde_json::to_string_pretty(&result.trend).map_err(runtime)?;
    fs::write(out.join("trend.json"), &trend).map_err(runtime)?;
    println!("{trend}");
    Ok(())
}

fn acceptance(filter: Option<&str>) -> Result<(), Failure> {
    let results = run_acceptance(filter, &Overrides::default());
    if results.is_empty() {
        return Err(Failure::Config(format!(
            "no criterion matches {:?}",
            filter.unwrap_or_default()
        )));
    }
    for r in &results {
        println!("{r}");
    }
    if results.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn gen_config(template: &str, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = match template {
        "reference" => ScenarioConfig::reference(),
        other => {
            return Err(Failure::Config(format!(
                "unknown template {other:?}; available: reference"
            )))
        }
    };
    let text = cfg.to_json_pretty();
    match out {
        Some(p) => fs::write(p, text).map_err(runtime)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            format,
            seed,
        } => run(config.as_deref(), &out, format, seed),
        Command::Sweep {
            config,
            counts,
            reps,
            out,
        } => sweep(config.as_deref(), counts, reps, &out),
        Command::Acceptance { filter } => acceptance(filter.as_deref()),
        Command::GenConfig { template, out } => gen_config(&template, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance) => {
            eprintln!("acceptance failed");
            ExitCode::from(3)
        }
    }
}

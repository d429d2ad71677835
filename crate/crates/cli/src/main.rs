//! Command line front end: scenario configs in, traces, metrics and SVG
//! figures out.
//!
//! Exit codes are a stable contract: 0 success, 1 output I/O failure,
//! 2 config or trace parse failure, 3 infeasible formation, 4 optimizer
//! failure, 5 simulation failure.

mod compare;
mod config;
mod output;
mod plot;
mod runner;

use clap::{Parser, Subcommand};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use omniform::optimizer::optimize_headings;

use config::{Config, ConfigError, TOOL_VERSION};
use output::{RunManifest, TraceHeader};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Formation(String),
    #[error("{0}")]
    Optimizer(String),
    #[error("{0}")]
    Simulation(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Formation(_) => 3,
            CliError::Optimizer(_) => 4,
            CliError::Simulation(_) => 5,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(error: ConfigError) -> Self {
        match error {
            ConfigError::Toml(_) | ConfigError::Invalid(_) => CliError::Parse(error.to_string()),
            ConfigError::Formation(_) => CliError::Formation(error.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "omniform",
    version,
    about = "Simulate docked omni-wheel module structures and their controllers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize wheel headings for the formation in a config.
    Optimize {
        /// Scenario config (TOML).
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario; write trace.csv, metrics.json and manifest.json.
    Run {
        /// Scenario config (TOML).
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's integration step, seconds.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Rerun one scenario under several heading configurations and rank
    /// their tracking energies.
    Compare {
        /// Scenario config (TOML).
        config: PathBuf,
        /// Headings list with [[configuration]] entries (TOML).
        headings: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's integration step, seconds.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Render a trace CSV as an SVG figure.
    Plot {
        /// Trace file written by `run`.
        trace: PathBuf,
        /// Output file; defaults to the trace path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize { config, out, seed } => cmd_optimize(&config, &out, seed),
        Command::Run {
            config,
            out,
            seed,
            dt,
        } => cmd_run(&config, &out, seed, dt),
        Command::Compare {
            config,
            headings,
            out,
            seed,
            dt,
        } => cmd_compare(&config, &headings, &out, seed, dt),
        Command::Plot { trace, out } => cmd_plot(&trace, out),
    };
    if let Err(error) = result {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}

/// Reads and resolves a config, then applies command line overrides so the
/// digest reflects what actually runs.
fn load_config(path: &Path, seed: Option<u64>, dt: Option<f64>) -> Result<Config, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = Config::from_toml(&text)?;
    if let Some(seed) = seed {
        config.rng_seed = seed;
        config.optimizer.rng_seed = seed;
    }
    if let Some(dt) = dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(CliError::Parse(format!(
                "dt must be strictly positive, got {dt}"
            )));
        }
        config.options.dt = dt;
    }
    Ok(config)
}

fn io_err(error: std::io::Error) -> CliError {
    CliError::Io(error.to_string())
}

#[derive(Serialize)]
struct HeadingsFile {
    angles: Vec<f64>,
    angles_deg: Vec<f64>,
    objective_value: f64,
    starts_converged: usize,
    metrics: HeadingsFileMetrics,
}

#[derive(Serialize)]
struct HeadingsFileMetrics {
    rank: usize,
    sigma_max: f64,
    condition_number: f64,
}

#[derive(Serialize)]
struct OptimizeMetrics {
    objective_value: f64,
    rank: usize,
    sigma_max: f64,
    condition_number: Option<f64>,
    starts_converged: usize,
    angles: Vec<f64>,
}

fn cmd_optimize(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let config = load_config(config_path, seed, None)?;
    if !config.needs_structure() {
        return Err(CliError::Parse(
            "single_track configs have no formation to optimize".into(),
        ));
    }
    let formation = config
        .build_formation()
        .map_err(|e| CliError::Formation(e.to_string()))?;
    let started = output::unix_now();
    let result = optimize_headings(&formation, config.module.wheel_radius, &config.optimizer)
        .map_err(|e| CliError::Optimizer(e.to_string()))?;

    fs::create_dir_all(out).map_err(io_err)?;
    let angles = result.headings.angles().to_vec();
    let headings_file = HeadingsFile {
        angles_deg: angles.iter().map(|a| a.to_degrees()).collect(),
        angles: angles.clone(),
        objective_value: result.objective_value,
        starts_converged: result.starts_converged,
        metrics: HeadingsFileMetrics {
            rank: result.metrics.rank,
            sigma_max: result.metrics.sigma_max,
            condition_number: result.metrics.condition_number,
        },
    };
    let headings_path = out.join("headings.toml");
    fs::write(
        &headings_path,
        toml::to_string(&headings_file).expect("headings serialize"),
    )
    .map_err(io_err)?;
    let metrics_path = out.join("metrics.json");
    output::write_json(
        &metrics_path,
        &OptimizeMetrics {
            objective_value: result.objective_value,
            rank: result.metrics.rank,
            sigma_max: result.metrics.sigma_max,
            condition_number: result.metrics.condition_number.is_finite().then_some(result.metrics.condition_number),
            starts_converged: result.starts_converged,
            angles: angles.clone(),
        },
    )
    .map_err(io_err)?;
    let manifest_path = out.join("manifest.json");
    output::write_json(
        &manifest_path,
        &RunManifest {
            config_digest: config.digest(),
            tool_version: TOOL_VERSION.to_string(),
            rng_seed: config.rng_seed,
            started_unix: started,
            finished_unix: output::unix_now(),
            outputs: vec![
                headings_path.display().to_string(),
                metrics_path.display().to_string(),
            ],
        },
    )
    .map_err(io_err)?;

    println!(
        "objective {:.6} over {} modules, headings [deg]: {}",
        result.objective_value,
        angles.len(),
        angles
            .iter()
            .map(|a| format!("{:.2}", a.to_degrees()))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("wrote {}", headings_path.display());
    Ok(())
}

fn cmd_run(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    dt: Option<f64>,
) -> Result<(), CliError> {
    let config = load_config(config_path, seed, dt)?;
    let started = output::unix_now();
    let (prepared, trace, metrics) = runner::run_config(&config)?;

    fs::create_dir_all(out).map_err(io_err)?;
    let trace_path = out.join("trace.csv");
    let digest = config.digest();
    let reference = config.reference_description();
    let header = TraceHeader {
        config_digest: &digest,
        rng_seed: config.rng_seed,
        kind: config.kind.as_str(),
        reference: &reference,
        headings: prepared.headings.as_deref(),
    };
    output::write_trace_csv(&trace_path, &trace, &header).map_err(io_err)?;
    let metrics_path = out.join("metrics.json");
    output::write_json(&metrics_path, &metrics).map_err(io_err)?;
    let manifest_path = out.join("manifest.json");
    output::write_json(
        &manifest_path,
        &RunManifest {
            config_digest: config.digest(),
            tool_version: TOOL_VERSION.to_string(),
            rng_seed: config.rng_seed,
            started_unix: started,
            finished_unix: output::unix_now(),
            outputs: vec![
                trace_path.display().to_string(),
                metrics_path.display().to_string(),
            ],
        },
    )
    .map_err(io_err)?;

    println!(
        "{} rows over {:.2} s (navigate {:.2} s, dock {:.2} s, track {:.2} s)",
        trace.rows().len(),
        metrics.total_time,
        metrics.stage_durations.navigate,
        metrics.stage_durations.dock,
        metrics.stage_durations.track,
    );
    println!(
        "final position error {:.4} m, heading error {:.4} rad, energy {:.4}",
        metrics.final_position_error, metrics.final_error.etheta, metrics.energy
    );
    println!("wrote {}", trace_path.display());
    Ok(())
}

fn cmd_compare(
    config_path: &Path,
    headings_path: &Path,
    out: &Path,
    seed: Option<u64>,
    dt: Option<f64>,
) -> Result<(), CliError> {
    let config = load_config(config_path, seed, dt)?;
    let text = fs::read_to_string(headings_path).map_err(|e| {
        CliError::Parse(format!(
            "cannot read headings list {}: {e}",
            headings_path.display()
        ))
    })?;
    let entries = compare::parse_entries(&text)?;
    fs::create_dir_all(out).map_err(io_err)?;
    let started = output::unix_now();
    let outcomes = compare::run_all(&config, &entries, out)?;

    let table = compare::render_energy_table(&outcomes);
    let table_path = out.join("energy_table.csv");
    fs::write(&table_path, &table).map_err(io_err)?;
    let svg_path = out.join("energy_comparison.svg");
    fs::write(&svg_path, compare::render_energy_svg(&outcomes)).map_err(io_err)?;
    output::write_json(
        &out.join("manifest.json"),
        &RunManifest {
            config_digest: config.digest(),
            tool_version: TOOL_VERSION.to_string(),
            rng_seed: config.rng_seed,
            started_unix: started,
            finished_unix: output::unix_now(),
            outputs: vec![
                table_path.display().to_string(),
                svg_path.display().to_string(),
            ],
        },
    )
    .map_err(io_err)?;

    print!("{table}");
    println!("wrote {}", table_path.display());
    Ok(())
}

fn cmd_plot(trace_path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let trace = output::read_trace_csv(trace_path).map_err(|e| CliError::Parse(e.to_string()))?;
    let out = out.unwrap_or_else(|| trace_path.with_extension("svg"));
    plot::write_svg(&out, &trace).map_err(io_err)?;
    println!("wrote {}", out.display());
    Ok(())
}

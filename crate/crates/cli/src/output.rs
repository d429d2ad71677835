//! File outputs: trace CSV, metrics JSON, run manifest.
//!
//! Traces are plain CSV behind a `#`-prefixed header block, so they load in
//! any table tool while still carrying the config digest and units. All floats
//! print with Rust's shortest round-trip formatting; rerunning a config with
//! the same seed reproduces every byte (wall time lives only in the manifest).

use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

use omniform::control::TrackingError;
use omniform::model::Pose2D;
use omniform::sim::trace::{ModuleSample, ScenarioTrace, TraceRow};

use crate::config::TOOL_VERSION;

#[derive(Debug, Error)]
pub enum TraceReadError {
    #[error("cannot read trace: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error("trace has a header but no data rows")]
    Empty,
    #[error("non-finite value in column {column} at data row {row}")]
    NonFinite { row: usize, column: String },
}

/// Context lines written into a trace header.
pub struct TraceHeader<'a> {
    pub config_digest: &'a str,
    pub rng_seed: u64,
    pub kind: &'a str,
    pub reference: &'a str,
    /// Structure-frame wheel headings, rad; absent for a single module.
    pub headings: Option<&'a [f64]>,
}

fn push_float(line: &mut String, value: f64) {
    let _ = write!(line, ",{value}");
}

/// Renders the full trace file, header block plus CSV body.
pub fn render_trace_csv(trace: &ScenarioTrace, header: &TraceHeader) -> String {
    let mut out = String::new();
    out.push_str("# omniform trace v1\n");
    let _ = writeln!(out, "# tool_version = {TOOL_VERSION}");
    let _ = writeln!(out, "# config_digest = {}", header.config_digest);
    let _ = writeln!(out, "# rng_seed = {}", header.rng_seed);
    let _ = writeln!(out, "# kind = {}", header.kind);
    let _ = writeln!(out, "# dt = {}", trace.dt());
    let _ = writeln!(out, "# n_modules = {}", trace.n_modules());
    let _ = writeln!(out, "# reference = {}", header.reference);
    if let Some(headings) = header.headings {
        let list: Vec<String> = headings.iter().map(|a| a.to_string()).collect();
        let _ = writeln!(out, "# headings_rad = [{}]", list.join(", "));
    }
    out.push_str("# stages: 1 = navigate, 2 = dock, 3 = track\n");
    out.push_str("# units: t s, positions m, angles rad, power rad^2/s^2, m{i}_omega rad/s\n");

    out.push_str("t,stage,x,y,theta,ref_x,ref_y,ref_theta,e_x,e_y,e_theta,power");
    for i in 0..trace.n_modules() {
        let _ = write!(out, ",m{i}_x,m{i}_y,m{i}_theta,m{i}_omega");
    }
    out.push('\n');

    for row in trace.rows() {
        let mut line = row.t.to_string();
        let _ = write!(line, ",{}", row.stage);
        push_float(&mut line, row.structure.x);
        push_float(&mut line, row.structure.y);
        push_float(&mut line, row.structure.theta);
        push_float(&mut line, row.reference.x);
        push_float(&mut line, row.reference.y);
        push_float(&mut line, row.reference.theta);
        push_float(&mut line, row.error.ex);
        push_float(&mut line, row.error.ey);
        push_float(&mut line, row.error.etheta);
        push_float(&mut line, row.power);
        for m in &row.modules {
            push_float(&mut line, m.x);
            push_float(&mut line, m.y);
            push_float(&mut line, m.theta);
            push_float(&mut line, m.omega);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn write_trace_csv(
    path: &Path,
    trace: &ScenarioTrace,
    header: &TraceHeader,
) -> std::io::Result<()> {
    fs::write(path, render_trace_csv(trace, header))
}

const FIXED_COLUMNS: usize = 12;

/// Reads a trace back, checking that every value is finite. Rows are reported
/// 1-based, counting data rows only.
pub fn read_trace_csv(path: &Path) -> Result<ScenarioTrace, TraceReadError> {
    let text = fs::read_to_string(path)?;
    let mut dt: Option<f64> = None;
    for line in text.lines().filter(|l| l.starts_with('#')) {
        if let Some(value) = line.strip_prefix("# dt = ") {
            dt = value.trim().parse().ok();
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| TraceReadError::Malformed(e.to_string()))?
        .clone();
    if headers.len() < FIXED_COLUMNS
        || headers.get(0) != Some("t")
        || headers.get(11) != Some("power")
    {
        return Err(TraceReadError::Malformed(format!(
            "unexpected column layout: {:?}",
            headers.iter().take(FIXED_COLUMNS).collect::<Vec<_>>()
        )));
    }
    if (headers.len() - FIXED_COLUMNS) % 4 != 0 {
        return Err(TraceReadError::Malformed(format!(
            "{} columns do not decompose into {} fixed plus per-module groups of 4",
            headers.len(),
            FIXED_COLUMNS
        )));
    }
    let n_modules = (headers.len() - FIXED_COLUMNS) / 4;

    let mut rows: Vec<TraceRow> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let row_number = index + 1;
        let record = record.map_err(|e| TraceReadError::Malformed(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(TraceReadError::Malformed(format!(
                "data row {row_number} has {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        let field = |i: usize| -> Result<f64, TraceReadError> {
            let raw = record.get(i).unwrap_or_default();
            let value: f64 = raw.parse().map_err(|_| {
                TraceReadError::Malformed(format!(
                    "data row {row_number}, column {}: cannot parse {raw:?} as a number",
                    headers.get(i).unwrap_or("?")
                ))
            })?;
            if !value.is_finite() {
                return Err(TraceReadError::NonFinite {
                    row: row_number,
                    column: headers.get(i).unwrap_or("?").to_string(),
                });
            }
            Ok(value)
        };
        let stage: u8 = record.get(1).unwrap_or_default().parse().map_err(|_| {
            TraceReadError::Malformed(format!(
                "data row {row_number}: stage {:?} is not a small integer",
                record.get(1).unwrap_or_default()
            ))
        })?;
        let mut modules = Vec::with_capacity(n_modules);
        for m in 0..n_modules {
            let base = FIXED_COLUMNS + 4 * m;
            modules.push(ModuleSample {
                x: field(base)?,
                y: field(base + 1)?,
                theta: field(base + 2)?,
                omega: field(base + 3)?,
            });
        }
        rows.push(TraceRow {
            t: field(0)?,
            stage,
            structure: Pose2D {
                x: field(2)?,
                y: field(3)?,
                theta: field(4)?,
            },
            reference: Pose2D {
                x: field(5)?,
                y: field(6)?,
                theta: field(7)?,
            },
            error: TrackingError {
                ex: field(8)?,
                ey: field(9)?,
                etheta: field(10)?,
            },
            power: field(11)?,
            modules,
        });
    }
    if rows.is_empty() {
        return Err(TraceReadError::Empty);
    }

    let dt = dt.unwrap_or_else(|| {
        if rows.len() >= 2 {
            rows[1].t - rows[0].t
        } else {
            0.01
        }
    });
    Ok(ScenarioTrace::new(dt, rows))
}

// ---------------------------------------------------------------------------
// metrics and manifest

#[derive(Debug, Serialize)]
pub struct StageDurations {
    pub navigate: f64,
    pub dock: f64,
    pub track: f64,
}

#[derive(Debug, Serialize)]
pub struct FinalError {
    pub ex: f64,
    pub ey: f64,
    pub etheta: f64,
}

#[derive(Debug, Serialize)]
pub struct StrengthOut {
    pub max_force_utilization: f64,
    pub max_torque_utilization: f64,
}

/// Summary numbers for one run; `None` fields do not apply to the scenario
/// kind (and an infinite condition number also reads as null).
#[derive(Debug, Serialize)]
pub struct Metrics {
    pub kind: String,
    pub n_modules: usize,
    pub total_time: f64,
    pub stage_durations: StageDurations,
    pub final_error: FinalError,
    pub final_position_error: f64,
    pub max_position_error: f64,
    pub rms_position_error: f64,
    pub energy: f64,
    pub max_wheel_speed: f64,
    pub saturation_steps: usize,
    pub objective_value: Option<f64>,
    pub sigma_max: Option<f64>,
    pub condition_number: Option<f64>,
    pub headings: Option<Vec<f64>>,
    pub strength: Option<StrengthOut>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: String,
    pub rng_seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    fs::write(path, text)
}

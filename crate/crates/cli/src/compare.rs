//! Energy comparison of several heading configurations on one scenario.
//!
//! Every entry reruns the identical scenario with only the wheel headings
//! swapped, so the ranked energies isolate the heading choice. Entries whose
//! mapping is rank deficient are kept in the table as infeasible rows; any
//! other failure aborts the whole comparison.

use serde::Deserialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use omniform::sim::trace::{ScenarioTrace, STAGE_TRACK};
use omniform::sim::SimError;

use crate::config::{Config, HeadingsChoice};
use crate::output::{self, TraceHeader};
use crate::runner;
use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeadingsList {
    configuration: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    name: String,
    optimize: Option<bool>,
    angles: Option<Vec<f64>>,
    angles_deg: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub choice: HeadingsChoice,
}

/// Parses the `[[configuration]]` list file.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, CliError> {
    let raw: RawHeadingsList =
        toml::from_str(text).map_err(|e| CliError::Parse(format!("headings list: {e}")))?;
    if raw.configuration.len() < 2 {
        return Err(CliError::Parse(format!(
            "a comparison needs at least 2 configurations, got {}",
            raw.configuration.len()
        )));
    }
    let mut entries = Vec::with_capacity(raw.configuration.len());
    for raw_entry in raw.configuration {
        let name = raw_entry.name;
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(CliError::Parse(format!(
                "configuration name {name:?} is not filesystem safe; use \
                 letters, digits, '-' and '_'"
            )));
        }
        if entries.iter().any(|e: &Entry| e.name == name) {
            return Err(CliError::Parse(format!(
                "configuration name {name:?} appears twice"
            )));
        }
        let angles = match (raw_entry.angles, raw_entry.angles_deg) {
            (Some(_), Some(_)) => {
                return Err(CliError::Parse(format!(
                    "configuration {name:?} sets both angles and angles_deg"
                )))
            }
            (Some(a), None) => Some(a),
            (None, Some(d)) => Some(d.iter().map(|a| a.to_radians()).collect()),
            (None, None) => None,
        };
        let choice = match (raw_entry.optimize.unwrap_or(false), angles) {
            (true, Some(_)) => {
                return Err(CliError::Parse(format!(
                    "configuration {name:?} sets optimize = true and explicit angles"
                )))
            }
            (true, None) => HeadingsChoice::Optimize,
            (false, Some(angles)) => HeadingsChoice::Explicit(angles),
            (false, None) => {
                return Err(CliError::Parse(format!(
                    "configuration {name:?} needs optimize = true or an angles list"
                )))
            }
        };
        entries.push(Entry { name, choice });
    }
    Ok(entries)
}

/// One finished (or infeasible) comparison row.
pub struct Outcome {
    pub name: String,
    /// Transport-stage energy; `None` when the mapping was rank deficient.
    pub energy: Option<f64>,
    pub condition_number: Option<f64>,
    pub note: String,
    /// Cumulative transport-stage energy samples `(t, energy)` for plotting.
    pub cumulative: Vec<(f64, f64)>,
}

/// Runs every entry and writes its per-run files under `out_dir/<name>/`.
pub fn run_all(base: &Config, entries: &[Entry], out_dir: &Path) -> Result<Vec<Outcome>, CliError> {
    if !base.needs_structure() {
        return Err(CliError::Parse(
            "comparison configs must describe a structure scenario, not single_track".into(),
        ));
    }
    let mut outcomes = Vec::with_capacity(entries.len());
    for entry in entries {
        let mut config = base.clone();
        config.headings = entry.choice.clone();
        let prepared = runner::prepare(&config)?;
        let sub_dir = out_dir.join(&entry.name);
        fs::create_dir_all(&sub_dir).map_err(|e| CliError::Io(e.to_string()))?;
        let started = output::unix_now();
        match runner::simulate(&prepared) {
            Ok(trace) => {
                let metrics = runner::collect_metrics(&config, &prepared, &trace);
                let energy = metrics.energy;
                let condition_number = metrics.condition_number;
                let digest = config.digest();
                let reference = config.reference_description();
                let header = TraceHeader {
                    config_digest: &digest,
                    rng_seed: config.rng_seed,
                    kind: config.kind.as_str(),
                    reference: &reference,
                    headings: prepared.headings.as_deref(),
                };
                output::write_trace_csv(&sub_dir.join("trace.csv"), &trace, &header)
                    .map_err(|e| CliError::Io(e.to_string()))?;
                output::write_json(&sub_dir.join("metrics.json"), &metrics)
                    .map_err(|e| CliError::Io(e.to_string()))?;
                let manifest = output::RunManifest {
                    config_digest: config.digest(),
                    tool_version: crate::config::TOOL_VERSION.to_string(),
                    rng_seed: config.rng_seed,
                    started_unix: started,
                    finished_unix: output::unix_now(),
                    outputs: vec![
                        sub_dir.join("trace.csv").display().to_string(),
                        sub_dir.join("metrics.json").display().to_string(),
                    ],
                };
                output::write_json(&sub_dir.join("manifest.json"), &manifest)
                    .map_err(|e| CliError::Io(e.to_string()))?;
                outcomes.push(Outcome {
                    name: entry.name.clone(),
                    energy: Some(energy),
                    condition_number,
                    note: String::new(),
                    cumulative: cumulative_energy(&trace),
                });
            }
            Err(SimError::DegenerateMapper { rank }) => outcomes.push(Outcome {
                name: entry.name.clone(),
                energy: None,
                condition_number: None,
                note: format!("infeasible: velocity mapper rank {rank}"),
                cumulative: Vec::new(),
            }),
            Err(other) => return Err(runner::sim_error_to_cli(other)),
        }
    }
    Ok(outcomes)
}

/// Running integral of transport-stage power over time.
fn cumulative_energy(trace: &ScenarioTrace) -> Vec<(f64, f64)> {
    let mut total = 0.0;
    let mut samples = Vec::new();
    for row in trace.rows().iter().filter(|r| r.stage == STAGE_TRACK) {
        total += row.power * trace.dt();
        samples.push((row.t, total));
    }
    samples
}

/// Feasible rows sorted by energy get ranks from 1; infeasible rows trail
/// with an empty rank. Returns indices into `outcomes` in table order.
pub fn ranking(outcomes: &[Outcome]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| match (outcomes[a].energy, outcomes[b].energy) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => outcomes[a].name.cmp(&outcomes[b].name),
    });
    order
}

pub fn render_energy_table(outcomes: &[Outcome]) -> String {
    let order = ranking(outcomes);
    let mut out = String::from("rank,name,energy,condition_number,note\n");
    let mut rank = 0;
    for &i in &order {
        let o = &outcomes[i];
        let rank_field = if o.energy.is_some() {
            rank += 1;
            rank.to_string()
        } else {
            String::new()
        };
        let energy = o.energy.map(|e| e.to_string()).unwrap_or_default();
        let cond = o
            .condition_number
            .map(|c| c.to_string())
            .unwrap_or_default();
        let _ = writeln!(out, "{rank_field},{},{energy},{cond},{}", o.name, o.note);
    }
    out
}

const COLORS: [&str; 8] = [
    "#0b62a4", "#b5341f", "#2d7d46", "#7a4aa1", "#b07a1e", "#3b8ea5", "#a13d63", "#555555",
];

/// Cumulative transport-stage energy per configuration, best run annotated.
pub fn render_energy_svg(outcomes: &[Outcome]) -> String {
    let width = 860.0;
    let height = 520.0;
    let margin = 60.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(
        out,
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" fill=\"none\" \
         stroke=\"#444\" stroke-width=\"1\"/>",
        width - 2.0 * margin,
        height - 2.0 * margin
    );

    let mut t_hi = 0.0_f64;
    let mut e_hi = 0.0_f64;
    let mut t_lo = f64::INFINITY;
    for o in outcomes {
        for &(t, e) in &o.cumulative {
            t_hi = t_hi.max(t);
            e_hi = e_hi.max(e);
            t_lo = t_lo.min(t);
        }
    }
    if !t_lo.is_finite() {
        t_lo = 0.0;
    }
    let t_span = (t_hi - t_lo).max(1e-9);
    let e_span = e_hi.max(1e-9) * 1.05;
    let to_x = |t: f64| margin + (t - t_lo) / t_span * (width - 2.0 * margin);
    let to_y = |e: f64| height - margin - e / e_span * (height - 2.0 * margin);

    let order = ranking(outcomes);
    let best = order
        .first()
        .copied()
        .filter(|&i| outcomes[i].energy.is_some());
    for (slot, &i) in order.iter().enumerate() {
        let o = &outcomes[i];
        let color = COLORS[slot % COLORS.len()];
        if !o.cumulative.is_empty() {
            let stride = o.cumulative.len().div_ceil(1200).max(1);
            let mut points = String::new();
            for (j, &(t, e)) in o.cumulative.iter().enumerate() {
                if j % stride != 0 && j != o.cumulative.len() - 1 {
                    continue;
                }
                if !points.is_empty() {
                    points.push(' ');
                }
                let _ = write!(points, "{:.2},{:.2}", to_x(t), to_y(e));
            }
            let _ = writeln!(
                out,
                "<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"1.8\"/>"
            );
        }
        let label_y = margin + 18.0 + slot as f64 * 16.0;
        let suffix = match o.energy {
            Some(e) => format!("{e:.4}"),
            None => o.note.clone(),
        };
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{label_y}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{} ({suffix})</text>",
            margin + 12.0,
            o.name
        );
    }
    if let Some(i) = best {
        let o = &outcomes[i];
        if let Some(&(t, e)) = o.cumulative.last() {
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" \
                 font-size=\"13\" fill=\"#111\">rank 1: {}</text>",
                to_x(t) - 4.0,
                to_y(e) - 6.0,
                o.name
            );
        }
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" fill=\"#222\">t [s]</text>",
        width / 2.0,
        height - margin / 3.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" fill=\"#222\" transform=\"rotate(-90 16 {})\">cumulative energy \
         [rad^2/s]</text>",
        16.0,
        height / 2.0,
        height / 2.0
    );
    out.push_str("</svg>\n");
    out
}

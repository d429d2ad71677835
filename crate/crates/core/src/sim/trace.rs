//! Time-indexed records produced by scenario runs.

use crate::control::TrackingError;
use crate::model::Pose2D;

/// Stage tag: free modules navigating to their approach poses.
pub const STAGE_NAVIGATE: u8 = 1;
/// Stage tag: modules creeping onto their docking faces.
pub const STAGE_DOCK: u8 = 2;
/// Stage tag: the docked structure (or single module) tracking the reference.
pub const STAGE_TRACK: u8 = 3;

/// Per-module snapshot within one trace row. `theta` is the wheel heading in
/// the world frame; `omega` is the wheel speed applied over the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleSample {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub omega: f64,
}

/// State at the beginning of one simulation step, together with the wheel
/// speeds applied during that step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Simulation time, seconds.
    pub t: f64,
    /// One of the `STAGE_*` tags.
    pub stage: u8,
    /// Structure pose; for a single module run, the module pose.
    pub structure: Pose2D,
    pub reference: Pose2D,
    pub error: TrackingError,
    /// Instantaneous power proxy: sum of squared wheel speeds, rad^2/s^2.
    pub power: f64,
    pub modules: Vec<ModuleSample>,
}

/// Contiguous run of rows sharing one stage tag; `end` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpan {
    pub stage: u8,
    pub start: usize,
    pub end: usize,
}

/// A complete scenario recording on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    dt: f64,
    rows: Vec<TraceRow>,
    spans: Vec<StageSpan>,
}

impl ScenarioTrace {
    /// Wraps rows recorded at `dt` spacing, deriving the stage spans.
    pub fn new(dt: f64, rows: Vec<TraceRow>) -> Self {
        let mut spans: Vec<StageSpan> = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            match spans.last_mut() {
                Some(span) if span.stage == row.stage => span.end = i + 1,
                _ => spans.push(StageSpan {
                    stage: row.stage,
                    start: i,
                    end: i + 1,
                }),
            }
        }
        Self { dt, rows, spans }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn spans(&self) -> &[StageSpan] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_modules(&self) -> usize {
        self.rows.first().map_or(0, |r| r.modules.len())
    }

    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Total simulated time spent in the given stage, seconds.
    pub fn stage_duration(&self, stage: u8) -> f64 {
        self.rows.iter().filter(|r| r.stage == stage).count() as f64 * self.dt
    }

    /// Largest wheel speed magnitude recorded anywhere in the trace.
    pub fn max_wheel_speed(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.modules.iter())
            .fold(0.0_f64, |m, s| m.max(s.omega.abs()))
    }

    /// Largest position error norm over rows in the given stage.
    pub fn max_position_error(&self, stage: u8) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.stage == stage)
            .fold(0.0_f64, |m, r| m.max(r.error.position_norm()))
    }

    /// Root mean square position error over rows in the given stage.
    pub fn rms_position_error(&self, stage: u8) -> f64 {
        let mut sum = 0.0;
        let mut count = 0_usize;
        for row in self.rows.iter().filter(|r| r.stage == stage) {
            let e = row.error.position_norm();
            sum += e * e;
            count += 1;
        }
        if count == 0 {
            0.0
        } else {
            (sum / count as f64).sqrt()
        }
    }
}

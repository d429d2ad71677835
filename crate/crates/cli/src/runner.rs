//! Shared pipeline: resolved config to scenario, scenario to trace, trace to
//! metrics. Both `run` and `compare` go through here so their outputs agree.

use omniform::docking::check_formation_feasible;
use omniform::kinematics::VelocityMapper;
use omniform::model::{FormationConfiguration, HeadingConfiguration};
use omniform::optimizer::optimize_headings;
use omniform::sim::trace::{ScenarioTrace, STAGE_DOCK, STAGE_NAVIGATE, STAGE_TRACK};
use omniform::sim::{
    energy_of_trace, run_scenario, strength_budget, Scenario, ScenarioKind, SimError,
};

use crate::config::{Config, HeadingsChoice, KindTag};
use crate::output::{FinalError, Metrics, StageDurations, StrengthOut};
use crate::CliError;

/// A scenario ready to run, with the headings that ended up in it.
pub struct Prepared {
    pub scenario: Scenario,
    /// Structure-frame wheel headings; `None` for a single module.
    pub headings: Option<Vec<f64>>,
}

/// Builds the scenario, running the heading optimizer when the config asks
/// for it.
pub fn prepare(config: &Config) -> Result<Prepared, CliError> {
    let kind = match config.kind {
        KindTag::SingleTrack => ScenarioKind::SingleTrack {
            start: config.start,
        },
        KindTag::StructureTrack | KindTag::Payload | KindTag::Transport => {
            let formation = config
                .build_formation()
                .map_err(|e| CliError::Formation(e.to_string()))?;
            let headings = resolve_headings(config, &formation)?;
            match config.kind {
                KindTag::Transport => ScenarioKind::Transport {
                    formation,
                    headings,
                    plan: config
                        .transport
                        .clone()
                        .expect("transport configs always carry a plan"),
                },
                _ => ScenarioKind::StructureTrack {
                    formation,
                    headings,
                    start: config.start,
                    payload: if config.kind == KindTag::Payload {
                        config.payload
                    } else {
                        None
                    },
                },
            }
        }
    };
    let headings = match &kind {
        ScenarioKind::SingleTrack { .. } => None,
        ScenarioKind::StructureTrack { headings, .. }
        | ScenarioKind::Transport { headings, .. } => Some(headings.angles().to_vec()),
    };
    Ok(Prepared {
        scenario: Scenario {
            spec: config.module,
            docking: config.docking,
            path: config.build_path(),
            module_gains: config.module_gains,
            structure_gains: config.structure_gains,
            options: config.options,
            kind,
        },
        headings,
    })
}

fn resolve_headings(
    config: &Config,
    formation: &FormationConfiguration,
) -> Result<HeadingConfiguration, CliError> {
    match &config.headings {
        HeadingsChoice::Explicit(angles) => Ok(HeadingConfiguration::new(angles.clone())),
        HeadingsChoice::Optimize => {
            let result =
                optimize_headings(formation, config.module.wheel_radius, &config.optimizer)
                    .map_err(|e| CliError::Optimizer(e.to_string()))?;
            Ok(result.headings)
        }
    }
}

/// Raw simulation entry point; `compare` inspects the error itself to
/// isolate rank-deficient heading rows.
pub fn simulate(prepared: &Prepared) -> Result<ScenarioTrace, SimError> {
    run_scenario(&prepared.scenario)
}

/// Sorts simulator errors into the exit-code buckets: config-shaped problems
/// parse-fail, undockable formations are formation errors, the rest are
/// simulation failures.
pub fn sim_error_to_cli(error: SimError) -> CliError {
    match error {
        SimError::BadTimeStep { .. }
        | SimError::BadDuration { .. }
        | SimError::BadSteerRate { .. }
        | SimError::BadDelay { .. }
        | SimError::BadPayload { .. }
        | SimError::BadPlanSize { .. }
        | SimError::BadPlanValue { .. }
        | SimError::HeadingCountMismatch { .. }
        | SimError::Trajectory(_) => CliError::Parse(error.to_string()),
        SimError::InfeasibleFormation { .. } => CliError::Formation(error.to_string()),
        SimError::DegenerateMapper { .. }
        | SimError::NavigationTimeout { .. }
        | SimError::DockingTimeout { .. }
        | SimError::EmptyTrace
        | SimError::Kinematics(_) => CliError::Simulation(error.to_string()),
    }
}

/// Summarizes one finished run.
pub fn collect_metrics(config: &Config, prepared: &Prepared, trace: &ScenarioTrace) -> Metrics {
    let final_row = trace.final_row().expect("a finished run has rows");
    let energy = energy_of_trace(trace).expect("a finished run has rows");
    let limit = config.module.max_wheel_speed;
    let saturation_steps = trace
        .rows()
        .iter()
        .filter(|r| r.modules.iter().any(|m| m.omega.abs() >= limit - 1e-9))
        .count();

    let mut objective_value = None;
    let mut sigma_max = None;
    let mut condition_number = None;
    let mut strength = None;
    if let Some(headings) = &prepared.headings {
        if let Ok(formation) = config.build_formation() {
            let headings = HeadingConfiguration::new(headings.clone());
            if let Ok(mapper) =
                VelocityMapper::build(&formation, &headings, config.module.wheel_radius)
            {
                let m = mapper.metrics();
                sigma_max = Some(m.sigma_max);
                if m.condition_number.is_finite() {
                    condition_number = Some(m.condition_number);
                    objective_value = Some(m.condition_number + m.sigma_max * m.sigma_max);
                }
            }
            let report = check_formation_feasible(&formation, &config.docking);
            let payload_mass = config.payload.map(|p| p.mass).unwrap_or(0.0);
            strength = strength_budget(
                trace,
                &formation,
                &config.module,
                &config.docking,
                report.sites.len(),
                payload_mass,
            )
            .map(|b| StrengthOut {
                max_force_utilization: b.max_force_utilization,
                max_torque_utilization: b.max_torque_utilization,
            });
        }
    }

    Metrics {
        kind: config.kind.as_str().to_string(),
        n_modules: trace.n_modules(),
        total_time: trace.rows().len() as f64 * trace.dt(),
        stage_durations: StageDurations {
            navigate: trace.stage_duration(STAGE_NAVIGATE),
            dock: trace.stage_duration(STAGE_DOCK),
            track: trace.stage_duration(STAGE_TRACK),
        },
        final_error: FinalError {
            ex: final_row.error.ex,
            ey: final_row.error.ey,
            etheta: final_row.error.etheta,
        },
        final_position_error: final_row.error.position_norm(),
        max_position_error: trace.max_position_error(STAGE_TRACK),
        rms_position_error: trace.rms_position_error(STAGE_TRACK),
        energy,
        max_wheel_speed: trace.max_wheel_speed(),
        saturation_steps,
        objective_value,
        sigma_max,
        condition_number,
        headings: prepared.headings.clone(),
        strength,
    }
}

/// Full pipeline with simulator errors mapped onto exit-code buckets.
pub fn run_config(config: &Config) -> Result<(Prepared, ScenarioTrace, Metrics), CliError> {
    let prepared = prepare(config)?;
    let trace = simulate(&prepared).map_err(sim_error_to_cli)?;
    let metrics = collect_metrics(config, &prepared, &trace);
    Ok((prepared, trace, metrics))
}

//! Deterministic fixed-step kinematic simulation of modules and docked
//! structures.
//!
//! A scenario is one of three shapes: a single module tracking a path, a
//! pre-assembled structure tracking a path (optionally dragging a payload),
//! or the full transport pipeline in which scattered modules first navigate
//! to their docking faces, dock, and then drive as one rigid structure.
//! Everything advances by explicit Euler at a fixed step; the model is purely
//! kinematic, so the runs are bit-reproducible.

pub mod trace;
pub mod trajectory;

use std::collections::VecDeque;

use thiserror::Error;

use crate::control::{
    module_control_step, saturate_wheels, structure_control_step, tracking_error, IntegratorState,
    ModuleCommand, ModuleGains, StructureGains,
};
use crate::docking::{check_formation_feasible, DockingSpec, FeasibilityReport};
use crate::kinematics::{KinematicsError, VelocityMapper};
use crate::model::{
    world_from_structure, wrap_to_2pi, wrap_to_pi, FormationConfiguration, HeadingConfiguration,
    ModuleSpec, Pose2D, StructureTwist, WheelSpeeds,
};
use trace::{ModuleSample, ScenarioTrace, TraceRow, STAGE_DOCK, STAGE_NAVIGATE, STAGE_TRACK};
use trajectory::{HeadingMode, ReferencePath, TrajectoryError};

/// Errors raised while validating or running a scenario.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("time step must be strictly positive and finite, got {dt}")]
    BadTimeStep { dt: f64 },
    #[error("duration must be strictly positive and finite, got {duration}")]
    BadDuration { duration: f64 },
    #[error("steering rate limit must be strictly positive, got {rate}")]
    BadSteerRate { rate: f64 },
    #[error("command delay {delay} s is not a whole multiple of the {dt} s step")]
    BadDelay { delay: f64, dt: f64 },
    #[error("payload {name} must be non-negative and finite, got {value}")]
    BadPayload { name: &'static str, value: f64 },
    #[error("transport plan has {got} start poses for {expected} modules")]
    BadPlanSize { expected: usize, got: usize },
    #[error("transport plan {name} must be strictly positive, got {value}")]
    BadPlanValue { name: &'static str, value: f64 },
    #[error("formation is not dockable: {reason}")]
    InfeasibleFormation { reason: String },
    #[error("velocity mapper is rank deficient (rank {rank}) entering the tracking stage")]
    DegenerateMapper { rank: usize },
    #[error("headings count {headings} does not match formation size {formation}")]
    HeadingCountMismatch { formation: usize, headings: usize },
    #[error("navigation stage: module {module} did not reach its approach pose within {limit} s")]
    NavigationTimeout { module: usize, limit: f64 },
    #[error("docking stage: module {module} did not dock within {limit} s")]
    DockingTimeout { module: usize, limit: f64 },
    #[error("trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Integration and communication settings shared by all scenario shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// Integration step, seconds.
    pub dt: f64,
    /// Tracking time, seconds. Assembly stages run before this budget.
    pub duration: f64,
    /// Command transport delay, seconds; must be a whole number of steps.
    pub command_delay: f64,
    /// Steering servo rate limit, rad/s.
    pub steer_rate_limit: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            duration: 20.0,
            command_delay: 0.0,
            steer_rate_limit: std::f64::consts::TAU,
        }
    }
}

/// A dragged object: slows the realized structure twist by
/// `1 / (1 + friction_coefficient * mass)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payload {
    /// Object mass, kg.
    pub mass: f64,
    /// Drag per kilogram of payload, dimensionless heuristic.
    pub friction_coefficient: f64,
}

impl Payload {
    pub fn new(mass: f64) -> Self {
        Self {
            mass,
            friction_coefficient: 0.3,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        for (name, value) in [
            ("mass", self.mass),
            ("friction_coefficient", self.friction_coefficient),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(SimError::BadPayload { name, value });
            }
        }
        Ok(())
    }
}

/// Assembly choreography for the transport pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Initial pose of every free module, world frame.
    pub start_poses: Vec<Pose2D>,
    /// Where the structure origin assembles, world frame.
    pub assembly: (f64, f64),
    /// Radial standoff of the approach pose from the docking pose, m.
    pub approach_offset: f64,
    /// Cruise speed during navigation, m/s.
    pub nav_speed: f64,
    /// Inward speed during the docking creep, m/s.
    pub creep_speed: f64,
    /// Position tolerance declaring the approach pose reached, m.
    pub arrive_tolerance: f64,
}

impl TransportPlan {
    pub fn new(start_poses: Vec<Pose2D>, assembly: (f64, f64)) -> Self {
        Self {
            start_poses,
            assembly,
            approach_offset: 0.02,
            nav_speed: 0.05,
            creep_speed: 0.005,
            arrive_tolerance: 0.005,
        }
    }

    fn validate(&self, n_modules: usize) -> Result<(), SimError> {
        if self.start_poses.len() != n_modules {
            return Err(SimError::BadPlanSize {
                expected: n_modules,
                got: self.start_poses.len(),
            });
        }
        for (name, value) in [
            ("nav_speed", self.nav_speed),
            ("creep_speed", self.creep_speed),
            ("arrive_tolerance", self.arrive_tolerance),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SimError::BadPlanValue { name, value });
            }
        }
        if !(self.approach_offset >= 0.0) || !self.approach_offset.is_finite() {
            return Err(SimError::BadPlanValue {
                name: "approach_offset",
                value: self.approach_offset,
            });
        }
        Ok(())
    }
}

/// What a scenario simulates.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    /// One free module tracking the reference path.
    SingleTrack {
        /// Initial pose; defaults to the reference pose at t = 0.
        start: Option<Pose2D>,
    },
    /// A pre-assembled structure tracking the reference path.
    StructureTrack {
        formation: FormationConfiguration,
        headings: HeadingConfiguration,
        /// Initial structure pose; defaults to the reference pose at t = 0.
        start: Option<Pose2D>,
        payload: Option<Payload>,
    },
    /// Full pipeline: navigate, dock, reorient, then track.
    Transport {
        formation: FormationConfiguration,
        headings: HeadingConfiguration,
        plan: TransportPlan,
    },
}

/// A fully specified simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ModuleSpec,
    pub docking: DockingSpec,
    pub path: ReferencePath,
    pub module_gains: ModuleGains,
    pub structure_gains: StructureGains,
    pub options: SimulationOptions,
    pub kind: ScenarioKind,
}

/// Fixed-length command queue modeling communication delay; commands pushed
/// at step j are applied at step j + k.
struct DelayLine<T> {
    queue: VecDeque<T>,
}

impl<T: Clone> DelayLine<T> {
    fn new(steps: usize, fill: T) -> Self {
        Self {
            queue: std::iter::repeat(fill).take(steps).collect(),
        }
    }

    fn apply(&mut self, command: T) -> T {
        self.queue.push_back(command);
        self.queue.pop_front().expect("queue holds at least one item")
    }
}

/// Advances one module by one step: the wheel heading slews toward
/// `heading_target` under the steering rate limit, then the position
/// integrates along the new heading with the wheel speed clamped to the
/// drive limit. Returns the new pose and the wheel speed actually applied.
pub fn step_module(
    pose: &Pose2D,
    wheel_omega: f64,
    heading_target: f64,
    spec: &ModuleSpec,
    steer_rate_limit: f64,
    dt: f64,
) -> (Pose2D, f64) {
    let limit = spec.max_wheel_speed;
    let omega = wheel_omega.clamp(-limit, limit);
    let swing = wrap_to_pi(heading_target - pose.theta);
    let max_swing = steer_rate_limit * dt;
    let theta = wrap_to_2pi(pose.theta + swing.clamp(-max_swing, max_swing));
    let v = omega * spec.wheel_radius;
    let (s, c) = theta.sin_cos();
    (
        Pose2D::new(pose.x + v * c * dt, pose.y + v * s * dt, theta),
        omega,
    )
}

/// Advances the structure pose by one step from already-saturated wheel
/// speeds: recovers the structure-frame twist through the mapper, rotates it
/// into the world frame, and integrates.
pub fn step_structure(
    pose: &Pose2D,
    omegas: &WheelSpeeds,
    mapper: &VelocityMapper,
    dt: f64,
) -> Result<Pose2D, KinematicsError> {
    let twist = mapper.twist_from_wheels(omegas)?;
    Ok(integrate(pose, &twist.rotated(pose.theta), dt))
}

fn integrate(pose: &Pose2D, world_twist: &StructureTwist, dt: f64) -> Pose2D {
    Pose2D::new(
        pose.x + world_twist.vx * dt,
        pose.y + world_twist.vy * dt,
        pose.theta + world_twist.omega * dt,
    )
}

/// Slows a realized twist by the payload drag factor; identity without a
/// payload or at zero mass.
pub fn payload_drag(twist: &StructureTwist, payload: Option<&Payload>) -> StructureTwist {
    match payload {
        None => *twist,
        Some(p) => {
            let factor = 1.0 / (1.0 + p.friction_coefficient * p.mass);
            StructureTwist::new(twist.vx * factor, twist.vy * factor, twist.omega * factor)
        }
    }
}

/// Sum of the squared-wheel-speed power proxy over the tracking stage,
/// integrated at the trace's time step.
pub fn energy_of_trace(trace: &ScenarioTrace) -> Result<f64, SimError> {
    if trace.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    Ok(trace
        .rows()
        .iter()
        .filter(|r| r.stage == STAGE_TRACK)
        .map(|r| r.power * trace.dt())
        .sum())
}

/// Worst-case inertial loads on the docked interfaces relative to the magnet
/// ratings, from finite differences of the tracked structure pose.
///
/// This is a coarse static budget: the whole inertial force (modules plus an
/// object treated as a centered point mass) counts against the summed tensile
/// rating, and the whole inertial torque against the summed shear rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrengthBudget {
    pub max_force_utilization: f64,
    pub max_torque_utilization: f64,
}

pub fn strength_budget(
    scenario_trace: &ScenarioTrace,
    formation: &FormationConfiguration,
    spec: &ModuleSpec,
    docking: &DockingSpec,
    n_interfaces: usize,
    payload_mass: f64,
) -> Option<StrengthBudget> {
    let poses: Vec<Pose2D> = scenario_trace
        .rows()
        .iter()
        .filter(|r| r.stage == STAGE_TRACK)
        .map(|r| r.structure)
        .collect();
    if poses.len() < 3 || n_interfaces == 0 {
        return None;
    }
    let dt = scenario_trace.dt();
    let total_mass = formation.len() as f64 * spec.mass + payload_mass;
    // each module modeled as a uniform disc of the contour circumradius
    let inertia: f64 = formation
        .positions()
        .iter()
        .map(|r| spec.mass * (r.0 * r.0 + r.1 * r.1 + spec.circumradius * spec.circumradius / 2.0))
        .sum();
    let force_capacity = n_interfaces as f64 * docking.magnet_tensile_force;
    let torque_capacity = n_interfaces as f64 * docking.shear_torque();

    let mut max_force: f64 = 0.0;
    let mut max_torque: f64 = 0.0;
    for w in poses.windows(3) {
        let (p0, p1, p2) = (&w[0], &w[1], &w[2]);
        let ax = (p2.x - 2.0 * p1.x + p0.x) / (dt * dt);
        let ay = (p2.y - 2.0 * p1.y + p0.y) / (dt * dt);
        let alpha =
            (wrap_to_pi(p2.theta - p1.theta) - wrap_to_pi(p1.theta - p0.theta)) / (dt * dt);
        max_force = max_force.max(total_mass * ax.hypot(ay));
        max_torque = max_torque.max(inertia * alpha.abs());
    }
    Some(StrengthBudget {
        max_force_utilization: max_force / force_capacity,
        max_torque_utilization: max_torque / torque_capacity,
    })
}

/// Runs a scenario to completion and returns its trace.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioTrace, SimError> {
    let o = &scenario.options;
    if !(o.dt > 0.0) || !o.dt.is_finite() {
        return Err(SimError::BadTimeStep { dt: o.dt });
    }
    if !(o.duration > 0.0) || !o.duration.is_finite() {
        return Err(SimError::BadDuration {
            duration: o.duration,
        });
    }
    if !(o.steer_rate_limit > 0.0) || !o.steer_rate_limit.is_finite() {
        return Err(SimError::BadSteerRate {
            rate: o.steer_rate_limit,
        });
    }
    let delay_steps = delay_steps(o)?;
    match &scenario.kind {
        ScenarioKind::SingleTrack { start } => run_single(scenario, *start, delay_steps),
        ScenarioKind::StructureTrack {
            formation,
            headings,
            start,
            payload,
        } => {
            if let Some(p) = payload {
                p.validate()?;
            }
            let ctx = TrackContext::prepare(scenario, formation, headings, payload.as_ref())?;
            let start = start.unwrap_or_else(|| scenario.path.sample(0.0).0);
            let mut rows = Vec::with_capacity(step_count(o));
            ctx.track(start, 0.0, step_count(o), delay_steps, &mut rows)?;
            Ok(ScenarioTrace::new(o.dt, rows))
        }
        ScenarioKind::Transport {
            formation,
            headings,
            plan,
        } => run_transport(scenario, formation, headings, plan, delay_steps),
    }
}

fn delay_steps(options: &SimulationOptions) -> Result<usize, SimError> {
    let delay = options.command_delay;
    if !(delay >= 0.0) || !delay.is_finite() {
        return Err(SimError::BadDelay {
            delay,
            dt: options.dt,
        });
    }
    let ratio = delay / options.dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-6 {
        return Err(SimError::BadDelay {
            delay,
            dt: options.dt,
        });
    }
    Ok(steps as usize)
}

fn step_count(options: &SimulationOptions) -> usize {
    ((options.duration / options.dt).round() as usize).max(1)
}

fn idle_command(theta: f64) -> ModuleCommand {
    ModuleCommand {
        drive_velocity: 0.0,
        heading_rate: 0.0,
        heading_target: theta,
    }
}

/// Steering setpoint at application time. A command spends `delay_steps`
/// steps in transit; pushing the stale target forward by the commanded rate
/// over that known dead time keeps the steering servo tracking at the full
/// commanded rate instead of `rate / (1 + delay_steps)`.
fn extrapolate_target(command: &ModuleCommand, delay_steps: usize, dt: f64) -> f64 {
    command.heading_target + command.heading_rate * delay_steps as f64 * dt
}

fn run_single(
    scenario: &Scenario,
    start: Option<Pose2D>,
    delay_steps: usize,
) -> Result<ScenarioTrace, SimError> {
    let o = &scenario.options;
    let dt = o.dt;
    let mut pose = start.unwrap_or_else(|| scenario.path.sample(0.0).0);
    let mut delay = DelayLine::new(delay_steps, idle_command(pose.theta));
    let steps = step_count(o);
    let mut rows = Vec::with_capacity(steps);
    for _ in 0..steps {
        let t = rows.len() as f64 * dt;
        let (reference, feedforward) = scenario.path.sample(t);
        let v_ref = feedforward.vx.hypot(feedforward.vy);
        let command = module_control_step(
            &pose,
            &reference,
            v_ref,
            feedforward.omega,
            &scenario.module_gains,
            dt,
        );
        let applied = delay.apply(command);
        let (next, omega) = step_module(
            &pose,
            applied.drive_velocity / scenario.spec.wheel_radius,
            extrapolate_target(&applied, delay_steps, dt),
            &scenario.spec,
            o.steer_rate_limit,
            dt,
        );
        rows.push(TraceRow {
            t,
            stage: STAGE_TRACK,
            structure: pose,
            reference,
            error: tracking_error(&pose, &reference),
            power: omega * omega,
            modules: vec![ModuleSample {
                x: pose.x,
                y: pose.y,
                theta: pose.theta,
                omega,
            }],
        });
        pose = next;
    }
    Ok(ScenarioTrace::new(dt, rows))
}

fn describe_infeasibility(report: &FeasibilityReport) -> String {
    let mut reasons = Vec::new();
    if !report.connected {
        reasons.push("docking graph is disconnected");
    }
    if !report.non_overlapping {
        reasons.push("module contours overlap");
    }
    if !report.polarity_consistent {
        reasons.push("a mated face pair has repelling polarity");
    }
    if !report.declared_edges_realized {
        reasons.push("a declared docking edge is not geometrically realized");
    }
    reasons.join("; ")
}

/// Shared state of the structure tracking loop.
struct TrackContext<'a> {
    scenario: &'a Scenario,
    formation: &'a FormationConfiguration,
    headings: &'a HeadingConfiguration,
    mapper: VelocityMapper,
    payload: Option<&'a Payload>,
}

impl<'a> TrackContext<'a> {
    /// Validates feasibility and mapper rank, then builds the loop state.
    fn prepare(
        scenario: &'a Scenario,
        formation: &'a FormationConfiguration,
        headings: &'a HeadingConfiguration,
        payload: Option<&'a Payload>,
    ) -> Result<Self, SimError> {
        if headings.len() != formation.len() {
            return Err(SimError::HeadingCountMismatch {
                formation: formation.len(),
                headings: headings.len(),
            });
        }
        let report = check_formation_feasible(formation, &scenario.docking);
        if !report.is_feasible() {
            return Err(SimError::InfeasibleFormation {
                reason: describe_infeasibility(&report),
            });
        }
        let mapper = VelocityMapper::build(formation, headings, scenario.spec.wheel_radius)?;
        let metrics = mapper.metrics();
        if !metrics.is_full_rank() {
            return Err(SimError::DegenerateMapper { rank: metrics.rank });
        }
        Ok(Self {
            scenario,
            formation,
            headings,
            mapper,
            payload,
        })
    }

    fn module_samples(&self, pose: &Pose2D, wheels: &WheelSpeeds) -> Vec<ModuleSample> {
        self.formation
            .positions()
            .iter()
            .zip(self.headings.angles())
            .zip(&wheels.omegas)
            .map(|((r, heading), omega)| {
                let (x, y) = world_from_structure(pose, *r);
                ModuleSample {
                    x,
                    y,
                    theta: wrap_to_2pi(heading + pose.theta),
                    omega: *omega,
                }
            })
            .collect()
    }

    /// Runs the closed-loop tracking stage for `steps` steps. The path clock
    /// starts at zero when the global time reaches `path_start`; rows keep
    /// counting global time.
    fn track(
        &self,
        start: Pose2D,
        path_start: f64,
        steps: usize,
        delay_steps: usize,
        rows: &mut Vec<TraceRow>,
    ) -> Result<Pose2D, SimError> {
        let o = &self.scenario.options;
        let dt = o.dt;
        let mut pose = start;
        let mut integrator = IntegratorState::zero();
        let mut delay = DelayLine::new(delay_steps, StructureTwist::zero());
        for _ in 0..steps {
            let t = rows.len() as f64 * dt;
            let (reference, feedforward) = self.scenario.path.sample(t - path_start);
            let desired = structure_control_step(
                &pose,
                &reference,
                &feedforward,
                &self.scenario.structure_gains,
                &mut integrator,
                dt,
            );
            let applied = delay.apply(desired);
            let wheels = self.mapper.wheels_from_twist(&applied.rotated(-pose.theta));
            let wheels = saturate_wheels(&wheels, self.scenario.spec.max_wheel_speed);
            let realized = payload_drag(&self.mapper.twist_from_wheels(&wheels)?, self.payload);
            rows.push(TraceRow {
                t,
                stage: STAGE_TRACK,
                structure: pose,
                reference,
                error: tracking_error(&pose, &reference),
                power: wheels.omegas.iter().map(|w| w * w).sum(),
                modules: self.module_samples(&pose, &wheels),
            });
            pose = integrate(&pose, &realized.rotated(pose.theta), dt);
        }
        Ok(pose)
    }
}

fn run_transport(
    scenario: &Scenario,
    formation: &FormationConfiguration,
    headings: &HeadingConfiguration,
    plan: &TransportPlan,
    delay_steps: usize,
) -> Result<ScenarioTrace, SimError> {
    let o = &scenario.options;
    let dt = o.dt;
    let n = formation.len();
    plan.validate(n)?;
    let ctx = TrackContext::prepare(scenario, formation, headings, None)?;

    let assembly_pose = Pose2D::new(plan.assembly.0, plan.assembly.1, 0.0);
    let dock_points: Vec<(f64, f64)> = formation
        .positions()
        .iter()
        .map(|r| (plan.assembly.0 + r.0, plan.assembly.1 + r.1))
        .collect();
    let approach_points: Vec<(f64, f64)> = formation
        .positions()
        .iter()
        .zip(&dock_points)
        .map(|(r, d)| {
            let norm = r.0.hypot(r.1);
            let u = if norm > 1e-12 {
                (r.0 / norm, r.1 / norm)
            } else {
                (1.0, 0.0)
            };
            (
                d.0 + plan.approach_offset * u.0,
                d.1 + plan.approach_offset * u.1,
            )
        })
        .collect();

    let mut poses: Vec<Pose2D> = plan.start_poses.clone();
    let mut lines: Vec<DelayLine<ModuleCommand>> = poses
        .iter()
        .map(|p| DelayLine::new(delay_steps, idle_command(p.theta)))
        .collect();
    let mut rows: Vec<TraceRow> = Vec::new();

    let push_assembly_row =
        |rows: &mut Vec<TraceRow>, stage: u8, poses: &[Pose2D], omegas: &[f64]| {
            let power = omegas.iter().map(|w| w * w).sum();
            rows.push(TraceRow {
                t: rows.len() as f64 * dt,
                stage,
                structure: assembly_pose,
                reference: assembly_pose,
                error: tracking_error(&assembly_pose, &assembly_pose),
                power,
                modules: poses
                    .iter()
                    .zip(omegas)
                    .map(|(p, w)| ModuleSample {
                        x: p.x,
                        y: p.y,
                        theta: p.theta,
                        omega: *w,
                    })
                    .collect(),
            });
        };

    // stage 1: modules drive to their approach poses one at a time, in index
    // order, so the straight-line legs never cross an already-parked peer
    for m in 0..n {
        let from = (poses[m].x, poses[m].y);
        let to = approach_points[m];
        let distance = (to.0 - from.0).hypot(to.1 - from.1);
        if distance <= plan.arrive_tolerance {
            continue;
        }
        let leg = ReferencePath::line(from, to, plan.nav_speed, HeadingMode::Tangent)?;
        let cruise_time = leg.time_to_end().unwrap_or(0.0);
        let limit = cruise_time * 3.0 + 5.0;
        let mut t_local = 0.0;
        loop {
            let gap = (to.0 - poses[m].x).hypot(to.1 - poses[m].y);
            if gap <= plan.arrive_tolerance {
                break;
            }
            if t_local > limit {
                return Err(SimError::NavigationTimeout { module: m, limit });
            }
            let command = if t_local < cruise_time {
                let (reference, feedforward) = leg.sample(t_local);
                let v_ref = feedforward.vx.hypot(feedforward.vy);
                module_control_step(
                    &poses[m],
                    &reference,
                    v_ref,
                    feedforward.omega,
                    &scenario.module_gains,
                    dt,
                )
            } else {
                // the moving reference has stopped; close the residual gap by
                // steering straight at the approach point
                capture_command(&poses[m], to, plan.nav_speed, &scenario.module_gains)
            };
            let applied = lines[m].apply(command);
            let (next, omega) = step_module(
                &poses[m],
                applied.drive_velocity / scenario.spec.wheel_radius,
                extrapolate_target(&applied, delay_steps, dt),
                &scenario.spec,
                o.steer_rate_limit,
                dt,
            );
            let mut omegas = vec![0.0; n];
            omegas[m] = omega;
            push_assembly_row(&mut rows, STAGE_NAVIGATE, &poses, &omegas);
            poses[m] = next;
            t_local += dt;
        }
    }

    // stage 2: every module creeps onto its docking face simultaneously and
    // snaps into the rigid structure within the magnet alignment range
    let mut docked = vec![false; n];
    let limit = (plan.approach_offset + plan.arrive_tolerance) / plan.creep_speed * 5.0 + 5.0;
    let mut t_local = 0.0;
    while docked.iter().any(|d| !d) {
        if t_local > limit {
            let module = docked.iter().position(|d| !d).unwrap_or(0);
            return Err(SimError::DockingTimeout { module, limit });
        }
        let snapshot = poses.clone();
        let mut omegas = vec![0.0; n];
        for m in 0..n {
            if docked[m] {
                continue;
            }
            let d = dock_points[m];
            let gap = (d.0 - poses[m].x).hypot(d.1 - poses[m].y);
            if gap <= scenario.docking.align_range {
                poses[m] = Pose2D::new(d.0, d.1, poses[m].theta);
                docked[m] = true;
                continue;
            }
            let command = capture_command(&poses[m], d, plan.creep_speed, &scenario.module_gains);
            let applied = lines[m].apply(command);
            let (next, omega) = step_module(
                &poses[m],
                applied.drive_velocity / scenario.spec.wheel_radius,
                extrapolate_target(&applied, delay_steps, dt),
                &scenario.spec,
                o.steer_rate_limit,
                dt,
            );
            poses[m] = next;
            omegas[m] = omega;
        }
        push_assembly_row(&mut rows, STAGE_DOCK, &snapshot, &omegas);
        t_local += dt;
    }

    // stage 3: reorient wheels to the tracking headings (no driving), then
    // hand the rigid structure to the tracking controller
    let targets: Vec<f64> = ctx.headings.angles().to_vec();
    let max_swing = o.steer_rate_limit * dt;
    loop {
        let remaining: f64 = poses
            .iter()
            .zip(&targets)
            .map(|(p, target)| wrap_to_pi(target - p.theta).abs())
            .fold(0.0, f64::max);
        if remaining == 0.0 {
            break;
        }
        let (reference, _) = scenario.path.sample(0.0);
        rows.push(TraceRow {
            t: rows.len() as f64 * dt,
            stage: STAGE_TRACK,
            structure: assembly_pose,
            reference,
            error: tracking_error(&assembly_pose, &reference),
            power: 0.0,
            modules: poses
                .iter()
                .map(|p| ModuleSample {
                    x: p.x,
                    y: p.y,
                    theta: p.theta,
                    omega: 0.0,
                })
                .collect(),
        });
        for (pose, target) in poses.iter_mut().zip(&targets) {
            let swing = wrap_to_pi(target - pose.theta).clamp(-max_swing, max_swing);
            *pose = Pose2D::new(pose.x, pose.y, pose.theta + swing);
        }
    }

    let path_start = rows.len() as f64 * dt;
    ctx.track(
        assembly_pose,
        path_start,
        step_count(o),
        delay_steps,
        &mut rows,
    )?;
    Ok(ScenarioTrace::new(dt, rows))
}

/// Point-capture command: steer straight at `target` and drive proportionally
/// to the remaining distance, capped at `speed`.
fn capture_command(
    pose: &Pose2D,
    target: (f64, f64),
    speed: f64,
    gains: &ModuleGains,
) -> ModuleCommand {
    let dx = target.0 - pose.x;
    let dy = target.1 - pose.y;
    let distance = dx.hypot(dy);
    ModuleCommand {
        drive_velocity: (gains.k1 * distance).min(speed),
        heading_rate: 0.0,
        heading_target: dy.atan2(dx),
    }
}

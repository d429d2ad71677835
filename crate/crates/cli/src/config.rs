//! Scenario configuration files: parsing, validation, canonical form.
//!
//! Configs are TOML. Every angle key accepts a `_deg` twin (exactly one of
//! the pair may be set); the canonical form is all-radian with presets
//! expanded, so a config's digest identifies the geometry actually simulated.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use thiserror::Error;

use omniform::control::{ModuleGains, StructureGains};
use omniform::docking::DockingSpec;
use omniform::model::{
    recentre_formation_with_edges, DockingEdge, FormationConfiguration, ModuleSpec, Pose2D,
};
use omniform::optimizer::OptimizerOptions;
use omniform::sim::trajectory::{HeadingMode, ReferencePath};
use omniform::sim::{Payload, SimulationOptions, TransportPlan};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Errors surfaced while loading a config. `Invalid` maps to the parse exit
/// code, `Formation` to the infeasible-formation exit code.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid formation: {0}")]
    Formation(String),
}

fn invalid(message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(message.into())
}

/// Picks one of an angle key pair, converting degrees to radians.
fn angle_pair(
    name: &str,
    radians: Option<f64>,
    degrees: Option<f64>,
) -> Result<Option<f64>, ConfigError> {
    match (radians, degrees) {
        (Some(_), Some(_)) => Err(invalid(format!(
            "both {name} and {name}_deg are set; pick one"
        ))),
        (Some(r), None) => Ok(Some(r)),
        (None, Some(d)) => Ok(Some(d.to_radians())),
        (None, None) => Ok(None),
    }
}

fn angle_list_pair(
    name: &str,
    radians: Option<Vec<f64>>,
    degrees: Option<Vec<f64>>,
) -> Result<Option<Vec<f64>>, ConfigError> {
    match (radians, degrees) {
        (Some(_), Some(_)) => Err(invalid(format!(
            "both {name} and {name}_deg are set; pick one"
        ))),
        (Some(r), None) => Ok(Some(r)),
        (None, Some(d)) => Ok(Some(d.iter().map(|a| a.to_radians()).collect())),
        (None, None) => Ok(None),
    }
}

// ---------------------------------------------------------------------------
// raw schema (what the file may contain)

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: String,
    rng_seed: Option<u64>,
    dt: Option<f64>,
    duration: f64,
    command_delay: Option<f64>,
    steer_rate_limit: Option<f64>,
    module: Option<RawModule>,
    docking: Option<RawDocking>,
    formation: Option<RawFormation>,
    headings: Option<RawHeadings>,
    optimizer: Option<RawOptimizer>,
    trajectory: RawTrajectory,
    start: Option<RawPose>,
    gains: Option<RawGains>,
    transport: Option<RawTransport>,
    payload: Option<RawPayload>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModule {
    circumradius: Option<f64>,
    wheel_radius: Option<f64>,
    max_wheel_speed: Option<f64>,
    mass: Option<f64>,
    n_faces: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocking {
    magnet_tensile_force: Option<f64>,
    align_range: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFormation {
    preset: Option<String>,
    count: Option<usize>,
    radius: Option<f64>,
    phase: Option<f64>,
    phase_deg: Option<f64>,
    rows: Option<usize>,
    cols: Option<usize>,
    spacing: Option<f64>,
    rotation: Option<f64>,
    rotation_deg: Option<f64>,
    positions: Option<Vec<[f64; 2]>>,
    recentre: Option<bool>,
    edges: Option<Vec<[usize; 4]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeadings {
    optimize: Option<bool>,
    angles: Option<Vec<f64>>,
    angles_deg: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    n_starts: Option<usize>,
    max_sweeps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    kind: String,
    heading: Option<String>,
    heading_angle: Option<f64>,
    heading_angle_deg: Option<f64>,
    spin_rate: Option<f64>,
    spin_initial: Option<f64>,
    spin_initial_deg: Option<f64>,
    center: Option<[f64; 2]>,
    radius: Option<f64>,
    angular_rate: Option<f64>,
    phase: Option<f64>,
    phase_deg: Option<f64>,
    start: Option<[f64; 2]>,
    end: Option<[f64; 2]>,
    speed: Option<f64>,
    half_width: Option<f64>,
    half_height: Option<f64>,
    corner_radius: Option<f64>,
    amplitude: Option<f64>,
    wavelength: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    x: f64,
    y: f64,
    theta: Option<f64>,
    theta_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    module: Option<RawModuleGains>,
    structure: Option<RawStructureGains>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModuleGains {
    k1: Option<f64>,
    k2: Option<f64>,
    k3: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStructureGains {
    kp_x: Option<f64>,
    ki_x: Option<f64>,
    kp_y: Option<f64>,
    ki_y: Option<f64>,
    kp_theta: Option<f64>,
    ki_theta: Option<f64>,
    integral_limit: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransport {
    assembly: [f64; 2],
    start_poses: Vec<[f64; 3]>,
    approach_offset: Option<f64>,
    nav_speed: Option<f64>,
    creep_speed: Option<f64>,
    arrive_tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPayload {
    mass: f64,
    friction_coefficient: Option<f64>,
}

// ---------------------------------------------------------------------------
// resolved configuration

/// The four scenario kinds exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindTag {
    SingleTrack,
    StructureTrack,
    Transport,
    Payload,
}

impl KindTag {
    fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "single_track" => Ok(Self::SingleTrack),
            "structure_track" => Ok(Self::StructureTrack),
            "transport" => Ok(Self::Transport),
            "payload" => Ok(Self::Payload),
            other => Err(invalid(format!(
                "unknown scenario kind {other:?}; expected single_track, \
                 structure_track, transport or payload"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SingleTrack => "single_track",
            Self::StructureTrack => "structure_track",
            Self::Transport => "transport",
            Self::Payload => "payload",
        }
    }
}

/// How wheel headings are chosen for structure scenarios.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadingsChoice {
    Optimize,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryShape {
    Line {
        start: (f64, f64),
        end: (f64, f64),
        speed: f64,
    },
    Circle {
        center: (f64, f64),
        radius: f64,
        angular_rate: f64,
        phase: f64,
    },
    RoundedRect {
        center: (f64, f64),
        half_width: f64,
        half_height: f64,
        corner_radius: f64,
        speed: f64,
    },
    SCurve {
        start: (f64, f64),
        speed: f64,
        amplitude: f64,
        wavelength: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadingProfile {
    Tangent,
    Fixed(f64),
    Spin { rate: f64, initial: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub shape: TrajectoryShape,
    pub profile: HeadingProfile,
}

/// A fully validated configuration with presets expanded and angles in
/// radians.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub kind: KindTag,
    pub rng_seed: u64,
    pub options: SimulationOptions,
    pub module: ModuleSpec,
    pub docking: DockingSpec,
    pub positions: Vec<(f64, f64)>,
    pub edges: Vec<DockingEdge>,
    pub headings: HeadingsChoice,
    pub optimizer: OptimizerOptions,
    pub trajectory: TrajectoryConfig,
    pub start: Option<Pose2D>,
    pub module_gains: ModuleGains,
    pub structure_gains: StructureGains,
    pub transport: Option<TransportPlan>,
    pub payload: Option<Payload>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        resolve(raw)
    }

    pub fn needs_structure(&self) -> bool {
        self.kind != KindTag::SingleTrack
    }

    /// Builds the formation; empty positions only occur for single_track.
    pub fn build_formation(&self) -> Result<FormationConfiguration, ConfigError> {
        recentre_formation_with_edges(&self.positions, self.edges.clone())
            .map_err(|e| ConfigError::Formation(e.to_string()))
    }

    pub fn build_path(&self) -> ReferencePath {
        let mode = match self.trajectory.profile {
            HeadingProfile::Tangent => HeadingMode::Tangent,
            HeadingProfile::Fixed(angle) => HeadingMode::Fixed(angle),
            HeadingProfile::Spin { rate, initial } => HeadingMode::Spin { rate, initial },
        };
        let built = match self.trajectory.shape {
            TrajectoryShape::Line { start, end, speed } => {
                ReferencePath::line(start, end, speed, mode)
            }
            TrajectoryShape::Circle {
                center,
                radius,
                angular_rate,
                phase,
            } => ReferencePath::circle(center, radius, angular_rate, phase, mode),
            TrajectoryShape::RoundedRect {
                center,
                half_width,
                half_height,
                corner_radius,
                speed,
            } => ReferencePath::rounded_rect(
                center,
                half_width,
                half_height,
                corner_radius,
                speed,
                mode,
            ),
            TrajectoryShape::SCurve {
                start,
                speed,
                amplitude,
                wavelength,
            } => ReferencePath::s_curve(start, speed, amplitude, wavelength, mode),
        };
        built.expect("trajectory was validated when the config resolved")
    }

    /// One-line description of the reference for trace headers.
    pub fn reference_description(&self) -> String {
        let shape = match &self.trajectory.shape {
            TrajectoryShape::Line { start, end, speed } => format!(
                "line start=({},{}) end=({},{}) speed={speed}",
                start.0, start.1, end.0, end.1
            ),
            TrajectoryShape::Circle {
                center,
                radius,
                angular_rate,
                phase,
            } => format!(
                "circle center=({},{}) radius={radius} angular_rate={angular_rate} phase={phase}",
                center.0, center.1
            ),
            TrajectoryShape::RoundedRect {
                center,
                half_width,
                half_height,
                corner_radius,
                speed,
            } => format!(
                "rounded_rect center=({},{}) half_width={half_width} half_height={half_height} \
                 corner_radius={corner_radius} speed={speed}",
                center.0, center.1
            ),
            TrajectoryShape::SCurve {
                start,
                speed,
                amplitude,
                wavelength,
            } => format!(
                "s_curve start=({},{}) speed={speed} amplitude={amplitude} wavelength={wavelength}",
                start.0, start.1
            ),
        };
        let profile = match self.trajectory.profile {
            HeadingProfile::Tangent => "tangent".to_string(),
            HeadingProfile::Fixed(angle) => format!("fixed({angle})"),
            HeadingProfile::Spin { rate, initial } => format!("spin(rate={rate},initial={initial})"),
        };
        format!("{shape} heading={profile}")
    }

    /// Canonical all-radian serialization; presets are already expanded.
    pub fn canonical_toml(&self) -> String {
        let canonical = CanonicalConfig::from(self);
        toml::to_string(&canonical).expect("canonical config serializes")
    }

    /// Content hash of the canonical serialization.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_toml().as_bytes());
        format!("sha256:{:x}", hasher.finalize())
    }
}

// ---------------------------------------------------------------------------
// canonical serialization

#[derive(Debug, Serialize)]
struct CanonicalConfig {
    kind: &'static str,
    rng_seed: u64,
    dt: f64,
    duration: f64,
    command_delay: f64,
    steer_rate_limit: f64,
    module: CanonicalModule,
    docking: CanonicalDocking,
    #[serde(skip_serializing_if = "Option::is_none")]
    formation: Option<CanonicalFormation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    headings: Option<CanonicalHeadings>,
    optimizer: CanonicalOptimizer,
    trajectory: CanonicalTrajectory,
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<CanonicalPose>,
    gains: CanonicalGains,
    #[serde(skip_serializing_if = "Option::is_none")]
    transport: Option<CanonicalTransport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    payload: Option<CanonicalPayload>,
}

#[derive(Debug, Serialize)]
struct CanonicalModule {
    circumradius: f64,
    wheel_radius: f64,
    max_wheel_speed: f64,
    mass: f64,
    n_faces: usize,
}

#[derive(Debug, Serialize)]
struct CanonicalDocking {
    magnet_tensile_force: f64,
    align_range: f64,
}

#[derive(Debug, Serialize)]
struct CanonicalFormation {
    positions: Vec<[f64; 2]>,
    // the canonical positions are already centred; re-centring them again
    // would perturb the last bits and break the round trip
    recentre: bool,
    edges: Vec<[usize; 4]>,
}

#[derive(Debug, Serialize)]
struct CanonicalHeadings {
    optimize: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    angles: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct CanonicalOptimizer {
    n_starts: usize,
    max_sweeps: usize,
}

#[derive(Debug, Serialize)]
struct CanonicalTrajectory {
    kind: &'static str,
    heading: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    heading_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spin_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spin_initial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angular_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phase: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    end: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    half_height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    corner_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wavelength: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CanonicalPose {
    x: f64,
    y: f64,
    theta: f64,
}

#[derive(Debug, Serialize)]
struct CanonicalGains {
    module: CanonicalModuleGains,
    structure: CanonicalStructureGains,
}

#[derive(Debug, Serialize)]
struct CanonicalModuleGains {
    k1: f64,
    k2: f64,
    k3: f64,
}

#[derive(Debug, Serialize)]
struct CanonicalStructureGains {
    kp_x: f64,
    ki_x: f64,
    kp_y: f64,
    ki_y: f64,
    kp_theta: f64,
    ki_theta: f64,
    integral_limit: f64,
}

#[derive(Debug, Serialize)]
struct CanonicalTransport {
    assembly: [f64; 2],
    start_poses: Vec<[f64; 3]>,
    approach_offset: f64,
    nav_speed: f64,
    creep_speed: f64,
    arrive_tolerance: f64,
}

#[derive(Debug, Serialize)]
struct CanonicalPayload {
    mass: f64,
    friction_coefficient: f64,
}

impl From<&Config> for CanonicalConfig {
    fn from(c: &Config) -> Self {
        let formation = if c.positions.is_empty() {
            None
        } else {
            Some(CanonicalFormation {
                positions: c.positions.iter().map(|p| [p.0, p.1]).collect(),
                recentre: false,
                edges: c
                    .edges
                    .iter()
                    .map(|e| [e.module_a, e.face_a, e.module_b, e.face_b])
                    .collect(),
            })
        };
        let headings = if c.kind == KindTag::SingleTrack {
            None
        } else {
            Some(match &c.headings {
                HeadingsChoice::Optimize => CanonicalHeadings {
                    optimize: true,
                    angles: None,
                },
                HeadingsChoice::Explicit(angles) => CanonicalHeadings {
                    optimize: false,
                    angles: Some(angles.clone()),
                },
            })
        };
        let mut trajectory = CanonicalTrajectory {
            kind: "",
            heading: String::new(),
            heading_angle: None,
            spin_rate: None,
            spin_initial: None,
            center: None,
            radius: None,
            angular_rate: None,
            phase: None,
            start: None,
            end: None,
            speed: None,
            half_width: None,
            half_height: None,
            corner_radius: None,
            amplitude: None,
            wavelength: None,
        };
        match &c.trajectory.shape {
            TrajectoryShape::Line { start, end, speed } => {
                trajectory.kind = "line";
                trajectory.start = Some([start.0, start.1]);
                trajectory.end = Some([end.0, end.1]);
                trajectory.speed = Some(*speed);
            }
            TrajectoryShape::Circle {
                center,
                radius,
                angular_rate,
                phase,
            } => {
                trajectory.kind = "circle";
                trajectory.center = Some([center.0, center.1]);
                trajectory.radius = Some(*radius);
                trajectory.angular_rate = Some(*angular_rate);
                trajectory.phase = Some(*phase);
            }
            TrajectoryShape::RoundedRect {
                center,
                half_width,
                half_height,
                corner_radius,
                speed,
            } => {
                trajectory.kind = "rounded_rect";
                trajectory.center = Some([center.0, center.1]);
                trajectory.half_width = Some(*half_width);
                trajectory.half_height = Some(*half_height);
                trajectory.corner_radius = Some(*corner_radius);
                trajectory.speed = Some(*speed);
            }
            TrajectoryShape::SCurve {
                start,
                speed,
                amplitude,
                wavelength,
            } => {
                trajectory.kind = "s_curve";
                trajectory.start = Some([start.0, start.1]);
                trajectory.speed = Some(*speed);
                trajectory.amplitude = Some(*amplitude);
                trajectory.wavelength = Some(*wavelength);
            }
        }
        match c.trajectory.profile {
            HeadingProfile::Tangent => trajectory.heading = "tangent".into(),
            HeadingProfile::Fixed(angle) => {
                trajectory.heading = "fixed".into();
                trajectory.heading_angle = Some(angle);
            }
            HeadingProfile::Spin { rate, initial } => {
                trajectory.heading = "spin".into();
                trajectory.spin_rate = Some(rate);
                trajectory.spin_initial = Some(initial);
            }
        }
        CanonicalConfig {
            kind: c.kind.as_str(),
            rng_seed: c.rng_seed,
            dt: c.options.dt,
            duration: c.options.duration,
            command_delay: c.options.command_delay,
            steer_rate_limit: c.options.steer_rate_limit,
            module: CanonicalModule {
                circumradius: c.module.circumradius,
                wheel_radius: c.module.wheel_radius,
                max_wheel_speed: c.module.max_wheel_speed,
                mass: c.module.mass,
                n_faces: c.module.n_faces,
            },
            docking: CanonicalDocking {
                magnet_tensile_force: c.docking.magnet_tensile_force,
                align_range: c.docking.align_range,
            },
            formation,
            headings,
            optimizer: CanonicalOptimizer {
                n_starts: c.optimizer.n_starts,
                max_sweeps: c.optimizer.max_sweeps,
            },
            trajectory,
            start: c.start.map(|p| CanonicalPose {
                x: p.x,
                y: p.y,
                theta: p.theta,
            }),
            gains: CanonicalGains {
                module: CanonicalModuleGains {
                    k1: c.module_gains.k1,
                    k2: c.module_gains.k2,
                    k3: c.module_gains.k3,
                },
                structure: CanonicalStructureGains {
                    kp_x: c.structure_gains.kp_x,
                    ki_x: c.structure_gains.ki_x,
                    kp_y: c.structure_gains.kp_y,
                    ki_y: c.structure_gains.ki_y,
                    kp_theta: c.structure_gains.kp_theta,
                    ki_theta: c.structure_gains.ki_theta,
                    integral_limit: c.structure_gains.integral_limit,
                },
            },
            transport: c.transport.as_ref().map(|t| CanonicalTransport {
                assembly: [t.assembly.0, t.assembly.1],
                start_poses: t
                    .start_poses
                    .iter()
                    .map(|p| [p.x, p.y, p.theta])
                    .collect(),
                approach_offset: t.approach_offset,
                nav_speed: t.nav_speed,
                creep_speed: t.creep_speed,
                arrive_tolerance: t.arrive_tolerance,
            }),
            payload: c.payload.map(|p| CanonicalPayload {
                mass: p.mass,
                friction_coefficient: p.friction_coefficient,
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// resolution

fn resolve(raw: RawConfig) -> Result<Config, ConfigError> {
    let kind = KindTag::parse(&raw.kind)?;

    let module = resolve_module(raw.module.as_ref())?;
    let docking = DockingSpec::new(
        module.n_faces,
        module.circumradius,
        raw.docking
            .as_ref()
            .and_then(|d| d.magnet_tensile_force)
            .unwrap_or(1.29),
        raw.docking
            .as_ref()
            .and_then(|d| d.align_range)
            .unwrap_or(0.010),
    )
    .map_err(|e| invalid(e.to_string()))?;

    let options = SimulationOptions {
        dt: raw.dt.unwrap_or(0.01),
        duration: raw.duration,
        command_delay: raw.command_delay.unwrap_or(0.0),
        steer_rate_limit: raw.steer_rate_limit.unwrap_or(TAU),
    };
    if !(options.duration > 0.0) || !options.duration.is_finite() {
        return Err(invalid(format!(
            "duration must be strictly positive, got {}",
            options.duration
        )));
    }
    if !(options.dt > 0.0) || !options.dt.is_finite() {
        return Err(invalid(format!(
            "dt must be strictly positive, got {}",
            options.dt
        )));
    }

    // kind-dependent section presence
    if kind == KindTag::SingleTrack {
        if raw.formation.is_some() {
            return Err(invalid("single_track scenarios take no [formation] table"));
        }
        if raw.headings.is_some() {
            return Err(invalid("single_track scenarios take no [headings] table"));
        }
    } else if raw.formation.is_none() {
        return Err(invalid(format!(
            "kind = {:?} requires a [formation] table",
            raw.kind
        )));
    }
    match (kind, raw.transport.is_some()) {
        (KindTag::Transport, false) => {
            return Err(invalid("kind = \"transport\" requires a [transport] table"))
        }
        (KindTag::Transport, true) => {}
        (_, true) => {
            return Err(invalid(
                "[transport] is only valid for kind = \"transport\"",
            ))
        }
        _ => {}
    }
    match (kind, raw.payload.is_some()) {
        (KindTag::Payload, false) => {
            return Err(invalid("kind = \"payload\" requires a [payload] table"))
        }
        (KindTag::Payload, true) => {}
        (_, true) => return Err(invalid("[payload] is only valid for kind = \"payload\"")),
        _ => {}
    }
    if kind == KindTag::Transport && raw.start.is_some() {
        return Err(invalid(
            "transport scenarios derive their start from [transport]; drop [start]",
        ));
    }

    let (positions, edges) = match raw.formation.as_ref() {
        None => (Vec::new(), Vec::new()),
        Some(f) => resolve_formation(f, &docking)?,
    };

    let headings = match raw.headings.as_ref() {
        None => HeadingsChoice::Optimize,
        Some(h) => {
            let angles = angle_list_pair("angles", h.angles.clone(), h.angles_deg.clone())?;
            match (h.optimize.unwrap_or(false), angles) {
                (true, Some(_)) => {
                    return Err(invalid(
                        "[headings] sets optimize = true and explicit angles; pick one",
                    ))
                }
                (true, None) => HeadingsChoice::Optimize,
                (false, Some(angles)) => HeadingsChoice::Explicit(angles),
                (false, None) => HeadingsChoice::Optimize,
            }
        }
    };
    if let HeadingsChoice::Explicit(angles) = &headings {
        if angles.len() != positions.len() {
            return Err(invalid(format!(
                "{} heading angles for {} modules",
                angles.len(),
                positions.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(invalid("heading angles must be finite"));
        }
    }

    let rng_seed = raw.rng_seed.unwrap_or(7);
    let optimizer = OptimizerOptions {
        n_starts: raw
            .optimizer
            .as_ref()
            .and_then(|o| o.n_starts)
            .unwrap_or(OptimizerOptions::default().n_starts),
        max_sweeps: raw
            .optimizer
            .as_ref()
            .and_then(|o| o.max_sweeps)
            .unwrap_or(OptimizerOptions::default().max_sweeps),
        rng_seed,
        ..OptimizerOptions::default()
    };

    let trajectory = resolve_trajectory(&raw.trajectory)?;

    let start = match raw.start.as_ref() {
        None => None,
        Some(p) => {
            let theta = angle_pair("theta", p.theta, p.theta_deg)?.unwrap_or(0.0);
            if !p.x.is_finite() || !p.y.is_finite() || !theta.is_finite() {
                return Err(invalid("start pose must be finite"));
            }
            Some(Pose2D::new(p.x, p.y, theta))
        }
    };

    let module_gains = match raw.gains.as_ref().and_then(|g| g.module.as_ref()) {
        None => ModuleGains::default(),
        Some(g) => {
            let d = ModuleGains::default();
            ModuleGains::new(
                g.k1.unwrap_or(d.k1),
                g.k2.unwrap_or(d.k2),
                g.k3.unwrap_or(d.k3),
            )
            .map_err(|e| invalid(e.to_string()))?
        }
    };
    let structure_gains = match raw.gains.as_ref().and_then(|g| g.structure.as_ref()) {
        None => StructureGains::default(),
        Some(g) => {
            let d = StructureGains::default();
            let gains = StructureGains {
                kp_x: g.kp_x.unwrap_or(d.kp_x),
                ki_x: g.ki_x.unwrap_or(d.ki_x),
                kp_y: g.kp_y.unwrap_or(d.kp_y),
                ki_y: g.ki_y.unwrap_or(d.ki_y),
                kp_theta: g.kp_theta.unwrap_or(d.kp_theta),
                ki_theta: g.ki_theta.unwrap_or(d.ki_theta),
                integral_limit: g.integral_limit.unwrap_or(d.integral_limit),
            };
            gains.validate().map_err(|e| invalid(e.to_string()))?;
            gains
        }
    };

    let transport = match raw.transport.as_ref() {
        None => None,
        Some(t) => {
            let start_poses: Vec<Pose2D> = t
                .start_poses
                .iter()
                .map(|p| Pose2D::new(p[0], p[1], p[2]))
                .collect();
            if start_poses
                .iter()
                .any(|p| !p.x.is_finite() || !p.y.is_finite())
            {
                return Err(invalid("transport start poses must be finite"));
            }
            let mut plan = TransportPlan::new(start_poses, (t.assembly[0], t.assembly[1]));
            if let Some(v) = t.approach_offset {
                plan.approach_offset = v;
            }
            if let Some(v) = t.nav_speed {
                plan.nav_speed = v;
            }
            if let Some(v) = t.creep_speed {
                plan.creep_speed = v;
            }
            if let Some(v) = t.arrive_tolerance {
                plan.arrive_tolerance = v;
            }
            Some(plan)
        }
    };

    let payload = raw.payload.as_ref().map(|p| Payload {
        mass: p.mass,
        friction_coefficient: p.friction_coefficient.unwrap_or(0.3),
    });

    Ok(Config {
        kind,
        rng_seed,
        options,
        module,
        docking,
        positions,
        edges,
        headings,
        optimizer,
        trajectory,
        start,
        module_gains,
        structure_gains,
        transport,
        payload,
    })
}

fn resolve_module(raw: Option<&RawModule>) -> Result<ModuleSpec, ConfigError> {
    let d = ModuleSpec::default();
    let (circumradius, wheel_radius, max_wheel_speed, mass, n_faces) = match raw {
        None => (
            d.circumradius,
            d.wheel_radius,
            d.max_wheel_speed,
            d.mass,
            d.n_faces,
        ),
        Some(m) => (
            m.circumradius.unwrap_or(d.circumradius),
            m.wheel_radius.unwrap_or(d.wheel_radius),
            m.max_wheel_speed.unwrap_or(d.max_wheel_speed),
            m.mass.unwrap_or(d.mass),
            m.n_faces.unwrap_or(d.n_faces),
        ),
    };
    ModuleSpec::new(circumradius, wheel_radius, max_wheel_speed, mass, n_faces)
        .map_err(|e| invalid(e.to_string()))
}

fn resolve_formation(
    raw: &RawFormation,
    docking: &DockingSpec,
) -> Result<(Vec<(f64, f64)>, Vec<DockingEdge>), ConfigError> {
    let preset = raw.preset.as_deref().unwrap_or("explicit");
    let phase = angle_pair("phase", raw.phase, raw.phase_deg)?;
    let rotation = angle_pair("rotation", raw.rotation, raw.rotation_deg)?;
    let docked_pitch = 2.0 * docking.apothem();

    let positions: Vec<(f64, f64)> = match preset {
        "explicit" => {
            let explicit = raw
                .positions
                .as_ref()
                .ok_or_else(|| invalid("formation preset \"explicit\" requires positions"))?;
            for key in [
                ("count", raw.count.is_some()),
                ("radius", raw.radius.is_some()),
                ("rows", raw.rows.is_some()),
                ("cols", raw.cols.is_some()),
                ("spacing", raw.spacing.is_some()),
                ("phase", phase.is_some()),
                ("rotation", rotation.is_some()),
            ] {
                if key.1 {
                    return Err(invalid(format!(
                        "formation key {:?} does not apply to explicit positions",
                        key.0
                    )));
                }
            }
            explicit.iter().map(|p| (p[0], p[1])).collect()
        }
        "ring" => {
            if raw.positions.is_some() || raw.rows.is_some() || raw.cols.is_some() {
                return Err(invalid(
                    "ring formations take count/radius/phase, not positions or rows/cols",
                ));
            }
            let count = raw
                .count
                .ok_or_else(|| invalid("ring formations require count"))?;
            if count < 2 {
                return Err(ConfigError::Formation(format!(
                    "ring of {count} modules cannot form a structure"
                )));
            }
            // default radius makes neighbors sit exactly one docked pitch apart
            let radius = raw
                .radius
                .unwrap_or(docked_pitch / (2.0 * (std::f64::consts::PI / count as f64).sin()));
            let phase = phase.unwrap_or((7.5_f64).to_radians());
            (0..count)
                .map(|k| {
                    let a = phase + k as f64 * TAU / count as f64;
                    (radius * a.cos(), radius * a.sin())
                })
                .collect()
        }
        "grid" => {
            if raw.positions.is_some() || raw.count.is_some() || raw.radius.is_some() {
                return Err(invalid(
                    "grid formations take rows/cols/spacing/rotation, not positions or count",
                ));
            }
            let rows = raw
                .rows
                .ok_or_else(|| invalid("grid formations require rows"))?;
            let cols = raw
                .cols
                .ok_or_else(|| invalid("grid formations require cols"))?;
            if rows == 0 || cols == 0 {
                return Err(invalid("grid rows and cols must be at least 1"));
            }
            let spacing = raw.spacing.unwrap_or(docked_pitch);
            // faces sit at (f + 0.5) * face pitch, so docked lattices lean
            // half a face off the axes
            let rotation = rotation.unwrap_or((7.5_f64).to_radians());
            let (s, c) = rotation.sin_cos();
            let mut positions = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for col in 0..cols {
                    let x = (col as f64 - (cols as f64 - 1.0) / 2.0) * spacing;
                    let y = (r as f64 - (rows as f64 - 1.0) / 2.0) * spacing;
                    positions.push((c * x - s * y, s * x + c * y));
                }
            }
            positions
        }
        other => {
            return Err(invalid(format!(
                "unknown formation preset {other:?}; expected explicit, ring or grid"
            )))
        }
    };

    if positions.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(invalid("formation positions must be finite"));
    }

    let recentre = raw.recentre.unwrap_or(true);
    let centred: Vec<(f64, f64)> = if recentre {
        let n = positions.len().max(1) as f64;
        let cx = positions.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = positions.iter().map(|p| p.1).sum::<f64>() / n;
        positions.iter().map(|p| (p.0 - cx, p.1 - cy)).collect()
    } else {
        positions
    };

    let edges = raw
        .edges
        .as_ref()
        .map(|list| {
            list.iter()
                .map(|e| DockingEdge::new(e[0], e[1], e[2], e[3]))
                .collect()
        })
        .unwrap_or_default();
    Ok((centred, edges))
}

fn resolve_trajectory(raw: &RawTrajectory) -> Result<TrajectoryConfig, ConfigError> {
    let heading_angle = angle_pair("heading_angle", raw.heading_angle, raw.heading_angle_deg)?;
    let spin_initial = angle_pair("spin_initial", raw.spin_initial, raw.spin_initial_deg)?;
    let phase = angle_pair("phase", raw.phase, raw.phase_deg)?;

    let profile = match raw.heading.as_deref().unwrap_or("tangent") {
        "tangent" => {
            if heading_angle.is_some() || raw.spin_rate.is_some() || spin_initial.is_some() {
                return Err(invalid(
                    "heading = \"tangent\" takes no heading_angle or spin keys",
                ));
            }
            HeadingProfile::Tangent
        }
        "fixed" => {
            if raw.spin_rate.is_some() || spin_initial.is_some() {
                return Err(invalid("heading = \"fixed\" takes no spin keys"));
            }
            HeadingProfile::Fixed(heading_angle.unwrap_or(0.0))
        }
        "spin" => {
            if heading_angle.is_some() {
                return Err(invalid("heading = \"spin\" takes no heading_angle"));
            }
            let rate = raw
                .spin_rate
                .ok_or_else(|| invalid("heading = \"spin\" requires spin_rate"))?;
            HeadingProfile::Spin {
                rate,
                initial: spin_initial.unwrap_or(0.0),
            }
        }
        other => {
            return Err(invalid(format!(
                "unknown trajectory heading {other:?}; expected tangent, fixed or spin"
            )))
        }
    };

    struct Keys {
        phase: Option<f64>,
    }
    impl Keys {
        fn forbid(&self, kind: &str, keys: &[(&str, bool)]) -> Result<(), ConfigError> {
            for (name, present) in keys {
                if *present {
                    return Err(invalid(format!(
                        "trajectory key {name:?} does not apply to kind {kind:?}"
                    )));
                }
            }
            Ok(())
        }
        fn require(&self, kind: &str, name: &str, value: Option<f64>) -> Result<f64, ConfigError> {
            value.ok_or_else(|| invalid(format!("trajectory kind {kind:?} requires {name}")))
        }
    }
    let keys = Keys { phase };

    let shape = match raw.kind.as_str() {
        "line" => {
            keys.forbid(
                "line",
                &[
                    ("center", raw.center.is_some()),
                    ("radius", raw.radius.is_some()),
                    ("angular_rate", raw.angular_rate.is_some()),
                    ("phase", keys.phase.is_some()),
                    ("half_width", raw.half_width.is_some()),
                    ("half_height", raw.half_height.is_some()),
                    ("corner_radius", raw.corner_radius.is_some()),
                    ("amplitude", raw.amplitude.is_some()),
                    ("wavelength", raw.wavelength.is_some()),
                ],
            )?;
            let start = raw
                .start
                .ok_or_else(|| invalid("trajectory kind \"line\" requires start"))?;
            let end = raw
                .end
                .ok_or_else(|| invalid("trajectory kind \"line\" requires end"))?;
            TrajectoryShape::Line {
                start: (start[0], start[1]),
                end: (end[0], end[1]),
                speed: keys.require("line", "speed", raw.speed)?,
            }
        }
        "circle" => {
            keys.forbid(
                "circle",
                &[
                    ("start", raw.start.is_some()),
                    ("end", raw.end.is_some()),
                    ("speed", raw.speed.is_some()),
                    ("half_width", raw.half_width.is_some()),
                    ("half_height", raw.half_height.is_some()),
                    ("corner_radius", raw.corner_radius.is_some()),
                    ("amplitude", raw.amplitude.is_some()),
                    ("wavelength", raw.wavelength.is_some()),
                ],
            )?;
            let center = raw.center.unwrap_or([0.0, 0.0]);
            TrajectoryShape::Circle {
                center: (center[0], center[1]),
                radius: keys.require("circle", "radius", raw.radius)?,
                angular_rate: keys.require("circle", "angular_rate", raw.angular_rate)?,
                phase: keys.phase.unwrap_or(0.0),
            }
        }
        "rounded_rect" => {
            keys.forbid(
                "rounded_rect",
                &[
                    ("start", raw.start.is_some()),
                    ("end", raw.end.is_some()),
                    ("radius", raw.radius.is_some()),
                    ("angular_rate", raw.angular_rate.is_some()),
                    ("phase", keys.phase.is_some()),
                    ("amplitude", raw.amplitude.is_some()),
                    ("wavelength", raw.wavelength.is_some()),
                ],
            )?;
            let center = raw.center.unwrap_or([0.0, 0.0]);
            TrajectoryShape::RoundedRect {
                center: (center[0], center[1]),
                half_width: keys.require("rounded_rect", "half_width", raw.half_width)?,
                half_height: keys.require("rounded_rect", "half_height", raw.half_height)?,
                corner_radius: keys.require("rounded_rect", "corner_radius", raw.corner_radius)?,
                speed: keys.require("rounded_rect", "speed", raw.speed)?,
            }
        }
        "s_curve" => {
            keys.forbid(
                "s_curve",
                &[
                    ("center", raw.center.is_some()),
                    ("end", raw.end.is_some()),
                    ("radius", raw.radius.is_some()),
                    ("angular_rate", raw.angular_rate.is_some()),
                    ("phase", keys.phase.is_some()),
                    ("half_width", raw.half_width.is_some()),
                    ("half_height", raw.half_height.is_some()),
                    ("corner_radius", raw.corner_radius.is_some()),
                ],
            )?;
            let start = raw.start.unwrap_or([0.0, 0.0]);
            TrajectoryShape::SCurve {
                start: (start[0], start[1]),
                speed: keys.require("s_curve", "speed", raw.speed)?,
                amplitude: keys.require("s_curve", "amplitude", raw.amplitude)?,
                wavelength: keys.require("s_curve", "wavelength", raw.wavelength)?,
            }
        }
        other => {
            return Err(invalid(format!(
                "unknown trajectory kind {other:?}; expected line, circle, rounded_rect or s_curve"
            )))
        }
    };

    let config = TrajectoryConfig { shape, profile };
    validate_trajectory(&config)?;
    Ok(config)
}

/// Builds the path once so parameter errors surface at load time.
fn validate_trajectory(config: &TrajectoryConfig) -> Result<(), ConfigError> {
    let probe = Config {
        kind: KindTag::SingleTrack,
        rng_seed: 0,
        options: SimulationOptions::default(),
        module: ModuleSpec::default(),
        docking: DockingSpec::default(),
        positions: Vec::new(),
        edges: Vec::new(),
        headings: HeadingsChoice::Optimize,
        optimizer: OptimizerOptions::default(),
        trajectory: config.clone(),
        start: None,
        module_gains: ModuleGains::default(),
        structure_gains: StructureGains::default(),
        transport: None,
        payload: None,
    };
    let mode = match config.profile {
        HeadingProfile::Tangent => HeadingMode::Tangent,
        HeadingProfile::Fixed(angle) => HeadingMode::Fixed(angle),
        HeadingProfile::Spin { rate, initial } => HeadingMode::Spin { rate, initial },
    };
    let result = match probe.trajectory.shape {
        TrajectoryShape::Line { start, end, speed } => {
            ReferencePath::line(start, end, speed, mode).map(|_| ())
        }
        TrajectoryShape::Circle {
            center,
            radius,
            angular_rate,
            phase,
        } => ReferencePath::circle(center, radius, angular_rate, phase, mode).map(|_| ()),
        TrajectoryShape::RoundedRect {
            center,
            half_width,
            half_height,
            corner_radius,
            speed,
        } => ReferencePath::rounded_rect(center, half_width, half_height, corner_radius, speed, mode)
            .map(|_| ()),
        TrajectoryShape::SCurve {
            start,
            speed,
            amplitude,
            wavelength,
        } => ReferencePath::s_curve(start, speed, amplitude, wavelength, mode).map(|_| ()),
    };
    result.map_err(|e| invalid(format!("trajectory: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = r#"
kind = "single_track"
duration = 30.0
command_delay = 0.02

[trajectory]
kind = "circle"
radius = 0.25
angular_rate = 0.2

[start]
x = 0.27
y = 0.0
theta_deg = 90.0
"#;

    fn structure_text() -> String {
        r#"
kind = "structure_track"
duration = 5.0
rng_seed = 42

[formation]
preset = "ring"
count = 6

[headings]
angles_deg = [97.5, 157.5, 217.5, 277.5, 337.5, 37.5]

[trajectory]
kind = "line"
start = [0.0, 0.0]
end = [0.5, 0.1]
speed = 0.04
heading = "fixed"
"#
        .to_string()
    }

    #[test]
    fn parses_a_single_track_config() {
        let config = Config::from_toml(SINGLE).unwrap();
        assert_eq!(config.kind, KindTag::SingleTrack);
        assert_eq!(config.rng_seed, 7);
        assert_eq!(config.options.command_delay, 0.02);
        let start = config.start.unwrap();
        assert!((start.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(matches!(
            config.trajectory.shape,
            TrajectoryShape::Circle { radius, .. } if radius == 0.25
        ));
    }

    #[test]
    fn ring_preset_expands_to_a_docked_hexagon() {
        let config = Config::from_toml(&structure_text()).unwrap();
        assert_eq!(config.positions.len(), 6);
        let pitch = 2.0 * config.docking.apothem();
        let r = config.positions[0];
        assert!((r.0.hypot(r.1) - pitch).abs() < 1e-12);
        let bearing = r.1.atan2(r.0).to_degrees();
        assert!((bearing - 7.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_both_angle_variants() {
        let text = structure_text().replace(
            "angles_deg = [97.5, 157.5, 217.5, 277.5, 337.5, 37.5]",
            "angles_deg = [97.5, 157.5, 217.5, 277.5, 337.5, 37.5]\nangles = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]",
        );
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("angles_deg"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let text = SINGLE.replace("duration = 30.0", "duration = 30.0\nbanana = 1");
        match Config::from_toml(&text) {
            Err(ConfigError::Toml(e)) => {
                let message = e.to_string();
                assert!(message.contains("banana"), "{message}");
            }
            other => panic!("expected a toml error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_payload_outside_payload_kind() {
        let text = structure_text() + "\n[payload]\nmass = 0.3\n";
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("payload"), "{err}");
    }

    #[test]
    fn rejects_zero_duration() {
        let text = SINGLE.replace("duration = 30.0", "duration = 0.0");
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("duration"), "{err}");
    }

    #[test]
    fn rejects_mismatched_heading_count() {
        let text = structure_text().replace(
            "angles_deg = [97.5, 157.5, 217.5, 277.5, 337.5, 37.5]",
            "angles_deg = [97.5, 157.5]",
        );
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("2 heading angles"), "{err}");
    }

    #[test]
    fn trajectory_keys_are_checked_per_kind() {
        let text = SINGLE.replace("radius = 0.25", "radius = 0.25\nspeed = 1.0");
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
    }

    #[test]
    fn canonical_form_round_trips() {
        for text in [SINGLE.to_string(), structure_text()] {
            let config = Config::from_toml(&text).unwrap();
            let canonical = config.canonical_toml();
            let reparsed = Config::from_toml(&canonical).unwrap();
            assert_eq!(config, reparsed, "canonical text:\n{canonical}");
            assert_eq!(config.digest(), reparsed.digest());
        }
    }

    #[test]
    fn digest_tracks_the_effective_config() {
        let a = Config::from_toml(SINGLE).unwrap();
        let mut b = Config::from_toml(SINGLE).unwrap();
        assert_eq!(a.digest(), b.digest());
        b.options.dt = 0.005;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn formation_of_two_is_a_formation_error() {
        let text = structure_text().replace("count = 6", "count = 2").replace(
            "angles_deg = [97.5, 157.5, 217.5, 277.5, 337.5, 37.5]",
            "angles_deg = [0.0, 90.0]",
        );
        let config = Config::from_toml(&text).unwrap();
        assert!(matches!(
            config.build_formation(),
            Err(ConfigError::Formation(_))
        ));
    }

    #[test]
    fn grid_preset_builds_a_rotated_lattice() {
        let text = r#"
kind = "structure_track"
duration = 1.0

[formation]
preset = "grid"
rows = 2
cols = 3

[trajectory]
kind = "line"
start = [0.0, 0.0]
end = [0.1, 0.0]
speed = 0.01
heading = "fixed"
"#;
        let config = Config::from_toml(text).unwrap();
        assert_eq!(config.positions.len(), 6);
        let formation = config.build_formation().unwrap();
        let pitch = 2.0 * config.docking.apothem();
        // neighbors along the rotated lattice axes sit one pitch apart
        let a = formation.position(0);
        let b = formation.position(1);
        let gap = (a.0 - b.0).hypot(a.1 - b.1);
        assert!((gap - pitch).abs() < 1e-12);
        let axis = (b.1 - a.1).atan2(b.0 - a.0).to_degrees();
        assert!((axis - 7.5).abs() < 1e-9, "lattice axis at {axis} deg");
    }

    #[test]
    fn transport_configs_require_their_plan() {
        let text = structure_text().replace("structure_track", "transport");
        let err = Config::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("transport"), "{err}");
    }
}

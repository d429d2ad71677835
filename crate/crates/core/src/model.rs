//! Shared geometric types for planar structures built from single-wheel modules.
//!
//! Positions are metres, angles radians. Module positions inside a structure are
//! expressed in the structure frame, whose origin is the formation centroid.

use std::f64::consts::TAU;

use thiserror::Error;

/// Centroid slack accepted when validating a formation, in metres.
pub const CENTRE_TOLERANCE: f64 = 1e-9;

/// Errors raised while constructing or validating model types.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("a structure needs at least 3 modules, got {0}")]
    TooFewModules(usize),
    #[error("formation centroid is off the origin by {0:.3e} m, recentre it first")]
    NotCentred(f64),
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("face count must be an even number of at least 4, got {0}")]
    BadFaceCount(usize),
    #[error("docking edge references module {module} but the formation has {len} modules")]
    EdgeOutOfRange { module: usize, len: usize },
    #[error("docking edge connects module {0} to itself")]
    SelfEdge(usize),
    #[error("value for {0} is not finite")]
    NotFinite(&'static str),
}

/// Wraps an angle into `[0, 2*pi)`.
pub fn wrap_to_2pi(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to the modulus itself for tiny negative inputs
    if r >= TAU {
        r - TAU
    } else {
        r
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_to_pi(angle: f64) -> f64 {
    let r = wrap_to_2pi(angle);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

/// Planar pose. `theta` is kept in `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    /// Position, m.
    pub x: f64,
    /// Position, m.
    pub y: f64,
    /// Heading, rad, normalised to `[0, 2*pi)`.
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_to_2pi(theta),
        }
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Euclidean distance between the positions of two poses, m.
    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Maps a point given in the structure frame to world coordinates.
pub fn world_from_structure(structure_pose: &Pose2D, local: (f64, f64)) -> (f64, f64) {
    let (s, c) = structure_pose.theta.sin_cos();
    (
        structure_pose.x + c * local.0 - s * local.1,
        structure_pose.y + s * local.0 + c * local.1,
    )
}

/// Physical parameters of one module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleSpec {
    /// Circumradius of the polygonal contour, m.
    pub circumradius: f64,
    /// Omni wheel radius, m.
    pub wheel_radius: f64,
    /// Wheel speed limit, rad/s.
    pub max_wheel_speed: f64,
    /// Module mass, kg.
    pub mass: f64,
    /// Number of contour faces; must be even so opposite faces exist.
    pub n_faces: usize,
}

impl ModuleSpec {
    pub fn new(
        circumradius: f64,
        wheel_radius: f64,
        max_wheel_speed: f64,
        mass: f64,
        n_faces: usize,
    ) -> Result<Self, ModelError> {
        for (name, value) in [
            ("circumradius", circumradius),
            ("wheel_radius", wheel_radius),
            ("max_wheel_speed", max_wheel_speed),
            ("mass", mass),
        ] {
            if !value.is_finite() {
                return Err(ModelError::NotFinite(name));
            }
            if value <= 0.0 {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        if n_faces < 4 || n_faces % 2 != 0 {
            return Err(ModelError::BadFaceCount(n_faces));
        }
        Ok(Self {
            circumradius,
            wheel_radius,
            max_wheel_speed,
            mass,
            n_faces,
        })
    }

    /// Apothem of the contour polygon (centre to face midpoint), m.
    pub fn apothem(&self) -> f64 {
        self.circumradius * (std::f64::consts::PI / self.n_faces as f64).cos()
    }

    /// Length of one contour face, m.
    pub fn face_length(&self) -> f64 {
        2.0 * self.circumradius * (std::f64::consts::PI / self.n_faces as f64).sin()
    }

    /// Top drive speed of the wheel contact point, m/s.
    pub fn max_drive_speed(&self) -> f64 {
        self.max_wheel_speed * self.wheel_radius
    }
}

impl Default for ModuleSpec {
    /// Bench values for the physical module: 0.100 m contour diameter, 0.028 m wheel,
    /// 0.073 m/s top speed, 0.253 kg, 24 faces.
    fn default() -> Self {
        Self {
            circumradius: 0.050,
            wheel_radius: 0.028,
            max_wheel_speed: 0.073 / 0.028,
            mass: 0.253,
            n_faces: 24,
        }
    }
}

/// One declared magnetic connection between faces of two modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DockingEdge {
    pub module_a: usize,
    pub face_a: usize,
    pub module_b: usize,
    pub face_b: usize,
}

impl DockingEdge {
    pub fn new(module_a: usize, face_a: usize, module_b: usize, face_b: usize) -> Self {
        Self {
            module_a,
            face_a,
            module_b,
            face_b,
        }
    }
}

/// Where the modules sit inside the structure frame, plus the declared docking
/// topology. The centroid of `positions` is required to be the origin; use
/// [`recentre_formation`] to shift an arbitrary layout there.
///
/// Geometric feasibility (overlap, connectivity, magnet polarity) is checked
/// separately in the docking module, so intermediate layouts that only exist
/// mid-assembly are still representable.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationConfiguration {
    positions: Vec<(f64, f64)>,
    docking_edges: Vec<DockingEdge>,
}

impl FormationConfiguration {
    pub fn new(
        positions: Vec<(f64, f64)>,
        docking_edges: Vec<DockingEdge>,
    ) -> Result<Self, ModelError> {
        if positions.len() < 3 {
            return Err(ModelError::TooFewModules(positions.len()));
        }
        for &(x, y) in &positions {
            if !x.is_finite() || !y.is_finite() {
                return Err(ModelError::NotFinite("module position"));
            }
        }
        let n = positions.len() as f64;
        let cx = positions.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = positions.iter().map(|p| p.1).sum::<f64>() / n;
        let off = cx.hypot(cy);
        if off > CENTRE_TOLERANCE {
            return Err(ModelError::NotCentred(off));
        }
        for edge in &docking_edges {
            for module in [edge.module_a, edge.module_b] {
                if module >= positions.len() {
                    return Err(ModelError::EdgeOutOfRange {
                        module,
                        len: positions.len(),
                    });
                }
            }
            if edge.module_a == edge.module_b {
                return Err(ModelError::SelfEdge(edge.module_a));
            }
        }
        Ok(Self {
            positions,
            docking_edges,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> (f64, f64) {
        self.positions[i]
    }

    pub fn docking_edges(&self) -> &[DockingEdge] {
        &self.docking_edges
    }
}

/// Shifts a layout so its centroid lands exactly on the origin.
///
/// Idempotent up to floating point noise; relative geometry is preserved.
pub fn recentre_formation(positions: &[(f64, f64)]) -> Result<FormationConfiguration, ModelError> {
    recentre_formation_with_edges(positions, Vec::new())
}

/// Same as [`recentre_formation`] but keeps a declared docking topology.
pub fn recentre_formation_with_edges(
    positions: &[(f64, f64)],
    docking_edges: Vec<DockingEdge>,
) -> Result<FormationConfiguration, ModelError> {
    if positions.len() < 3 {
        return Err(ModelError::TooFewModules(positions.len()));
    }
    let n = positions.len() as f64;
    let cx = positions.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = positions.iter().map(|p| p.1).sum::<f64>() / n;
    let shifted: Vec<(f64, f64)> = positions.iter().map(|p| (p.0 - cx, p.1 - cy)).collect();
    FormationConfiguration::new(shifted, docking_edges)
}

/// Wheel heading of every module, structure frame, wrapped to `[0, 2*pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadingConfiguration {
    angles: Vec<f64>,
}

impl HeadingConfiguration {
    pub fn new(angles: Vec<f64>) -> Self {
        Self {
            angles: angles.into_iter().map(wrap_to_2pi).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

/// Planar velocity of the structure: linear parts in m/s, angular in rad/s.
///
/// The carrier frame is contextual. Controllers produce world frame twists and
/// the wheel mapping consumes structure frame twists; [`StructureTwist::rotated`]
/// converts between the two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureTwist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl StructureTwist {
    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Euclidean norm of the full (vx, vy, omega) vector.
    pub fn norm(&self) -> f64 {
        (self.vx * self.vx + self.vy * self.vy + self.omega * self.omega).sqrt()
    }

    /// Rotates the linear part by `angle`; the angular rate is frame independent.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            vx: c * self.vx - s * self.vy,
            vy: s * self.vx + c * self.vy,
            omega: self.omega,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

/// Wheel angular velocities for every module, rad/s, in formation order.
#[derive(Debug, Clone, PartialEq)]
pub struct WheelSpeeds {
    pub omegas: Vec<f64>,
}

impl WheelSpeeds {
    pub fn new(omegas: Vec<f64>) -> Self {
        Self { omegas }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            omegas: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Largest magnitude across all wheels, rad/s. Zero for an empty set.
    pub fn max_abs(&self) -> f64 {
        self.omegas.iter().fold(0.0_f64, |m, w| m.max(w.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn wrap_2pi_basics() {
        assert_relative_eq!(wrap_to_2pi(0.0), 0.0);
        assert_relative_eq!(wrap_to_2pi(TAU + 0.5), 0.5, max_relative = 1e-15);
        assert_relative_eq!(wrap_to_2pi(-0.5), TAU - 0.5, max_relative = 1e-15);
        // tiny negative values must not escape the half open interval
        let w = wrap_to_2pi(-1e-18);
        assert!((0.0..TAU).contains(&w));
    }

    #[test]
    fn wrap_pi_is_half_open() {
        assert_relative_eq!(wrap_to_pi(PI), PI);
        assert_relative_eq!(wrap_to_pi(-PI), PI);
        assert_relative_eq!(wrap_to_pi(3.0 * PI), PI);
        assert_relative_eq!(wrap_to_pi(0.1 - TAU), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn world_from_structure_identity() {
        let p = world_from_structure(&Pose2D::origin(), (0.3, -0.1));
        assert_relative_eq!(p.0, 0.3);
        assert_relative_eq!(p.1, -0.1);
    }

    #[test]
    fn world_from_structure_quarter_turn() {
        let pose = Pose2D::new(1.0, 2.0, FRAC_PI_2);
        let p = world_from_structure(&pose, (1.0, 0.0));
        assert_relative_eq!(p.0, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.1, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn world_from_structure_half_turn() {
        let pose = Pose2D::new(0.1, -0.2, PI);
        let p = world_from_structure(&pose, (0.05, 0.0));
        assert_relative_eq!(p.0, 0.05, epsilon = 1e-12);
        assert_relative_eq!(p.1, -0.2, epsilon = 1e-12);
    }

    #[test]
    fn world_from_structure_is_an_isometry() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let pose = Pose2D::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..TAU),
            );
            let a = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let b = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let wa = world_from_structure(&pose, a);
            let wb = world_from_structure(&pose, b);
            let before = (a.0 - b.0).hypot(a.1 - b.1);
            let after = (wa.0 - wb.0).hypot(wa.1 - wb.1);
            assert_relative_eq!(before, after, epsilon = 1e-12);
        }
    }

    #[test]
    fn recentre_shifts_to_origin() {
        let f = recentre_formation(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).unwrap();
        assert_eq!(
            f.positions(),
            &[(-1.0, -1.0), (0.0, 0.0), (1.0, 1.0)][..]
        );
    }

    #[test]
    fn recentre_is_idempotent() {
        let first = recentre_formation(&[(0.4, -0.3), (-0.2, 0.9), (0.15, 0.05)]).unwrap();
        let again = recentre_formation(first.positions()).unwrap();
        for (a, b) in first.positions().iter().zip(again.positions()) {
            assert_relative_eq!(a.0, b.0, epsilon = 1e-12);
            assert_relative_eq!(a.1, b.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn recentre_rejects_pairs() {
        assert_eq!(
            recentre_formation(&[(0.0, 0.0), (1.0, 0.0)]),
            Err(ModelError::TooFewModules(2))
        );
    }

    #[test]
    fn formation_requires_centred_positions() {
        let err = FormationConfiguration::new(
            vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
            Vec::new(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NotCentred(_)));
    }

    #[test]
    fn formation_validates_edges() {
        let positions = vec![(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)];
        let err = FormationConfiguration::new(
            positions.clone(),
            vec![DockingEdge::new(0, 0, 7, 12)],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::EdgeOutOfRange { module: 7, .. }));
        let err = FormationConfiguration::new(positions, vec![DockingEdge::new(1, 0, 1, 12)])
            .unwrap_err();
        assert_eq!(err, ModelError::SelfEdge(1));
    }

    #[test]
    fn module_spec_defaults_match_bench_hardware() {
        let spec = ModuleSpec::default();
        assert_relative_eq!(spec.circumradius, 0.050);
        assert_relative_eq!(spec.wheel_radius, 0.028);
        assert_relative_eq!(spec.max_wheel_speed, 2.607142857142857, epsilon = 1e-12);
        assert_relative_eq!(spec.max_drive_speed(), 0.073, epsilon = 1e-15);
        assert_eq!(spec.n_faces, 24);
        // 24-gon face of a 0.05 m circumradius polygon is about 13 mm
        assert_relative_eq!(spec.face_length(), 0.013052619222005157, epsilon = 1e-15);
    }

    #[test]
    fn module_spec_rejects_bad_values() {
        assert!(matches!(
            ModuleSpec::new(0.0, 0.028, 2.6, 0.25, 24),
            Err(ModelError::NonPositive { name: "circumradius", .. })
        ));
        assert!(matches!(
            ModuleSpec::new(0.05, 0.028, 2.6, 0.25, 23),
            Err(ModelError::BadFaceCount(23))
        ));
    }

    #[test]
    fn heading_configuration_wraps() {
        let h = HeadingConfiguration::new(vec![-0.1, TAU + 0.2, 1.0]);
        assert_relative_eq!(h.angles()[0], TAU - 0.1, max_relative = 1e-15);
        assert_relative_eq!(h.angles()[1], 0.2, epsilon = 1e-12);
        assert_relative_eq!(h.angles()[2], 1.0);
    }

    #[test]
    fn twist_rotation_preserves_norm_and_omega() {
        let t = StructureTwist::new(0.3, -0.4, 0.7);
        let r = t.rotated(1.234);
        assert_relative_eq!(t.norm(), r.norm(), epsilon = 1e-12);
        assert_relative_eq!(r.omega, 0.7);
        let back = r.rotated(-1.234);
        assert_relative_eq!(back.vx, t.vx, epsilon = 1e-12);
        assert_relative_eq!(back.vy, t.vy, epsilon = 1e-12);
    }

    #[test]
    fn wheel_speed_peak() {
        assert_relative_eq!(WheelSpeeds::new(vec![0.1, -2.5, 1.0]).max_abs(), 2.5);
        assert_relative_eq!(WheelSpeeds::zeros(3).max_abs(), 0.0);
    }
}

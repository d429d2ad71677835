//! Contour geometry, magnetic docking sites and formation feasibility.
//!
//! Module contours are regular polygons that never rotate: driving and steering
//! happen in the wheel assembly while the docking base keeps its orientation.
//! All contours therefore share one angular convention, vertex 0 on the +x axis
//! of the structure frame. Face f runs from vertex f to vertex f+1, so its
//! outward normal points along `(f + 0.5) * 2*pi / n_faces`.
//!
//! Corner magnets alternate N/S around the contour with the same phase on every
//! module. Two opposed faces then attract exactly when their indices share
//! parity: each corner meets the other face's far corner, whose polarity is
//! flipped by the one step offset. Head-on opposition between equally oriented
//! contours forces `face_b = face_a + n/2`, which for 24 faces always shares
//! parity; the polarity check exists to catch hand declared topologies that
//! could not actually latch.

use thiserror::Error;

use crate::model::{wrap_to_pi, FormationConfiguration};

/// Errors from docking parameter validation.
#[derive(Debug, Error, PartialEq)]
pub enum DockingError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("face count must be an even number of at least 4, got {0}")]
    BadFaceCount(usize),
}

/// Geometry and magnet strength of the docking contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DockingSpec {
    /// Number of contour faces; even, so every face has an opposite.
    pub n_faces: usize,
    /// Contour circumradius, m.
    pub circumradius: f64,
    /// Holding force of one mated face pair, N.
    pub magnet_tensile_force: f64,
    /// Capture distance of the passive magnetic alignment, m.
    pub align_range: f64,
}

impl DockingSpec {
    pub fn new(
        n_faces: usize,
        circumradius: f64,
        magnet_tensile_force: f64,
        align_range: f64,
    ) -> Result<Self, DockingError> {
        if n_faces < 4 || n_faces % 2 != 0 {
            return Err(DockingError::BadFaceCount(n_faces));
        }
        for (name, value) in [
            ("circumradius", circumradius),
            ("magnet_tensile_force", magnet_tensile_force),
            ("align_range", align_range),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(DockingError::NonPositive { name, value });
            }
        }
        Ok(Self {
            n_faces,
            circumradius,
            magnet_tensile_force,
            align_range,
        })
    }

    /// Centre to face midpoint distance, m.
    pub fn apothem(&self) -> f64 {
        self.circumradius * (std::f64::consts::PI / self.n_faces as f64).cos()
    }

    /// Length of one face, m.
    pub fn face_length(&self) -> f64 {
        2.0 * self.circumradius * (std::f64::consts::PI / self.n_faces as f64).sin()
    }

    /// Direction of the outward normal of face `f`, rad.
    pub fn face_normal(&self, f: usize) -> f64 {
        (f as f64 + 0.5) * std::f64::consts::TAU / self.n_faces as f64
    }

    /// Peak torque one mated face pair can transmit in the plane, N m.
    ///
    /// The two corner magnet pairs act as a force couple across the face.
    pub fn shear_torque(&self) -> f64 {
        shear_torque(self.magnet_tensile_force, self.face_length())
    }
}

impl Default for DockingSpec {
    /// Bench hardware: 24 faces, 0.050 m circumradius, 1.29 N per face pair,
    /// 10 mm capture range.
    fn default() -> Self {
        Self {
            n_faces: 24,
            circumradius: 0.050,
            magnet_tensile_force: 1.29,
            align_range: 0.010,
        }
    }
}

/// Vertices of the contour polygon around the origin, vertex 0 on the +x axis.
pub fn contour_vertices(spec: &DockingSpec) -> Vec<(f64, f64)> {
    (0..spec.n_faces)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / spec.n_faces as f64;
            (spec.circumradius * a.cos(), spec.circumradius * a.sin())
        })
        .collect()
}

/// Torque a tensile force pair separated by one face length can resist, N m.
pub fn shear_torque(tensile_force: f64, face_length: f64) -> f64 {
    tensile_force * face_length / 2.0
}

/// A face pair close and anti parallel enough for the magnets to latch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DockingSite {
    pub module_a: usize,
    pub face_a: usize,
    pub module_b: usize,
    pub face_b: usize,
    /// Distance between the two face midpoints, m.
    pub midpoint_gap: f64,
    /// How far the normals are from exactly opposing, rad.
    pub normal_misalignment: f64,
}

/// The latching face pair for every touching module pair of the formation.
///
/// A face pair qualifies when the face midpoints are within `align_range` and
/// the outward normals are anti parallel within the angle subtended by the
/// capture range across one face. On a fine polygon the faces flanking a
/// genuine contact can sneak inside both tolerances too, but convex contours
/// touch flush on exactly one face pair, so per module pair only the best
/// aligned qualifying candidate is reported. Sites carry `module_a < module_b`
/// and come out ordered by module indices.
pub fn enumerate_docking_sites(
    formation: &FormationConfiguration,
    spec: &DockingSpec,
) -> Vec<DockingSite> {
    let apothem = spec.apothem();
    let angle_tolerance = spec.align_range / spec.face_length();
    let reach = 2.0 * spec.circumradius + spec.align_range;
    let mut sites = Vec::new();
    for a in 0..formation.len() {
        for b in (a + 1)..formation.len() {
            let (ax, ay) = formation.position(a);
            let (bx, by) = formation.position(b);
            if (ax - bx).hypot(ay - by) > reach {
                continue;
            }
            let mut best: Option<DockingSite> = None;
            for face_a in 0..spec.n_faces {
                let na = spec.face_normal(face_a);
                let ma = (ax + apothem * na.cos(), ay + apothem * na.sin());
                for face_b in 0..spec.n_faces {
                    let nb = spec.face_normal(face_b);
                    let misalignment = wrap_to_pi(na - nb - std::f64::consts::PI).abs();
                    if misalignment > angle_tolerance {
                        continue;
                    }
                    let mb = (bx + apothem * nb.cos(), by + apothem * nb.sin());
                    let gap = (ma.0 - mb.0).hypot(ma.1 - mb.1);
                    if gap > spec.align_range {
                        continue;
                    }
                    let candidate = DockingSite {
                        module_a: a,
                        face_a,
                        module_b: b,
                        face_b,
                        midpoint_gap: gap,
                        normal_misalignment: misalignment,
                    };
                    let replace = match &best {
                        None => true,
                        Some(b) => {
                            (gap, misalignment) < (b.midpoint_gap, b.normal_misalignment)
                        }
                    };
                    if replace {
                        best = Some(candidate);
                    }
                }
            }
            sites.extend(best);
        }
    }
    sites
}

/// Outcome of the static checks a formation must pass before assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Every module is reachable from every other through docking sites.
    pub connected: bool,
    /// No two contours intrude into each other beyond the capture slack.
    pub non_overlapping: bool,
    /// All latching face pairs attract rather than repel.
    pub polarity_consistent: bool,
    /// Every hand declared docking edge corresponds to an enumerated site.
    pub declared_edges_realized: bool,
    /// The enumerated sites backing the verdict.
    pub sites: Vec<DockingSite>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.connected && self.non_overlapping && self.polarity_consistent
            && self.declared_edges_realized
    }
}

/// Static feasibility of a formation: connectivity through docking sites, no
/// contour overlap, magnet polarity, and declared topology actually latching.
pub fn check_formation_feasible(
    formation: &FormationConfiguration,
    spec: &DockingSpec,
) -> FeasibilityReport {
    let sites = enumerate_docking_sites(formation, spec);
    let n = formation.len();

    let mut adjacency = vec![Vec::new(); n];
    for site in &sites {
        adjacency[site.module_a].push(site.module_b);
        adjacency[site.module_b].push(site.module_a);
    }
    let mut seen = vec![false; n];
    let mut queue = vec![0_usize];
    seen[0] = true;
    while let Some(i) = queue.pop() {
        for &j in &adjacency[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push(j);
            }
        }
    }
    let connected = seen.iter().all(|&s| s);

    let min_distance = 2.0 * spec.apothem() - spec.align_range;
    let mut non_overlapping = true;
    'pairs: for a in 0..n {
        for b in (a + 1)..n {
            let (ax, ay) = formation.position(a);
            let (bx, by) = formation.position(b);
            if (ax - bx).hypot(ay - by) < min_distance {
                non_overlapping = false;
                break 'pairs;
            }
        }
    }

    let attracts = |fa: usize, fb: usize| (fa + fb) % 2 == 0;
    let mut polarity_consistent = sites.iter().all(|s| attracts(s.face_a, s.face_b));
    let mut declared_edges_realized = true;
    for edge in formation.docking_edges() {
        if !attracts(edge.face_a, edge.face_b) {
            polarity_consistent = false;
        }
        let found = sites.iter().any(|s| {
            (s.module_a == edge.module_a
                && s.face_a == edge.face_a
                && s.module_b == edge.module_b
                && s.face_b == edge.face_b)
                || (s.module_a == edge.module_b
                    && s.face_a == edge.face_b
                    && s.module_b == edge.module_a
                    && s.face_b == edge.face_a)
        });
        if !found {
            declared_edges_realized = false;
        }
    }

    FeasibilityReport {
        connected,
        non_overlapping,
        polarity_consistent,
        declared_edges_realized,
        sites,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{recentre_formation, recentre_formation_with_edges, DockingEdge};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn chain_of_three() -> FormationConfiguration {
        // three modules in a row along a face normal direction, each pair docked
        let spec = DockingSpec::default();
        let step = 2.0 * spec.apothem();
        let dir = spec.face_normal(0);
        let positions: Vec<(f64, f64)> = (0..3)
            .map(|k| (k as f64 * step * dir.cos(), k as f64 * step * dir.sin()))
            .collect();
        recentre_formation(&positions).unwrap()
    }

    fn hexagon() -> FormationConfiguration {
        let spec = DockingSpec::default();
        let radius = 2.0 * spec.apothem();
        let phase = 7.5_f64.to_radians();
        let positions: Vec<(f64, f64)> = (0..6)
            .map(|k| {
                let b = phase + k as f64 * TAU / 6.0;
                (radius * b.cos(), radius * b.sin())
            })
            .collect();
        recentre_formation(&positions).unwrap()
    }

    #[test]
    fn vertices_start_on_the_x_axis() {
        let spec = DockingSpec::default();
        let v = contour_vertices(&spec);
        assert_eq!(v.len(), 24);
        assert_relative_eq!(v[0].0, 0.05);
        assert_relative_eq!(v[0].1, 0.0);
        // a quarter of the way round lands on +y
        assert_relative_eq!(v[6].0, 0.0, epsilon = 1e-12);
        assert_relative_eq!(v[6].1, 0.05, epsilon = 1e-12);
        for k in 0..24 {
            let next = v[(k + 1) % 24];
            let d = (v[k].0 - next.0).hypot(v[k].1 - next.1);
            assert_relative_eq!(d, spec.face_length(), epsilon = 1e-12);
        }
    }

    #[test]
    fn face_length_of_bench_contour() {
        assert_relative_eq!(
            DockingSpec::default().face_length(),
            0.013052619222005157,
            epsilon = 1e-15
        );
    }

    #[test]
    fn shear_torque_matches_bench_rating() {
        // data sheet says 8.39 mN m; the couple model lands within one percent
        let spec = DockingSpec::default();
        let torque = spec.shear_torque();
        assert!((torque - 8.39e-3).abs() / 8.39e-3 < 0.01);
        assert_relative_eq!(torque, 1.29 * spec.face_length() / 2.0);
    }

    #[test]
    fn shear_torque_is_linear_and_zero_at_zero() {
        assert_relative_eq!(shear_torque(0.0, 0.013), 0.0);
        assert_relative_eq!(
            shear_torque(2.58, 0.013),
            2.0 * shear_torque(1.29, 0.013),
            epsilon = 1e-15
        );
    }

    #[test]
    fn adjacent_modules_expose_one_site_per_contact() {
        let spec = DockingSpec::default();
        let sites = enumerate_docking_sites(&chain_of_three(), &spec);
        assert_eq!(sites.len(), 2);
        for site in &sites {
            assert_eq!(site.face_b, (site.face_a + 12) % 24);
            assert!(site.midpoint_gap < 1e-9);
            assert!(site.normal_misalignment < 1e-9);
        }
        assert_eq!((sites[0].module_a, sites[0].module_b), (0, 1));
        assert_eq!((sites[1].module_a, sites[1].module_b), (1, 2));
    }

    #[test]
    fn distant_modules_have_no_sites() {
        let positions = vec![(-0.5, 0.0), (0.0, 0.0), (0.5, 0.0)];
        let formation = recentre_formation(&positions).unwrap();
        let sites = enumerate_docking_sites(&formation, &DockingSpec::default());
        assert!(sites.is_empty());
        let report = check_formation_feasible(&formation, &DockingSpec::default());
        assert!(!report.connected);
        assert!(report.non_overlapping);
        assert!(!report.is_feasible());
    }

    #[test]
    fn hexagon_cage_is_feasible() {
        let report = check_formation_feasible(&hexagon(), &DockingSpec::default());
        assert_eq!(report.sites.len(), 6);
        assert!(report.connected);
        assert!(report.non_overlapping);
        assert!(report.polarity_consistent);
        assert!(report.is_feasible());
    }

    #[test]
    fn intruding_contours_fail_the_overlap_check() {
        let positions = vec![(-0.025, 0.0), (0.025, 0.0), (0.0, 0.12)];
        let formation = recentre_formation(&positions).unwrap();
        let report = check_formation_feasible(&formation, &DockingSpec::default());
        assert!(!report.non_overlapping);
    }

    #[test]
    fn odd_parity_declaration_cannot_latch() {
        let spec = DockingSpec::default();
        let step = 2.0 * spec.apothem();
        let dir = spec.face_normal(0);
        let positions: Vec<(f64, f64)> = (0..3)
            .map(|k| (k as f64 * step * dir.cos(), k as f64 * step * dir.sin()))
            .collect();
        let formation = recentre_formation_with_edges(
            &positions,
            vec![DockingEdge::new(0, 0, 1, 13)],
        )
        .unwrap();
        let report = check_formation_feasible(&formation, &spec);
        assert!(!report.polarity_consistent);
        assert!(!report.declared_edges_realized);
        assert!(!report.is_feasible());
    }

    #[test]
    fn declared_edges_matching_geometry_are_realized() {
        let spec = DockingSpec::default();
        let step = 2.0 * spec.apothem();
        let dir = spec.face_normal(0);
        let positions: Vec<(f64, f64)> = (0..3)
            .map(|k| (k as f64 * step * dir.cos(), k as f64 * step * dir.sin()))
            .collect();
        // declare the second pair reversed to exercise symmetric matching
        let formation = recentre_formation_with_edges(
            &positions,
            vec![DockingEdge::new(0, 0, 1, 12), DockingEdge::new(2, 12, 1, 0)],
        )
        .unwrap();
        let report = check_formation_feasible(&formation, &spec);
        assert!(report.declared_edges_realized);
        assert!(report.is_feasible());
    }

    #[test]
    fn site_enumeration_is_translation_invariant_before_recentring() {
        // the same chain built around a different centroid recentres to the
        // same relative geometry, so the sites match
        let spec = DockingSpec::default();
        let step = 2.0 * spec.apothem();
        let dir = spec.face_normal(4);
        let base: Vec<(f64, f64)> = (0..4)
            .map(|k| {
                (
                    0.7 + k as f64 * step * dir.cos(),
                    -0.3 + k as f64 * step * dir.sin(),
                )
            })
            .collect();
        let formation = recentre_formation(&base).unwrap();
        let sites = enumerate_docking_sites(&formation, &spec);
        assert_eq!(sites.len(), 3);
        for site in sites {
            assert_eq!(site.face_a, 4);
            assert_eq!(site.face_b, 16);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            DockingSpec::new(24, 0.0, 1.29, 0.01),
            Err(DockingError::NonPositive { name: "circumradius", .. })
        ));
        assert_eq!(
            DockingSpec::new(7, 0.05, 1.29, 0.01),
            Err(DockingError::BadFaceCount(7))
        );
        let spec = DockingSpec::default();
        assert_relative_eq!(spec.apothem(), 0.05 * (std::f64::consts::PI / 24.0).cos());
    }
}

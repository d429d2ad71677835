//! Wheel heading selection for a rigid formation.
//!
//! The quality of a heading set is judged through the singular spectrum of the
//! wheel mapping: `condition_number + sigma_max^2`. A small sigma_max keeps the
//! worst case wheel effort per unit twist down, a small condition number keeps
//! the structure equally capable in every twist direction. Rank deficient
//! mappings score positive infinity rather than raising an error so search code
//! can treat them as ordinary, maximally bad points.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kinematics::{KinematicsError, MapperMetrics, VelocityMapper};
use crate::model::{wrap_to_2pi, FormationConfiguration, HeadingConfiguration, StructureTwist};

/// Exhaustive search refuses formations larger than this.
pub const GRID_MAX_MODULES: usize = 4;
/// Exhaustive search refuses grids with more evaluations than this.
pub const GRID_EVAL_CAP: u128 = 250_000_000;

const SCAN_POINTS: usize = 24;
const GOLDEN_MAX_ITER: usize = 80;

/// Errors from heading search.
#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("no full rank heading set found from {starts} starts, formation geometry is degenerate")]
    Degenerate { starts: usize },
    #[error("exhaustive search supports at most {max} modules, got {got}")]
    TooManyModules { max: usize, got: usize },
    #[error("grid would need {evaluations} evaluations, above the cap of {cap}; coarsen the resolution")]
    GridTooLarge { evaluations: u128, cap: u128 },
    #[error("grid resolution must be a finite positive angle, got {0}")]
    BadResolution(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Knobs for [`optimize_headings`]. The defaults are deterministic and cheap
/// enough for interactive use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Random restarts on top of the tangential seed.
    pub n_starts: usize,
    /// Upper bound on coordinate descent sweeps per start.
    pub max_sweeps: usize,
    /// Relative objective improvement below which a start counts as converged.
    pub objective_tolerance: f64,
    /// Width of the final golden section bracket, rad.
    pub angle_tolerance: f64,
    /// Seed for the restart stream; equal seeds give identical results.
    pub rng_seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            n_starts: 12,
            max_sweeps: 60,
            objective_tolerance: 1e-10,
            angle_tolerance: 1e-7,
            rng_seed: 7,
        }
    }
}

/// Outcome of a heading search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Winning headings, wrapped to `[0, 2*pi)`.
    pub headings: HeadingConfiguration,
    /// `condition_number + sigma_max^2` at the winner; finite unless every
    /// candidate was rank deficient (only the grid reports such winners).
    pub objective_value: f64,
    /// Spectrum of the winning mapping.
    pub metrics: MapperMetrics,
    /// How many starts ended on a full rank configuration. Exhaustive search
    /// reports 1 when the winning grid point is full rank, else 0.
    pub starts_converged: usize,
}

/// Heading quality for one candidate: `condition_number + sigma_max^2`,
/// `f64::INFINITY` when the mapping is rank deficient.
pub fn objective(
    formation: &FormationConfiguration,
    headings: &HeadingConfiguration,
    wheel_radius: f64,
) -> f64 {
    let mapper = VelocityMapper::build(formation, headings, wheel_radius)
        .expect("objective called with mismatched formation and headings");
    let m = mapper.metrics();
    m.condition_number + m.sigma_max * m.sigma_max
}

/// Upper bound on the instantaneous sum of squared wheel speeds for a twist.
///
/// `Omega = M V` gives `|Omega|^2 <= (sigma_max |V|)^2`, tight when V lies
/// along the leading right singular direction.
pub fn energy_upper_bound(mapper: &VelocityMapper, twist: &StructureTwist) -> f64 {
    let s = mapper.metrics().sigma_max * twist.norm();
    s * s
}

/// Multi start local search over wheel headings.
///
/// Starts from the tangential layout plus `n_starts` random draws, refines each
/// with coordinate descent (a bracketing scan of the coordinate circle followed
/// by golden section), and keeps the best refined candidate. Ties in the final
/// objective go to the lexicographically smallest wrapped angle vector. The
/// search is deterministic for a fixed seed, and growing `n_starts` with the
/// same seed never worsens the result because earlier starts are replayed
/// identically.
pub fn optimize_headings(
    formation: &FormationConfiguration,
    wheel_radius: f64,
    options: &OptimizerOptions,
) -> Result<OptimizationResult, OptimizerError> {
    if !(wheel_radius > 0.0) {
        return Err(KinematicsError::BadWheelRadius(wheel_radius).into());
    }
    let n = formation.len();
    let mut rng = ChaCha8Rng::seed_from_u64(options.rng_seed);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(options.n_starts + 1);
    starts.push(tangential_headings(formation));
    for _ in 0..options.n_starts {
        starts.push((0..n).map(|_| rng.gen_range(0.0..TAU)).collect());
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut starts_converged = 0;
    for start in starts.iter() {
        let (value, angles) = refine_start(formation, wheel_radius, start, options);
        if value.is_finite() {
            starts_converged += 1;
        }
        let candidate_wins = match &best {
            None => true,
            Some((bv, ba)) => value < *bv || (value == *bv && lex_less(&angles, ba)),
        };
        if candidate_wins {
            best = Some((value, angles));
        }
    }
    let (value, angles) = best.expect("at least the tangential start is always present");
    if !value.is_finite() {
        return Err(OptimizerError::Degenerate {
            starts: starts.len(),
        });
    }
    Ok(finish(formation, wheel_radius, angles, starts_converged))
}

/// Wheel headings perpendicular to each module's bearing from the centroid.
///
/// A sensible hand layout for ring like formations and the deterministic seed
/// of the optimizer.
pub fn tangential_headings(formation: &FormationConfiguration) -> Vec<f64> {
    formation
        .positions()
        .iter()
        .map(|&(x, y)| wrap_to_2pi(y.atan2(x) + std::f64::consts::FRAC_PI_2))
        .collect()
}

/// Exhaustive reference search on a uniform angle grid.
///
/// Evaluates every combination of `k * resolution` headings and returns the
/// best grid point, breaking ties towards the lexicographically smallest angle
/// vector. Cost grows as `(2*pi / resolution)^n`, so the search refuses more
/// than [`GRID_MAX_MODULES`] modules or more than [`GRID_EVAL_CAP`] grid
/// points. Deliberately independent of [`optimize_headings`]: candidates are
/// scored through the closed form eigenvalues of the 3x3 Gram matrix with a
/// branch and bound cut, not through the SVD path.
pub fn grid_search_headings(
    formation: &FormationConfiguration,
    wheel_radius: f64,
    resolution: f64,
) -> Result<OptimizationResult, OptimizerError> {
    if !(wheel_radius > 0.0) {
        return Err(KinematicsError::BadWheelRadius(wheel_radius).into());
    }
    if !resolution.is_finite() || resolution <= 0.0 {
        return Err(OptimizerError::BadResolution(resolution));
    }
    let n = formation.len();
    if n > GRID_MAX_MODULES {
        return Err(OptimizerError::TooManyModules {
            max: GRID_MAX_MODULES,
            got: n,
        });
    }
    let steps = ((TAU / resolution) + 1e-9).floor().max(1.0) as usize;
    let evaluations = (steps as u128).pow(n as u32);
    if evaluations > GRID_EVAL_CAP {
        return Err(OptimizerError::GridTooLarge {
            evaluations,
            cap: GRID_EVAL_CAP,
        });
    }

    // outer products of each module's mapping row, per grid angle
    let mut outer: Vec<Vec<[f64; 6]>> = Vec::with_capacity(n);
    for &(rx, ry) in formation.positions() {
        let mut per_angle = Vec::with_capacity(steps);
        for k in 0..steps {
            let (s, c) = (k as f64 * resolution).sin_cos();
            let row = [
                c / wheel_radius,
                s / wheel_radius,
                (rx * s - ry * c) / wheel_radius,
            ];
            per_angle.push([
                row[0] * row[0],
                row[1] * row[1],
                row[2] * row[2],
                row[0] * row[1],
                row[0] * row[2],
                row[1] * row[2],
            ]);
        }
        outer.push(per_angle);
    }

    let rank_factor = {
        let f = n as f64 * f64::EPSILON * 16.0;
        f * f
    };
    let mut search = GridSearch {
        outer: &outer,
        steps,
        rank_factor,
        best_value: f64::INFINITY,
        best_index: vec![0; n],
        index: vec![0; n],
    };
    search.descend(0, [0.0; 6]);

    let angles: Vec<f64> = search
        .best_index
        .iter()
        .map(|&k| wrap_to_2pi(k as f64 * resolution))
        .collect();
    let finite = search.best_value.is_finite();
    Ok(finish(formation, wheel_radius, angles, usize::from(finite)))
}

struct GridSearch<'a> {
    outer: &'a [Vec<[f64; 6]>],
    steps: usize,
    rank_factor: f64,
    best_value: f64,
    best_index: Vec<usize>,
    index: Vec<usize>,
}

impl GridSearch<'_> {
    fn descend(&mut self, depth: usize, gram: [f64; 6]) {
        if depth == self.outer.len() {
            let value = gram_objective(&gram, self.rank_factor);
            if value < self.best_value {
                self.best_value = value;
                self.best_index.copy_from_slice(&self.index);
            }
            return;
        }
        for k in 0..self.steps {
            let o = &self.outer[depth][k];
            let g = [
                gram[0] + o[0],
                gram[1] + o[1],
                gram[2] + o[2],
                gram[3] + o[3],
                gram[4] + o[4],
                gram[5] + o[5],
            ];
            // partial Gram diagonals only grow, and the objective of any
            // completion is at least 1 + max diagonal, so the whole subtree
            // can be cut once that bound is already beaten
            let diag_max = g[0].max(g[1]).max(g[2]);
            if 1.0 + diag_max > self.best_value {
                continue;
            }
            self.index[depth] = k;
            self.descend(depth + 1, g);
        }
    }
}

/// Grid point score from the Gram matrix `M^T M`, bypassing the SVD.
fn gram_objective(g: &[f64; 6], rank_factor: f64) -> f64 {
    let (lambda_max, lambda_min) = sym3_extremal_eigenvalues(g);
    if lambda_min <= lambda_max * rank_factor {
        return f64::INFINITY;
    }
    (lambda_max / lambda_min).sqrt() + lambda_max
}

/// Largest and smallest eigenvalue of a symmetric 3x3 matrix given as
/// `[a11, a22, a33, a12, a13, a23]`, by the trigonometric closed form.
fn sym3_extremal_eigenvalues(g: &[f64; 6]) -> (f64, f64) {
    let [a11, a22, a33, a12, a13, a23] = *g;
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    if p1 == 0.0 {
        let max = a11.max(a22).max(a33);
        let min = a11.min(a22).min(a33);
        return (max.max(0.0), min.max(0.0));
    }
    let q = (a11 + a22 + a33) / 3.0;
    let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b11 = (a11 - q) / p;
    let b22 = (a22 - q) / p;
    let b33 = (a33 - q) / p;
    let b12 = a12 / p;
    let b13 = a13 / p;
    let b23 = a23 / p;
    let det_b = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13)
        + b13 * (b12 * b23 - b22 * b13);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let lambda_max = q + 2.0 * p * phi.cos();
    let lambda_min = q + 2.0 * p * (phi + TAU / 3.0).cos();
    (lambda_max.max(0.0), lambda_min.max(0.0))
}

fn finish(
    formation: &FormationConfiguration,
    wheel_radius: f64,
    angles: Vec<f64>,
    starts_converged: usize,
) -> OptimizationResult {
    let headings = HeadingConfiguration::new(angles);
    let mapper = VelocityMapper::build(formation, &headings, wheel_radius)
        .expect("search produced one heading per module");
    let metrics = mapper.metrics();
    OptimizationResult {
        objective_value: metrics.condition_number + metrics.sigma_max * metrics.sigma_max,
        headings,
        metrics,
        starts_converged,
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn eval_with(
    formation: &FormationConfiguration,
    wheel_radius: f64,
    angles: &mut Vec<f64>,
    coordinate: usize,
    value: f64,
) -> f64 {
    let saved = angles[coordinate];
    angles[coordinate] = value;
    let result = objective(
        formation,
        &HeadingConfiguration::new(angles.clone()),
        wheel_radius,
    );
    angles[coordinate] = saved;
    result
}

fn refine_start(
    formation: &FormationConfiguration,
    wheel_radius: f64,
    start: &[f64],
    options: &OptimizerOptions,
) -> (f64, Vec<f64>) {
    let mut angles: Vec<f64> = start.iter().copied().map(wrap_to_2pi).collect();
    let mut value = objective(
        formation,
        &HeadingConfiguration::new(angles.clone()),
        wheel_radius,
    );
    for _ in 0..options.max_sweeps {
        let before = value;
        for i in 0..angles.len() {
            let (best_value, best_angle) =
                line_minimum(formation, wheel_radius, &mut angles, i, value, options);
            value = best_value;
            angles[i] = wrap_to_2pi(best_angle);
        }
        if !value.is_finite() {
            // an entire sweep without finding a full rank point: give up
            if !before.is_finite() {
                break;
            }
            continue;
        }
        if before - value <= options.objective_tolerance * value.abs().max(1.0) {
            break;
        }
    }
    (value, angles)
}

/// Minimises the objective along one heading coordinate.
///
/// The slice is periodic and usually multimodal, so a uniform scan locates the
/// best cell first and golden section then narrows that cell. Only strict
/// improvements are accepted, which keeps refinement monotone.
fn line_minimum(
    formation: &FormationConfiguration,
    wheel_radius: f64,
    angles: &mut Vec<f64>,
    coordinate: usize,
    current_value: f64,
    options: &OptimizerOptions,
) -> (f64, f64) {
    let mut best_f = current_value;
    let mut best_t = angles[coordinate];
    let cell = TAU / SCAN_POINTS as f64;
    for j in 0..SCAN_POINTS {
        let t = j as f64 * cell;
        let f = eval_with(formation, wheel_radius, angles, coordinate, t);
        if f < best_f {
            best_f = f;
            best_t = t;
        }
    }

    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = best_t - cell;
    let mut b = best_t + cell;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval_with(formation, wheel_radius, angles, coordinate, c);
    let mut fd = eval_with(formation, wheel_radius, angles, coordinate, d);
    for _ in 0..GOLDEN_MAX_ITER {
        if fc < best_f {
            best_f = fc;
            best_t = c;
        }
        if fd < best_f {
            best_f = fd;
            best_t = d;
        }
        if (b - a).abs() <= options.angle_tolerance {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval_with(formation, wheel_radius, angles, coordinate, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval_with(formation, wheel_radius, angles, coordinate, d);
        }
    }
    (best_f, best_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::recentre_formation;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn ring(n: usize, radius: f64, phase: f64) -> FormationConfiguration {
        let positions: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let b = phase + k as f64 * TAU / n as f64;
                (radius * b.cos(), radius * b.sin())
            })
            .collect();
        recentre_formation(&positions).unwrap()
    }

    fn triangle() -> FormationConfiguration {
        ring(3, 1.0, FRAC_PI_2)
    }

    fn tangential(formation: &FormationConfiguration) -> HeadingConfiguration {
        HeadingConfiguration::new(tangential_headings(formation))
    }

    #[test]
    fn tangential_triangle_objective_value() {
        let f = triangle();
        let value = objective(&f, &tangential(&f), 1.0);
        assert_relative_eq!(value, 2.0_f64.sqrt() + 3.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_headings_score_infinite() {
        let f = triangle();
        let h = HeadingConfiguration::new(vec![1.0; 3]);
        assert!(objective(&f, &h, 1.0).is_infinite());
    }

    #[test]
    fn single_heading_perturbation_hurts_the_tangential_triangle() {
        let f = triangle();
        let base = objective(&f, &tangential(&f), 1.0);
        let mut angles = tangential_headings(&f);
        angles[0] += 0.1;
        let perturbed = objective(&f, &HeadingConfiguration::new(angles), 1.0);
        assert!(
            perturbed > base,
            "perturbed {perturbed} should exceed base {base}"
        );
    }

    #[test]
    fn energy_bound_zero_twist() {
        let f = triangle();
        let mapper = VelocityMapper::build(&f, &tangential(&f), 1.0).unwrap();
        assert_relative_eq!(energy_upper_bound(&mapper, &StructureTwist::zero()), 0.0);
    }

    #[test]
    fn energy_bound_holds_for_random_twists() {
        use rand::{Rng, SeedableRng};
        let f = triangle();
        let mapper = VelocityMapper::build(&f, &tangential(&f), 0.028).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let twist = StructureTwist::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let wheels = mapper.wheels_from_twist(&twist);
            let actual: f64 = wheels.omegas.iter().map(|w| w * w).sum();
            assert!(actual <= energy_upper_bound(&mapper, &twist));
        }
    }

    #[test]
    fn energy_bound_tight_along_leading_direction() {
        let f = triangle();
        let mapper = VelocityMapper::build(&f, &tangential(&f), 0.028).unwrap();
        let svd = mapper.matrix().clone().svd(true, true);
        let vt = svd.v_t.unwrap();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
        let top = order[0];
        let twist = StructureTwist::new(vt[(top, 0)], vt[(top, 1)], vt[(top, 2)]);
        let wheels = mapper.wheels_from_twist(&twist);
        let actual: f64 = wheels.omegas.iter().map(|w| w * w).sum();
        let bound = energy_upper_bound(&mapper, &twist);
        assert_relative_eq!(actual, bound, max_relative = 1e-9);
    }

    #[test]
    fn optimizer_finds_the_balanced_triangle_layout() {
        // tilting every tangential heading 45 degrees towards the centre
        // equalises all three singular values: condition number 1, squared
        // spectral norm 3/2, so the optimum objective is 2.5
        let f = triangle();
        let result = optimize_headings(&f, 1.0, &OptimizerOptions::default()).unwrap();
        assert_relative_eq!(result.objective_value, 2.5, epsilon = 1e-6);
        assert_eq!(result.metrics.rank, 3);
        assert!(result.objective_value <= objective(&f, &tangential(&f), 1.0));
    }

    #[test]
    fn optimizer_matches_grid_reference_on_the_triangle() {
        let f = triangle();
        let opt = optimize_headings(&f, 1.0, &OptimizerOptions::default()).unwrap();
        let grid = grid_search_headings(&f, 1.0, TAU / 180.0).unwrap();
        assert!(opt.objective_value <= 1.01 * grid.objective_value);
    }

    #[test]
    fn optimizer_is_deterministic() {
        let f = ring(6, 0.0996, 0.13);
        let opts = OptimizerOptions::default();
        let a = optimize_headings(&f, 0.028, &opts).unwrap();
        let b = optimize_headings(&f, 0.028, &opts).unwrap();
        assert_eq!(a.headings.angles(), b.headings.angles());
        assert_eq!(a.objective_value, b.objective_value);
    }

    #[test]
    fn more_starts_never_hurt() {
        let f = ring(5, 0.12, 0.4);
        let mut few = OptimizerOptions::default();
        few.n_starts = 2;
        let mut many = few;
        many.n_starts = 9;
        let a = optimize_headings(&f, 0.028, &few).unwrap();
        let b = optimize_headings(&f, 0.028, &many).unwrap();
        assert!(b.objective_value <= a.objective_value);
    }

    #[test]
    fn result_beats_every_start() {
        let f = ring(4, 0.1, 0.2);
        let options = OptimizerOptions::default();
        let result = optimize_headings(&f, 0.028, &options).unwrap();
        let heuristic = objective(
            &f,
            &HeadingConfiguration::new(tangential_headings(&f)),
            0.028,
        );
        assert!(result.objective_value <= heuristic);
        let mut rng = ChaCha8Rng::seed_from_u64(options.rng_seed);
        for _ in 0..options.n_starts {
            let angles: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
            let start_value = objective(&f, &HeadingConfiguration::new(angles), 0.028);
            assert!(result.objective_value <= start_value);
        }
    }

    #[test]
    fn hexagon_result_is_full_rank() {
        let f = ring(6, 0.0996, 7.5_f64.to_radians());
        let result = optimize_headings(&f, 0.028, &OptimizerOptions::default()).unwrap();
        assert_eq!(result.metrics.rank, 3);
        assert!(result.metrics.condition_number.is_finite());
        assert_eq!(result.starts_converged, OptimizerOptions::default().n_starts + 1);
    }

    #[test]
    fn coincident_modules_are_degenerate() {
        let f = FormationConfiguration::new(vec![(0.0, 0.0); 3], Vec::new()).unwrap();
        let err = optimize_headings(&f, 0.028, &OptimizerOptions::default()).unwrap_err();
        assert!(matches!(err, OptimizerError::Degenerate { .. }));
    }

    #[test]
    fn grid_refuses_large_formations() {
        let f = ring(5, 0.1, 0.0);
        assert_eq!(
            grid_search_headings(&f, 1.0, 0.1),
            Err(OptimizerError::TooManyModules { max: 4, got: 5 })
        );
    }

    #[test]
    fn grid_refuses_absurd_resolution() {
        let f = triangle();
        assert!(matches!(
            grid_search_headings(&f, 1.0, 1e-4),
            Err(OptimizerError::GridTooLarge { .. })
        ));
        assert_eq!(
            grid_search_headings(&f, 1.0, -1.0),
            Err(OptimizerError::BadResolution(-1.0))
        );
    }

    #[test]
    fn degenerate_single_point_grid() {
        let f = triangle();
        let result = grid_search_headings(&f, 1.0, TAU).unwrap();
        assert_eq!(result.headings.angles(), &[0.0, 0.0, 0.0][..]);
        assert!(result.objective_value.is_infinite());
        assert_eq!(result.starts_converged, 0);
    }

    #[test]
    fn grid_agrees_with_known_triangle_optimum() {
        let f = triangle();
        let result = grid_search_headings(&f, 1.0, TAU / 120.0).unwrap();
        assert!(result.objective_value >= 2.5 - 1e-9);
        assert!(result.objective_value < 2.5 + 0.02);
    }

    #[test]
    fn closed_form_eigenvalues_match_svd() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let m = nalgebra::DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-2.0..2.0));
            let gram_full = m.transpose() * &m;
            let g = [
                gram_full[(0, 0)],
                gram_full[(1, 1)],
                gram_full[(2, 2)],
                gram_full[(0, 1)],
                gram_full[(0, 2)],
                gram_full[(1, 2)],
            ];
            let (lmax, lmin) = sym3_extremal_eigenvalues(&g);
            let svd = m.svd(false, false);
            let mut sigmas: Vec<f64> = svd.singular_values.iter().copied().collect();
            sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_relative_eq!(lmax, sigmas[0] * sigmas[0], max_relative = 1e-9);
            assert_relative_eq!(
                lmin,
                sigmas[2] * sigmas[2],
                max_relative = 1e-7,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn stored_objective_matches_recomputation() {
        let f = ring(4, 0.11, 0.3);
        let result = optimize_headings(&f, 0.028, &OptimizerOptions::default()).unwrap();
        let recomputed = objective(&f, &result.headings, 0.028);
        assert_relative_eq!(result.objective_value, recomputed, max_relative = 1e-9);
        let grid = grid_search_headings(&f, 0.028, TAU / 24.0).unwrap();
        let recomputed = objective(&f, &grid.headings, 0.028);
        assert_relative_eq!(grid.objective_value, recomputed, max_relative = 1e-9);
    }
}

//! Randomized checks of the wheel-speed mapping across formation space.

use std::f64::consts::TAU;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use omniform::kinematics::{module_velocity_in_structure, VelocityMapper};
use omniform::model::{
    recentre_formation, FormationConfiguration, HeadingConfiguration, StructureTwist,
};
use omniform::optimizer::objective;

const WHEEL_RADIUS: f64 = 0.028;

fn random_formation(rng: &mut ChaCha8Rng) -> FormationConfiguration {
    let n = rng.gen_range(3..=8);
    loop {
        let positions: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
            .collect();
        if let Ok(f) = recentre_formation(&positions) {
            return f;
        }
    }
}

fn random_headings(rng: &mut ChaCha8Rng, n: usize) -> HeadingConfiguration {
    HeadingConfiguration::new((0..n).map(|_| rng.gen_range(0.0..TAU)).collect())
}

fn random_twist(rng: &mut ChaCha8Rng) -> StructureTwist {
    StructureTwist::new(
        rng.gen_range(-0.1..0.1),
        rng.gen_range(-0.1..0.1),
        rng.gen_range(-1.0..1.0),
    )
}

#[test]
fn mapped_wheel_speeds_match_the_per_module_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let formation = random_formation(&mut rng);
        let headings = random_headings(&mut rng, formation.len());
        let mapper = VelocityMapper::build(&formation, &headings, WHEEL_RADIUS).unwrap();
        let twist = random_twist(&mut rng);
        let wheels = mapper.wheels_from_twist(&twist);
        for i in 0..formation.len() {
            let v = module_velocity_in_structure(&twist, formation.position(i), headings.angles()[i]);
            let expected = v / WHEEL_RADIUS;
            assert!(
                (wheels.omegas[i] - expected).abs() <= 1e-12,
                "module {i}: mapped {} vs projected {expected}",
                wheels.omegas[i]
            );
        }
    }
}

#[test]
fn twist_round_trip_recovers_the_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 200 {
        let formation = random_formation(&mut rng);
        let headings = random_headings(&mut rng, formation.len());
        let mapper = VelocityMapper::build(&formation, &headings, WHEEL_RADIUS).unwrap();
        let metrics = mapper.metrics();
        if !metrics.is_full_rank() || metrics.condition_number > 1e6 {
            continue;
        }
        let twist = random_twist(&mut rng);
        let wheels = mapper.wheels_from_twist(&twist);
        let back = mapper.twist_from_wheels(&wheels).unwrap();
        let scale = twist.norm().max(1e-6);
        assert!(
            (back.vx - twist.vx).abs() / scale <= 1e-9
                && (back.vy - twist.vy).abs() / scale <= 1e-9
                && (back.omega - twist.omega).abs() / scale <= 1e-9,
            "round trip drifted: {twist:?} -> {back:?}"
        );
        checked += 1;
    }
}

#[test]
fn objective_is_invariant_under_rigid_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 60 {
        let formation = random_formation(&mut rng);
        let headings = random_headings(&mut rng, formation.len());
        let mapper = VelocityMapper::build(&formation, &headings, WHEEL_RADIUS).unwrap();
        let metrics = mapper.metrics();
        if !metrics.is_full_rank() || metrics.condition_number > 1e4 {
            continue;
        }
        let value = objective(&formation, &headings, WHEEL_RADIUS);

        let delta: f64 = rng.gen_range(0.0..TAU);
        let (s, c) = delta.sin_cos();
        let rotated_positions: Vec<(f64, f64)> = formation
            .positions()
            .iter()
            .map(|(x, y)| (c * x - s * y, s * x + c * y))
            .collect();
        let rotated = FormationConfiguration::new(rotated_positions, Vec::new()).unwrap();
        let co_rotated =
            HeadingConfiguration::new(headings.angles().iter().map(|a| a + delta).collect());
        let rotated_value = objective(&rotated, &co_rotated, WHEEL_RADIUS);

        assert!(
            (rotated_value - value).abs() / value <= 1e-9,
            "objective moved under rotation: {value} -> {rotated_value}"
        );
        checked += 1;
    }
}

#[test]
fn singular_values_scale_inversely_with_the_wheel_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let formation = random_formation(&mut rng);
        let headings = random_headings(&mut rng, formation.len());
        let fine = VelocityMapper::build(&formation, &headings, WHEEL_RADIUS).unwrap();
        let coarse = VelocityMapper::build(&formation, &headings, 2.0 * WHEEL_RADIUS).unwrap();
        let a = fine.metrics();
        let b = coarse.metrics();
        assert!((a.sigma_max - 2.0 * b.sigma_max).abs() <= 1e-9 * a.sigma_max);
        if a.is_full_rank() && b.is_full_rank() {
            assert!(
                (a.condition_number - b.condition_number).abs()
                    <= 1e-9 * a.condition_number.max(1.0),
                "conditioning must not depend on the wheel radius"
            );
        }
    }
}

#[test]
fn wheel_energy_respects_the_singular_value_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..500 {
        let formation = random_formation(&mut rng);
        let headings = random_headings(&mut rng, formation.len());
        let mapper = VelocityMapper::build(&formation, &headings, WHEEL_RADIUS).unwrap();
        let sigma_max = mapper.metrics().sigma_max;
        let twist = random_twist(&mut rng);
        let wheels = mapper.wheels_from_twist(&twist);
        let energy: f64 = wheels.omegas.iter().map(|w| w * w).sum();
        let bound = (sigma_max * twist.norm()).powi(2);
        assert!(
            energy <= bound * (1.0 + 1e-12),
            "energy {energy} exceeds bound {bound}"
        );
    }
}

#[test]
fn the_bound_is_tight_along_the_top_right_singular_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..50 {
        let formation = random_formation(&mut rng);
        let headings = random_headings(&mut rng, formation.len());
        let mapper = VelocityMapper::build(&formation, &headings, WHEEL_RADIUS).unwrap();
        let svd = mapper.matrix().clone().svd(false, true);
        let sigmas = &svd.singular_values;
        let mut top = 0;
        for i in 1..sigmas.len() {
            if sigmas[i] > sigmas[top] {
                top = i;
            }
        }
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        let v: DVector<f64> = v_t.row(top).transpose();
        let twist = StructureTwist::new(v[0], v[1], v[2]);
        let wheels = mapper.wheels_from_twist(&twist);
        let energy: f64 = wheels.omegas.iter().map(|w| w * w).sum();
        let bound = (sigmas[top] * twist.norm()).powi(2);
        assert!(
            (energy - bound).abs() <= 1e-9 * bound.max(1e-12),
            "bound should be met with equality on the top singular direction"
        );
    }
}

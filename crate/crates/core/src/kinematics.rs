//! Velocity mapping between a rigid structure twist and individual wheel speeds.
//!
//! Each module drives a single omni wheel whose steering angle theta_i is fixed
//! while the structure moves. With module i at offset r_i in the structure frame,
//! the wheel must supply the drive speed of its contact point projected onto the
//! wheel direction, which is linear in the structure twist. Stacking one row per
//! module gives the mapping matrix M with Omega = M * V.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::model::{FormationConfiguration, HeadingConfiguration, StructureTwist, WheelSpeeds};

/// Errors from building or inverting the wheel mapping.
#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("wheel radius must be strictly positive, got {0}")]
    BadWheelRadius(f64),
    #[error("formation has {formation} modules but {headings} headings were given")]
    SizeMismatch { formation: usize, headings: usize },
    #[error("wheel mapping has rank {rank} < 3, some planar twists are unreachable")]
    RankDeficient { rank: usize },
    #[error("expected one wheel speed per module ({expected}), got {got}")]
    WrongWheelCount { expected: usize, got: usize },
}

/// Drive velocity of a single free module, world frame, m/s.
///
/// The module moves along its wheel heading at the wheel surface speed.
pub fn module_body_velocity(
    omega: f64,
    theta: f64,
    wheel_radius: f64,
) -> Result<(f64, f64), KinematicsError> {
    if !(wheel_radius > 0.0) {
        return Err(KinematicsError::BadWheelRadius(wheel_radius));
    }
    let v = omega * wheel_radius;
    Ok((v * theta.cos(), v * theta.sin()))
}

/// Drive speed a docked module must supply, m/s.
///
/// For a module at offset `r` whose wheel points along `theta` (both structure
/// frame), the rigid body velocity of its contact point is
/// `(vx - omega * r_y, vy + omega * r_x)`; only the component along the wheel
/// direction is driven, the roller axis slides freely.
pub fn module_velocity_in_structure(twist: &StructureTwist, r: (f64, f64), theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    (twist.vx - twist.omega * r.1) * c + (twist.vy + twist.omega * r.0) * s
}

/// Summary of the singular spectrum of a wheel mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapperMetrics {
    /// Numerical rank (at most 3).
    pub rank: usize,
    /// Largest singular value.
    pub sigma_max: f64,
    /// sigma_max / sigma_min, `f64::INFINITY` when rank < 3.
    pub condition_number: f64,
}

impl MapperMetrics {
    pub fn is_full_rank(&self) -> bool {
        self.rank == 3
    }
}

/// The n x 3 matrix taking a structure frame twist to wheel speeds.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMapper {
    matrix: DMatrix<f64>,
    wheel_radius: f64,
}

impl VelocityMapper {
    /// Builds the mapping for a formation with the given wheel headings.
    ///
    /// Row i is `[cos t_i, sin t_i, r_ix * sin t_i - r_iy * cos t_i] / R`.
    pub fn build(
        formation: &FormationConfiguration,
        headings: &HeadingConfiguration,
        wheel_radius: f64,
    ) -> Result<Self, KinematicsError> {
        if !(wheel_radius > 0.0) {
            return Err(KinematicsError::BadWheelRadius(wheel_radius));
        }
        if formation.len() != headings.len() {
            return Err(KinematicsError::SizeMismatch {
                formation: formation.len(),
                headings: headings.len(),
            });
        }
        let n = formation.len();
        let mut matrix = DMatrix::zeros(n, 3);
        for i in 0..n {
            let (rx, ry) = formation.position(i);
            let (s, c) = headings.angles()[i].sin_cos();
            matrix[(i, 0)] = c / wheel_radius;
            matrix[(i, 1)] = s / wheel_radius;
            matrix[(i, 2)] = (rx * s - ry * c) / wheel_radius;
        }
        Ok(Self {
            matrix,
            wheel_radius,
        })
    }

    /// Wraps an explicit mapping matrix; mostly useful for analysis and tests.
    pub fn from_matrix(matrix: DMatrix<f64>, wheel_radius: f64) -> Result<Self, KinematicsError> {
        if !(wheel_radius > 0.0) {
            return Err(KinematicsError::BadWheelRadius(wheel_radius));
        }
        assert_eq!(matrix.ncols(), 3, "wheel mapping must have 3 columns");
        Ok(Self {
            matrix,
            wheel_radius,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn wheel_radius(&self) -> f64 {
        self.wheel_radius
    }

    pub fn n_modules(&self) -> usize {
        self.matrix.nrows()
    }

    /// Wheel speeds realising the structure frame twist exactly.
    pub fn wheels_from_twist(&self, twist: &StructureTwist) -> WheelSpeeds {
        let v = Vector3::new(twist.vx, twist.vy, twist.omega);
        let omega = &self.matrix * v;
        WheelSpeeds::new(omega.iter().copied().collect())
    }

    /// Least squares recovery of the structure twist from wheel speeds.
    ///
    /// For consistent speeds this inverts [`Self::wheels_from_twist`]; otherwise
    /// it returns the twist minimising the residual. Fails when the mapping does
    /// not constrain all three degrees of freedom.
    pub fn twist_from_wheels(&self, wheels: &WheelSpeeds) -> Result<StructureTwist, KinematicsError> {
        if wheels.len() != self.n_modules() {
            return Err(KinematicsError::WrongWheelCount {
                expected: self.n_modules(),
                got: wheels.len(),
            });
        }
        let metrics = self.metrics();
        if metrics.rank < 3 {
            return Err(KinematicsError::RankDeficient { rank: metrics.rank });
        }
        let svd = self.matrix.clone().svd(true, true);
        let b = DVector::from_column_slice(&wheels.omegas);
        let sol = svd
            .solve(&b, rank_threshold(&self.matrix, metrics.sigma_max))
            .expect("SVD of the wheel mapping was requested with both factors");
        Ok(StructureTwist::new(sol[0], sol[1], sol[2]))
    }

    /// Singular value summary of the mapping.
    pub fn metrics(&self) -> MapperMetrics {
        let svd = self.matrix.clone().svd(false, false);
        let mut sigmas: Vec<f64> = svd.singular_values.iter().copied().collect();
        sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let sigma_max = sigmas.first().copied().unwrap_or(0.0);
        let threshold = rank_threshold(&self.matrix, sigma_max);
        let rank = sigmas.iter().filter(|s| **s > threshold).count();
        let condition_number = if rank < 3 {
            f64::INFINITY
        } else {
            sigma_max / sigmas[2]
        };
        MapperMetrics {
            rank,
            sigma_max,
            condition_number,
        }
    }
}

/// Absolute cutoff below which a singular value counts as zero.
fn rank_threshold(matrix: &DMatrix<f64>, sigma_max: f64) -> f64 {
    sigma_max * matrix.nrows().max(matrix.ncols()) as f64 * f64::EPSILON * 16.0
}

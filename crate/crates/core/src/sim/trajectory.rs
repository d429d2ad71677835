//! Reference trajectory generators.
//!
//! Each generator yields a pose together with the analytic feedforward twist,
//! so controllers get a velocity that is exactly the time derivative of the
//! pose they are asked to track.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use thiserror::Error;

use crate::model::{Pose2D, StructureTwist};

/// Errors from trajectory parameter validation.
#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("line start and end coincide")]
    DegenerateLine,
    #[error("corner radius {corner} exceeds the smaller half extent {limit}")]
    CornerTooLarge { corner: f64, limit: f64 },
}

/// How the reference heading evolves along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadingMode {
    /// Heading follows the direction of travel.
    Tangent,
    /// Heading pinned to a constant angle, radians.
    Fixed(f64),
    /// Heading rotates at a constant rate from an initial angle.
    Spin { rate: f64, initial: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Line {
        start: (f64, f64),
        dir: (f64, f64),
        length: f64,
        speed: f64,
    },
    Circle {
        center: (f64, f64),
        radius: f64,
        angular_rate: f64,
        phase: f64,
    },
    RoundedRect {
        segments: Vec<Segment>,
        perimeter: f64,
        speed: f64,
    },
    SCurve {
        start: (f64, f64),
        speed_x: f64,
        amplitude: f64,
        wavenumber: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Straight {
        start: (f64, f64),
        dir: (f64, f64),
        length: f64,
    },
    /// Counterclockwise arc beginning at polar angle `angle0` on `center`.
    Arc {
        center: (f64, f64),
        radius: f64,
        angle0: f64,
        length: f64,
    },
}

/// A reference path with its heading profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    shape: Shape,
    heading: HeadingMode,
}

fn require_positive(name: &'static str, value: f64) -> Result<(), TrajectoryError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(TrajectoryError::NonPositive { name, value })
    }
}

impl ReferencePath {
    /// Straight segment from `start` to `end` at constant speed, holding the
    /// end pose once reached.
    pub fn line(
        start: (f64, f64),
        end: (f64, f64),
        speed: f64,
        heading: HeadingMode,
    ) -> Result<Self, TrajectoryError> {
        require_positive("speed", speed)?;
        let (dx, dy) = (end.0 - start.0, end.1 - start.1);
        let length = dx.hypot(dy);
        if length == 0.0 {
            return Err(TrajectoryError::DegenerateLine);
        }
        Ok(Self {
            shape: Shape::Line {
                start,
                dir: (dx / length, dy / length),
                length,
                speed,
            },
            heading,
        })
    }

    /// Circle traversed at a constant angular rate; `phase` sets the start
    /// point on the circle.
    pub fn circle(
        center: (f64, f64),
        radius: f64,
        angular_rate: f64,
        phase: f64,
        heading: HeadingMode,
    ) -> Result<Self, TrajectoryError> {
        require_positive("radius", radius)?;
        if angular_rate == 0.0 || !angular_rate.is_finite() {
            return Err(TrajectoryError::NonPositive {
                name: "angular_rate",
                value: angular_rate,
            });
        }
        Ok(Self {
            shape: Shape::Circle {
                center,
                radius,
                angular_rate,
                phase,
            },
            heading,
        })
    }

    /// Axis-aligned rounded rectangle, walked counterclockwise at constant
    /// speed starting from the midpoint of the bottom edge.
    pub fn rounded_rect(
        center: (f64, f64),
        half_width: f64,
        half_height: f64,
        corner_radius: f64,
        speed: f64,
        heading: HeadingMode,
    ) -> Result<Self, TrajectoryError> {
        require_positive("half_width", half_width)?;
        require_positive("half_height", half_height)?;
        require_positive("corner_radius", corner_radius)?;
        require_positive("speed", speed)?;
        let limit = half_width.min(half_height);
        if corner_radius > limit {
            return Err(TrajectoryError::CornerTooLarge {
                corner: corner_radius,
                limit,
            });
        }
        let (cx, cy) = center;
        let (a, b, rc) = (half_width, half_height, corner_radius);
        let quarter = rc * FRAC_PI_2;
        let segments = vec![
            Segment::Straight {
                start: (cx, cy - b),
                dir: (1.0, 0.0),
                length: a - rc,
            },
            Segment::Arc {
                center: (cx + a - rc, cy - (b - rc)),
                radius: rc,
                angle0: -FRAC_PI_2,
                length: quarter,
            },
            Segment::Straight {
                start: (cx + a, cy - (b - rc)),
                dir: (0.0, 1.0),
                length: 2.0 * (b - rc),
            },
            Segment::Arc {
                center: (cx + a - rc, cy + b - rc),
                radius: rc,
                angle0: 0.0,
                length: quarter,
            },
            Segment::Straight {
                start: (cx + a - rc, cy + b),
                dir: (-1.0, 0.0),
                length: 2.0 * (a - rc),
            },
            Segment::Arc {
                center: (cx - (a - rc), cy + b - rc),
                radius: rc,
                angle0: FRAC_PI_2,
                length: quarter,
            },
            Segment::Straight {
                start: (cx - a, cy + b - rc),
                dir: (0.0, -1.0),
                length: 2.0 * (b - rc),
            },
            Segment::Arc {
                center: (cx - (a - rc), cy - (b - rc)),
                radius: rc,
                angle0: PI,
                length: quarter,
            },
            Segment::Straight {
                start: (cx - (a - rc), cy - b),
                dir: (1.0, 0.0),
                length: a - rc,
            },
        ];
        let perimeter = segments.iter().map(Segment::length).sum();
        Ok(Self {
            shape: Shape::RoundedRect {
                segments,
                perimeter,
                speed,
            },
            heading,
        })
    }

    /// Sinusoidal sweep: x advances at `speed_x` while y oscillates with the
    /// given amplitude and spatial wavelength.
    pub fn s_curve(
        start: (f64, f64),
        speed_x: f64,
        amplitude: f64,
        wavelength: f64,
        heading: HeadingMode,
    ) -> Result<Self, TrajectoryError> {
        require_positive("speed_x", speed_x)?;
        require_positive("wavelength", wavelength)?;
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(TrajectoryError::NonPositive {
                name: "amplitude",
                value: amplitude,
            });
        }
        Ok(Self {
            shape: Shape::SCurve {
                start,
                speed_x,
                amplitude,
                wavenumber: TAU / wavelength,
            },
            heading,
        })
    }

    /// Time at which the path stops moving, if it ever does.
    pub fn time_to_end(&self) -> Option<f64> {
        match &self.shape {
            Shape::Line { length, speed, .. } => Some(length / speed),
            _ => None,
        }
    }

    /// Pose and feedforward twist at time `t` seconds; the twist's angular
    /// component is the heading rate of the returned pose.
    pub fn sample(&self, t: f64) -> (Pose2D, StructureTwist) {
        let p = self.shape.sample(t);
        let (theta, omega) = match self.heading {
            HeadingMode::Tangent => (p.tangent, p.tangent_rate),
            HeadingMode::Fixed(angle) => (angle, 0.0),
            HeadingMode::Spin { rate, initial } => (initial + rate * t, rate),
        };
        (
            Pose2D::new(p.x, p.y, theta),
            StructureTwist::new(p.vx, p.vy, omega),
        )
    }
}

struct ShapeSample {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    tangent: f64,
    tangent_rate: f64,
}

impl Shape {
    fn sample(&self, t: f64) -> ShapeSample {
        match self {
            Shape::Line {
                start,
                dir,
                length,
                speed,
            } => {
                let tangent = dir.1.atan2(dir.0);
                let s = (speed * t).min(*length);
                let moving = speed * t < *length;
                ShapeSample {
                    x: start.0 + dir.0 * s,
                    y: start.1 + dir.1 * s,
                    vx: if moving { dir.0 * speed } else { 0.0 },
                    vy: if moving { dir.1 * speed } else { 0.0 },
                    tangent,
                    tangent_rate: 0.0,
                }
            }
            Shape::Circle {
                center,
                radius,
                angular_rate,
                phase,
            } => {
                let a = phase + angular_rate * t;
                let (sa, ca) = a.sin_cos();
                let vx = -radius * angular_rate * sa;
                let vy = radius * angular_rate * ca;
                ShapeSample {
                    x: center.0 + radius * ca,
                    y: center.1 + radius * sa,
                    vx,
                    vy,
                    tangent: vy.atan2(vx),
                    tangent_rate: *angular_rate,
                }
            }
            Shape::RoundedRect {
                segments,
                perimeter,
                speed,
            } => {
                let s = (speed * t).rem_euclid(*perimeter);
                let mut acc = 0.0;
                for segment in segments {
                    let len = segment.length();
                    // the final segment absorbs rounding in the cumulative sum
                    if s < acc + len || std::ptr::eq(segment, segments.last().unwrap()) {
                        return segment.sample(s - acc, *speed);
                    }
                    acc += len;
                }
                unreachable!("segment walk covers the whole perimeter");
            }
            Shape::SCurve {
                start,
                speed_x,
                amplitude,
                wavenumber,
            } => {
                let u = wavenumber * speed_x * t;
                let slope = amplitude * wavenumber * u.cos();
                let vy = slope * speed_x;
                ShapeSample {
                    x: start.0 + speed_x * t,
                    y: start.1 + amplitude * u.sin(),
                    vx: *speed_x,
                    vy,
                    tangent: vy.atan2(*speed_x),
                    // d/dt atan(A k cos(k x)) with x advancing at speed_x
                    tangent_rate: -amplitude * wavenumber * wavenumber * speed_x * u.sin()
                        / (1.0 + slope * slope),
                }
            }
        }
    }
}

impl Segment {
    fn length(&self) -> f64 {
        match self {
            Segment::Straight { length, .. } | Segment::Arc { length, .. } => *length,
        }
    }

    fn sample(&self, s: f64, speed: f64) -> ShapeSample {
        match self {
            Segment::Straight { start, dir, .. } => ShapeSample {
                x: start.0 + dir.0 * s,
                y: start.1 + dir.1 * s,
                vx: dir.0 * speed,
                vy: dir.1 * speed,
                tangent: dir.1.atan2(dir.0),
                tangent_rate: 0.0,
            },
            Segment::Arc {
                center,
                radius,
                angle0,
                ..
            } => {
                let ang = angle0 + s / radius;
                let (sa, ca) = ang.sin_cos();
                ShapeSample {
                    x: center.0 + radius * ca,
                    y: center.1 + radius * sa,
                    vx: -speed * sa,
                    vy: speed * ca,
                    tangent: ang + FRAC_PI_2,
                    tangent_rate: speed / radius,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::wrap_to_pi;
    use approx::assert_relative_eq;

    fn case_paths() -> Vec<ReferencePath> {
        vec![
            ReferencePath::circle((0.0, 0.0), 0.25, 0.2, 0.0, HeadingMode::Tangent).unwrap(),
            ReferencePath::circle((0.1, -0.2), 0.25, -0.3, 1.0, HeadingMode::Fixed(0.4)).unwrap(),
            ReferencePath::line(
                (0.0, 0.0),
                (1.0, 0.15),
                0.05,
                HeadingMode::Fixed(0.0),
            )
            .unwrap(),
            ReferencePath::rounded_rect(
                (0.0, 0.0),
                0.3,
                0.2,
                0.1,
                0.05,
                HeadingMode::Spin {
                    rate: 0.05,
                    initial: 0.0,
                },
            )
            .unwrap(),
            ReferencePath::s_curve((0.0, 0.0), 0.05, 0.1, 0.8, HeadingMode::Tangent).unwrap(),
        ]
    }

    #[test]
    fn circle_pose_matches_the_closed_form() {
        let path = ReferencePath::circle((0.0, 0.0), 0.25, 0.2, 0.0, HeadingMode::Tangent).unwrap();
        let (pose, twist) = path.sample(0.0);
        assert_relative_eq!(pose.x, 0.25);
        assert_relative_eq!(pose.y, 0.0);
        assert_relative_eq!(pose.theta, FRAC_PI_2);
        assert_relative_eq!(twist.vx.hypot(twist.vy), 0.25 * 0.2, epsilon = 1e-15);
        let t = 7.3;
        let (pose, twist) = path.sample(t);
        assert_relative_eq!(pose.x, 0.25 * (0.2 * t).cos(), epsilon = 1e-15);
        assert_relative_eq!(pose.y, 0.25 * (0.2 * t).sin(), epsilon = 1e-15);
        assert_relative_eq!(twist.omega, 0.2);
    }

    #[test]
    fn line_twist_is_constant_then_zero_at_the_hold() {
        let path =
            ReferencePath::line((0.0, 0.0), (3.0, 4.0), 0.05, HeadingMode::Tangent).unwrap();
        assert_relative_eq!(path.time_to_end().unwrap(), 100.0);
        let (_, twist) = path.sample(10.0);
        assert_relative_eq!(twist.vx, 0.05 * 0.6, epsilon = 1e-15);
        assert_relative_eq!(twist.vy, 0.05 * 0.8, epsilon = 1e-15);
        let (pose, twist) = path.sample(150.0);
        assert_relative_eq!(pose.x, 3.0);
        assert_relative_eq!(pose.y, 4.0);
        assert_eq!(twist.norm(), 0.0);
        // heading stays at the travel direction while holding
        assert_relative_eq!(pose.theta, 0.8_f64.atan2(0.6), epsilon = 1e-15);
    }

    #[test]
    fn rounded_rect_perimeter_and_closure() {
        let path = ReferencePath::rounded_rect(
            (0.0, 0.0),
            0.3,
            0.2,
            0.1,
            0.05,
            HeadingMode::Tangent,
        )
        .unwrap();
        let perimeter = match &path.shape {
            Shape::RoundedRect { perimeter, .. } => *perimeter,
            _ => unreachable!(),
        };
        assert_relative_eq!(perimeter, 1.8283185307179586, epsilon = 1e-12);
        let lap = perimeter / 0.05;
        let (start, _) = path.sample(0.0);
        let (after_lap, _) = path.sample(lap * 0.9999999);
        assert_relative_eq!(start.x, after_lap.x, epsilon = 1e-6);
        assert_relative_eq!(start.y, after_lap.y, epsilon = 1e-6);
        assert_relative_eq!(start.x, 0.0);
        assert_relative_eq!(start.y, -0.2);
    }

    #[test]
    fn rounded_rect_walk_is_continuous() {
        let path = ReferencePath::rounded_rect(
            (0.0, 0.0),
            0.3,
            0.2,
            0.1,
            0.05,
            HeadingMode::Tangent,
        )
        .unwrap();
        let mut prev = path.sample(0.0).0;
        let dt = 0.05;
        for j in 1..800 {
            let t = j as f64 * dt;
            let (pose, _) = path.sample(t);
            let hop = (pose.x - prev.x).hypot(pose.y - prev.y);
            assert!(hop < 0.05 * dt * 1.01, "jump of {hop} m at t = {t}");
            prev = pose;
        }
    }

    #[test]
    fn sampled_twist_matches_finite_differences() {
        let h = 1e-5;
        for (which, path) in case_paths().into_iter().enumerate() {
            // probe times sit away from the line hold point and, for the
            // rectangle at 0.05 m/s, away from segment joins
            for &t in &[0.31, 2.11, 5.03, 9.47, 13.61, 17.99] {
                let (_, twist) = path.sample(t);
                let (before, _) = path.sample(t - h);
                let (after, _) = path.sample(t + h);
                let vx = (after.x - before.x) / (2.0 * h);
                let vy = (after.y - before.y) / (2.0 * h);
                let omega = wrap_to_pi(after.theta - before.theta) / (2.0 * h);
                assert!(
                    (vx - twist.vx).abs() < 1e-6
                        && (vy - twist.vy).abs() < 1e-6
                        && (omega - twist.omega).abs() < 1e-6,
                    "path {which} at t = {t}: analytic ({}, {}, {}) vs fd ({vx}, {vy}, {omega})",
                    twist.vx,
                    twist.vy,
                    twist.omega
                );
            }
        }
    }

    #[test]
    fn spin_heading_rotates_at_the_requested_rate() {
        let path = ReferencePath::rounded_rect(
            (0.0, 0.0),
            0.3,
            0.2,
            0.1,
            0.05,
            HeadingMode::Spin {
                rate: 0.05,
                initial: 0.25,
            },
        )
        .unwrap();
        let (pose, twist) = path.sample(10.0);
        assert_relative_eq!(pose.theta, 0.25 + 0.5, epsilon = 1e-12);
        assert_relative_eq!(twist.omega, 0.05);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert_eq!(
            ReferencePath::line((1.0, 2.0), (1.0, 2.0), 0.05, HeadingMode::Tangent),
            Err(TrajectoryError::DegenerateLine)
        );
        assert!(matches!(
            ReferencePath::circle((0.0, 0.0), -0.25, 0.2, 0.0, HeadingMode::Tangent),
            Err(TrajectoryError::NonPositive { name: "radius", .. })
        ));
        assert!(matches!(
            ReferencePath::circle((0.0, 0.0), 0.25, 0.0, 0.0, HeadingMode::Tangent),
            Err(TrajectoryError::NonPositive {
                name: "angular_rate",
                ..
            })
        ));
        assert!(matches!(
            ReferencePath::rounded_rect((0.0, 0.0), 0.3, 0.2, 0.25, 0.05, HeadingMode::Tangent),
            Err(TrajectoryError::CornerTooLarge { .. })
        ));
        assert!(matches!(
            ReferencePath::s_curve((0.0, 0.0), 0.05, 0.1, 0.0, HeadingMode::Tangent),
            Err(TrajectoryError::NonPositive {
                name: "wavelength",
                ..
            })
        ));
    }
}

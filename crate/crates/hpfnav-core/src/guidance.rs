//! Reference velocity fields: the desired velocity at any point in the
//! workspace, either from a solved potential field or from an analytic
//! pattern (capture line, point attractor, search spiral).
//!
//! Every variant emits a vector of magnitude `v_ref` — direction comes from
//! the field, speed from the scenario — except inside a taper radius around
//! a target, where the magnitude falls linearly to zero.

use crate::field::{PotentialField, QueryError};
use nalgebra::Vector3;
use std::sync::Arc;
use thiserror::Error;

/// Gradient-norm floor for direction normalization.
pub const GRADIENT_EPS: f64 = 1e-9;

/// Default taper radius for point-attractor references, in length units;
/// matches the analytic capture radius so the vehicle holds rated speed all
/// the way to capture.
pub const POINT_TAPER_RADIUS: f64 = 0.05;

#[derive(Debug, Error)]
pub enum GuidanceError {
    #[error("reference speed must be > 0, got {0}")]
    BadSpeed(f64),
    #[error("line direction must be nonzero")]
    ZeroDirection,
    #[error("{0} must be > 0")]
    NonPositive(&'static str),
}

/// Altitude-capture blend for planar fields flown in three dimensions.
#[derive(Debug, Clone, Copy)]
pub struct AltitudeHold {
    pub altitude: f64,
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub enum ReferenceKind {
    /// Direction from the negative gradient of a solved potential field.
    Hpf {
        field: Arc<PotentialField>,
        /// Altitude blend when the field is planar and the vehicle is not.
        altitude: Option<AltitudeHold>,
        /// Radius around the target inside which the magnitude tapers to zero.
        taper_radius: f64,
    },
    /// Fly along an axis while capturing fixed lateral offsets.
    Line {
        direction: Vector3<f64>,
        /// A point the line passes through; the component along `direction`
        /// is immaterial.
        anchor: Vector3<f64>,
        capture_gain: f64,
    },
    /// Outward spiral in the x-y plane blended with altitude capture.
    Spiral {
        center: [f64; 2],
        /// Radial growth per radian of the spiral.
        growth_rate: f64,
        altitude: f64,
        capture_gain: f64,
    },
    /// Straight-line attractor toward a fixed point.
    Point {
        target: Vector3<f64>,
        taper_radius: f64,
    },
}

/// A reference velocity field with a rated speed.
#[derive(Debug, Clone)]
pub struct ReferenceField {
    kind: ReferenceKind,
    v_ref: f64,
}

impl ReferenceField {
    pub fn new(kind: ReferenceKind, v_ref: f64) -> Result<Self, GuidanceError> {
        if !(v_ref > 0.0) {
            return Err(GuidanceError::BadSpeed(v_ref));
        }
        let kind = match kind {
            ReferenceKind::Line {
                direction,
                anchor,
                capture_gain,
            } => {
                let norm = direction.norm();
                if norm == 0.0 {
                    return Err(GuidanceError::ZeroDirection);
                }
                if !(capture_gain > 0.0) {
                    return Err(GuidanceError::NonPositive("capture gain"));
                }
                ReferenceKind::Line {
                    direction: direction / norm,
                    anchor,
                    capture_gain,
                }
            }
            ReferenceKind::Spiral {
                center,
                growth_rate,
                altitude,
                capture_gain,
            } => {
                if !(growth_rate > 0.0) {
                    return Err(GuidanceError::NonPositive("spiral growth rate"));
                }
                if !(capture_gain > 0.0) {
                    return Err(GuidanceError::NonPositive("capture gain"));
                }
                ReferenceKind::Spiral {
                    center,
                    growth_rate,
                    altitude,
                    capture_gain,
                }
            }
            ReferenceKind::Hpf {
                field,
                altitude,
                taper_radius,
            } => {
                if !(taper_radius > 0.0) {
                    return Err(GuidanceError::NonPositive("taper radius"));
                }
                ReferenceKind::Hpf {
                    field,
                    altitude,
                    taper_radius,
                }
            }
            ReferenceKind::Point {
                target,
                taper_radius,
            } => {
                if !(taper_radius > 0.0) {
                    return Err(GuidanceError::NonPositive("taper radius"));
                }
                ReferenceKind::Point {
                    target,
                    taper_radius,
                }
            }
        };
        Ok(Self { kind, v_ref })
    }

    pub fn hpf(field: Arc<PotentialField>, v_ref: f64) -> Result<Self, GuidanceError> {
        let taper_radius = field.env().spacing();
        Self::new(
            ReferenceKind::Hpf {
                field,
                altitude: None,
                taper_radius,
            },
            v_ref,
        )
    }

    pub fn point(target: Vector3<f64>, v_ref: f64) -> Result<Self, GuidanceError> {
        Self::new(
            ReferenceKind::Point {
                target,
                taper_radius: POINT_TAPER_RADIUS,
            },
            v_ref,
        )
    }

    pub fn kind(&self) -> &ReferenceKind {
        &self.kind
    }

    pub fn v_ref(&self) -> f64 {
        self.v_ref
    }

    /// The point the reference converges to, when it has one.
    pub fn target_point(&self) -> Option<Vector3<f64>> {
        match &self.kind {
            ReferenceKind::Hpf {
                field, altitude, ..
            } => {
                let c = field.target_center();
                let z = altitude.map(|a| a.altitude).unwrap_or(c[2]);
                Some(Vector3::new(c[0], c[1], z))
            }
            ReferenceKind::Point { target, .. } => Some(*target),
            ReferenceKind::Line { .. } | ReferenceKind::Spiral { .. } => None,
        }
    }

    /// Distance used for capture and taper decisions: planar for planar
    /// fields, full-space otherwise.
    pub fn target_distance(&self, p: &Vector3<f64>) -> Option<f64> {
        match &self.kind {
            ReferenceKind::Hpf { field, .. } => {
                let c = field.target_center();
                if field.env().dims() == 2 {
                    Some((p[0] - c[0]).hypot(p[1] - c[1]))
                } else {
                    Some((p - Vector3::new(c[0], c[1], c[2])).norm())
                }
            }
            ReferenceKind::Point { target, .. } => Some((p - target).norm()),
            _ => None,
        }
    }

    /// The reference velocity at a position.
    pub fn velocity(&self, p: &Vector3<f64>) -> Result<Vector3<f64>, QueryError> {
        let v = match &self.kind {
            ReferenceKind::Hpf {
                field,
                altitude,
                taper_radius,
            } => {
                let grad = field.gradient_at([p[0], p[1], p[2]])?;
                let descent = Vector3::new(-grad[0], -grad[1], -grad[2]);
                let unit = descent / descent.norm().max(GRADIENT_EPS);
                let blended = match altitude {
                    Some(hold) => {
                        let mut b = unit;
                        b[2] += hold.gain * (hold.altitude - p[2]);
                        let n = b.norm();
                        if n > GRADIENT_EPS {
                            b / n
                        } else {
                            b
                        }
                    }
                    None => unit,
                };
                let dist = self.target_distance(p).unwrap();
                blended * (self.v_ref * (dist / taper_radius).min(1.0))
            }
            ReferenceKind::Line {
                direction,
                anchor,
                capture_gain,
            } => {
                let offset = anchor - p;
                let lateral = offset - direction * offset.dot(direction);
                let raw = direction + lateral * *capture_gain;
                raw / raw.norm() * self.v_ref
            }
            ReferenceKind::Spiral {
                center,
                growth_rate,
                altitude,
                capture_gain,
            } => {
                let rx = p[0] - center[0];
                let ry = p[1] - center[1];
                let r = rx.hypot(ry);
                let a = *growth_rate;
                let planar = if r < GRADIENT_EPS {
                    Vector3::new(1.0, 0.0, 0.0)
                } else {
                    let radial = Vector3::new(rx / r, ry / r, 0.0);
                    let tangential = Vector3::new(-ry / r, rx / r, 0.0);
                    // Arm of r = a(theta + 2 pi k) radially nearest the query
                    // point; the cross-track term locks onto it.
                    let theta = ry.atan2(rx);
                    let turns = ((r / a - theta) / (2.0 * std::f64::consts::PI)).round();
                    let r_arm = (a * (theta + 2.0 * std::f64::consts::PI * turns)).max(0.0);
                    let tangent = (radial * a + tangential * r) / (a * a + r * r).sqrt();
                    tangent + radial * (capture_gain * (r_arm - r))
                };
                let raw = planar + Vector3::new(0.0, 0.0, capture_gain * (altitude - p[2]));
                raw / raw.norm() * self.v_ref
            }
            ReferenceKind::Point {
                target,
                taper_radius,
            } => {
                let d = target - p;
                let dist = d.norm();
                if dist < GRADIENT_EPS {
                    Vector3::zeros()
                } else {
                    d / dist * (self.v_ref * (dist / taper_radius).min(1.0))
                }
            }
        };
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{solve_laplace, SolverParams};
    use crate::grid::{CellClass, GridEnvironment};

    fn line_xhat(gain: f64, v_ref: f64) -> ReferenceField {
        ReferenceField::new(
            ReferenceKind::Line {
                direction: Vector3::new(1.0, 0.0, 0.0),
                anchor: Vector3::new(0.0, 2.0, 2.0),
                capture_gain: gain,
            },
            v_ref,
        )
        .unwrap()
    }

    #[test]
    fn line_on_the_capture_line_points_forward() {
        let r = line_xhat(1.0, 1.0);
        let v = r.velocity(&Vector3::new(0.0, 2.0, 2.0)).unwrap();
        assert!((v - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn line_off_the_line_blends_lateral_error() {
        let r = line_xhat(1.0, 1.0);
        let v = r.velocity(&Vector3::zeros()).unwrap();
        let expected = Vector3::new(1.0, 2.0, 2.0).normalize();
        assert!((v - expected).norm() < 1e-12);
    }

    #[test]
    fn hpf_strip_points_at_target_with_rated_speed() {
        let mut env = GridEnvironment::new_2d(9, 1, 1.0).unwrap();
        env.set_class(0, CellClass::Obstacle);
        env.set_class(8, CellClass::Target);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        let r = ReferenceField::hpf(Arc::new(field), 1.0).unwrap();
        let v = r.velocity(&Vector3::new(2.5, 0.5, 0.0)).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-9, "{v}");
        assert!(v[1].abs() < 1e-9 && v[2].abs() < 1e-9);
    }

    #[test]
    fn magnitude_is_rated_speed_outside_taper() {
        let spiral = ReferenceField::new(
            ReferenceKind::Spiral {
                center: [0.0, 0.0],
                growth_rate: 0.2,
                altitude: 2.0,
                capture_gain: 1.0,
            },
            1.5,
        )
        .unwrap();
        let point = ReferenceField::point(Vector3::new(2.0, 2.0, 2.0), 0.7).unwrap();
        for p in [
            Vector3::new(0.3, -0.8, 0.1),
            Vector3::new(-2.0, 1.0, 3.5),
            Vector3::new(5.0, 5.0, 0.0),
        ] {
            assert!((spiral.velocity(&p).unwrap().norm() - 1.5).abs() < 1e-9);
            assert!((point.velocity(&p).unwrap().norm() - 0.7).abs() < 1e-9);
        }
    }

    #[test]
    fn point_tapers_inside_radius() {
        let r = ReferenceField::new(
            ReferenceKind::Point {
                target: Vector3::zeros(),
                taper_radius: 1.0,
            },
            1.0,
        )
        .unwrap();
        let v = r.velocity(&Vector3::new(0.5, 0.0, 0.0)).unwrap();
        assert!((v.norm() - 0.5).abs() < 1e-9);
        assert!(v[0] < 0.0);
    }

    #[test]
    fn line_kinematic_particle_captures_the_line() {
        // The invariant ray of the line field is the line itself: a particle
        // integrating the reference converges to the offsets within 1% of the
        // v_ref / gain length scale.
        let gain = 2.0;
        let r = line_xhat(gain, 1.0);
        let mut p = Vector3::new(0.0, 0.0, 4.0);
        let dt = 0.002;
        for _ in 0..20_000 {
            p += r.velocity(&p).unwrap() * dt;
        }
        let lateral = ((p[1] - 2.0).powi(2) + (p[2] - 2.0).powi(2)).sqrt();
        assert!(lateral < 0.01 * (1.0 / gain), "lateral error {lateral}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ReferenceField::point(Vector3::zeros(), 0.0).is_err());
        assert!(ReferenceField::new(
            ReferenceKind::Line {
                direction: Vector3::zeros(),
                anchor: Vector3::zeros(),
                capture_gain: 1.0,
            },
            1.0,
        )
        .is_err());
    }
}

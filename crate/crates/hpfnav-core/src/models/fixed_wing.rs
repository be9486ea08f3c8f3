//! Point-mass fixed-wing model: local state (v, gamma, psi) — radial speed,
//! flight path angle, directional angle — driven by controls
//! (F_T, F_N, sigma): tangent force, normal force, banking angle.

use super::VehicleModel;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// Reported angle-of-attack magnitude beyond which `physical_controls` sets
/// its warning flag.
pub const ANGLE_OF_ATTACK_WARN: f64 = 0.35;

/// Fixed-wing point-mass vehicle.
///
/// The gamma and psi rate rows divide by `M v` and `M v cos(gamma)`, which
/// the model guards with `v_floor` and `gamma_margin` so states may pass
/// through v = 0. The floor also caps the stiffness of the closed control
/// loop: an explicit integrator with step `dt` needs
/// `K_u * dt / (M * v_floor)^2` of order one, which the default floor
/// provides for the default step and gains.
#[derive(Debug, Clone)]
pub struct FixedWing {
    pub mass: f64,
    pub gravity: f64,
    /// Lower clamp on speed inside rate denominators.
    pub v_floor: f64,
    /// Keeps |gamma| away from the vertical singularity inside denominators.
    pub gamma_margin: f64,
    /// Drag coefficient, used only by the physical-control report.
    pub c_drag: f64,
    /// Lift coefficient, used only by the physical-control report.
    pub c_lift: f64,
    /// Air density, used only by the physical-control report.
    pub air_density: f64,
}

impl Default for FixedWing {
    fn default() -> Self {
        Self {
            mass: 1.0,
            gravity: 9.81,
            v_floor: 0.1,
            gamma_margin: 0.01,
            c_drag: 0.0,
            c_lift: 0.0,
            air_density: 1.225,
        }
    }
}

/// Thrust/angle-of-attack equivalents of a force pair, with the aerodynamic
/// terms they absorb.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalControls {
    pub thrust: f64,
    pub angle_of_attack: f64,
    pub drag: f64,
    pub lift: f64,
    /// Set when |angle_of_attack| exceeds [`ANGLE_OF_ATTACK_WARN`].
    pub high_alpha: bool,
}

impl FixedWing {
    /// Regularized reciprocal speed for the rotation-rate rows: exact `1/v`
    /// above the floor, tapering linearly through zero below it. A point
    /// mass without speed has no velocity direction to rotate, so the rate
    /// rows fade out instead of blowing up; this also bounds the loop
    /// stiffness the integrator sees.
    fn inv_speed(&self, v: f64) -> f64 {
        if v.abs() >= self.v_floor {
            1.0 / v
        } else {
            v / (self.v_floor * self.v_floor)
        }
    }

    fn cos_gamma_guarded(&self, gamma: f64) -> f64 {
        let c = gamma.cos();
        let floor = self.gamma_margin.sin();
        if c.abs() < floor {
            if c < 0.0 {
                -floor
            } else {
                floor
            }
        } else {
            c
        }
    }

    /// Invert the force decomposition: thrust magnitude and angle of attack
    /// that produce the given tangent/normal forces at speed `v`, after
    /// removing drag and lift.
    pub fn physical_controls(&self, f_t: f64, f_n: f64, v: f64) -> PhysicalControls {
        let q = 0.5 * self.air_density * v * v;
        let drag = self.c_drag * q;
        let lift = self.c_lift * q;
        let along = f_t + drag;
        let normal = f_n - lift;
        let thrust = along.hypot(normal);
        let angle_of_attack = normal.atan2(along);
        PhysicalControls {
            thrust,
            angle_of_attack,
            drag,
            lift,
            high_alpha: angle_of_attack.abs() > ANGLE_OF_ATTACK_WARN,
        }
    }

    /// Forward force decomposition from thrust and angle of attack; the
    /// inverse of [`physical_controls`](Self::physical_controls).
    pub fn forces_from_physical(&self, thrust: f64, angle_of_attack: f64, v: f64) -> (f64, f64) {
        let q = 0.5 * self.air_density * v * v;
        let drag = self.c_drag * q;
        let lift = self.c_lift * q;
        (
            thrust * angle_of_attack.cos() - drag,
            thrust * angle_of_attack.sin() + lift,
        )
    }
}

impl VehicleModel for FixedWing {
    fn name(&self) -> &'static str {
        "fixed_wing"
    }

    fn control_dim(&self) -> usize {
        3
    }

    fn eval_g(&self, lambda: &Vector3<f64>) -> Vector3<f64> {
        let (v, gamma, psi) = (lambda[0], lambda[1], lambda[2]);
        Vector3::new(
            v * gamma.cos() * psi.cos(),
            v * gamma.cos() * psi.sin(),
            v * gamma.sin(),
        )
    }

    fn eval_f(&self, lambda: &Vector3<f64>, u: &DVector<f64>) -> Vector3<f64> {
        assert_eq!(u.len(), 3, "fixed-wing control vector is (F_T, F_N, sigma)");
        let (v, gamma) = (lambda[0], lambda[1]);
        let (f_t, f_n, sigma) = (u[0], u[1], u[2]);
        let m = self.mass;
        let inv_v = self.inv_speed(v);
        let cg = self.cos_gamma_guarded(gamma);
        Vector3::new(
            f_t / m - self.gravity * gamma.sin(),
            (f_n * sigma.cos() / m - self.gravity * gamma.cos()) * inv_v,
            f_n * sigma.sin() * inv_v / (m * cg),
        )
    }

    fn jacobian_lambda(&self, lambda: &Vector3<f64>) -> Matrix3<f64> {
        let (v, gamma, psi) = (lambda[0], lambda[1], lambda[2]);
        let (cg, sg) = (gamma.cos(), gamma.sin());
        let (cp, sp) = (psi.cos(), psi.sin());
        Matrix3::new(
            cg * cp, -v * sg * cp, -v * cg * sp, //
            cg * sp, -v * sg * sp, v * cg * cp, //
            sg, v * cg, 0.0,
        )
    }

    fn jacobian_u(&self, lambda: &Vector3<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(u.len(), 3);
        let (v, gamma) = (lambda[0], lambda[1]);
        let (f_n, sigma) = (u[1], u[2]);
        let m = self.mass;
        let inv_v = self.inv_speed(v);
        let cg = self.cos_gamma_guarded(gamma);
        let (cs, ss) = (sigma.cos(), sigma.sin());
        DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0 / m,
                0.0,
                0.0,
                0.0,
                cs * inv_v / m,
                -f_n * ss * inv_v / m,
                0.0,
                ss * inv_v / (m * cg),
                f_n * cs * inv_v / (m * cg),
            ],
        )
    }

    fn lambda_for_world_velocity(&self, v_world: &Vector3<f64>) -> Vector3<f64> {
        let v = v_world.norm();
        if v == 0.0 {
            return Vector3::zeros();
        }
        let gamma = (v_world[2] / v).clamp(-1.0, 1.0).asin();
        let psi = v_world[1].atan2(v_world[0]);
        Vector3::new(v, gamma, psi)
    }

    fn controls_for_local_rate(&self, lambda: &Vector3<f64>, rate: &Vector3<f64>) -> DVector<f64> {
        // Exact inversion of the rate rows.
        let (v, gamma) = (lambda[0], lambda[1]);
        let m = self.mass;
        let inv_v = self.inv_speed(v);
        let cg = self.cos_gamma_guarded(gamma);
        let f_t = m * (rate[0] + self.gravity * gamma.sin());
        let (a, b) = if inv_v == 0.0 {
            (m * self.gravity * gamma.cos(), 0.0)
        } else {
            (
                m * rate[1] / inv_v + m * self.gravity * gamma.cos(), // F_N cos(sigma)
                m * cg * rate[2] / inv_v,                             // F_N sin(sigma)
            )
        };
        let f_n = a.hypot(b);
        let sigma = b.atan2(a);
        DVector::from_vec(vec![f_t, f_n, sigma])
    }
}

//! Spherical-coordinate vehicles: local state (v, theta, phi) — radial speed,
//! inclination, azimuth — with either six redundant control inputs or two
//! underactuated ones feeding the rate rows through constant mixing matrices.

use super::VehicleModel;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// World kinematics shared by both spherical vehicles.
///
/// The standard map `x = v cos(phi) sin(theta)`, `y = v sin(phi) sin(theta)`,
/// `z = v cos(theta)` keeps `G` consistent with its analytic Jacobian, which
/// is what the controller differentiates. The `legacy_kinematics` flag swaps
/// in the variant with `cos(theta)`/`sin(theta)` exchanged on the x/y rows
/// (and a Jacobian consistent with *that* map) for comparison runs; it is not
/// the default.
fn eval_g(lambda: &Vector3<f64>, legacy: bool) -> Vector3<f64> {
    let (v, theta, phi) = (lambda[0], lambda[1], lambda[2]);
    if legacy {
        Vector3::new(
            v * phi.cos() * theta.cos(),
            v * phi.sin() * theta.sin(),
            v * theta.cos(),
        )
    } else {
        Vector3::new(
            v * phi.cos() * theta.sin(),
            v * phi.sin() * theta.sin(),
            v * theta.cos(),
        )
    }
}

fn jacobian_lambda(lambda: &Vector3<f64>, legacy: bool) -> Matrix3<f64> {
    let (v, theta, phi) = (lambda[0], lambda[1], lambda[2]);
    let (ct, st) = (theta.cos(), theta.sin());
    let (cp, sp) = (phi.cos(), phi.sin());
    if legacy {
        Matrix3::new(
            cp * ct, -v * cp * st, -v * sp * ct, //
            sp * st, v * sp * ct, v * cp * st, //
            ct, -v * st, 0.0,
        )
    } else {
        Matrix3::new(
            cp * st, v * cp * ct, -v * sp * st, //
            sp * st, v * sp * ct, v * cp * st, //
            ct, -v * st, 0.0,
        )
    }
}

fn lambda_for_world_velocity(v_world: &Vector3<f64>) -> Vector3<f64> {
    let v = v_world.norm();
    if v == 0.0 {
        return Vector3::zeros();
    }
    let theta = (v_world[2] / v).clamp(-1.0, 1.0).acos();
    let phi = v_world[1].atan2(v_world[0]);
    Vector3::new(v, theta, phi)
}

/// Spherical vehicle with six control inputs, more than the three local
/// states: the actuation Jacobian has full row rank.
#[derive(Debug, Clone, Default)]
pub struct SphericalRedundant {
    pub legacy_kinematics: bool,
}

impl VehicleModel for SphericalRedundant {
    fn name(&self) -> &'static str {
        "spherical_redundant"
    }

    fn control_dim(&self) -> usize {
        6
    }

    fn eval_g(&self, lambda: &Vector3<f64>) -> Vector3<f64> {
        eval_g(lambda, self.legacy_kinematics)
    }

    fn eval_f(&self, _lambda: &Vector3<f64>, u: &DVector<f64>) -> Vector3<f64> {
        assert_eq!(u.len(), 6);
        Vector3::new(u[0] + u[3], u[1] + u[2] + u[4], u[1] + u[3] + u[5])
    }

    fn jacobian_lambda(&self, lambda: &Vector3<f64>) -> Matrix3<f64> {
        jacobian_lambda(lambda, self.legacy_kinematics)
    }

    fn jacobian_u(&self, _lambda: &Vector3<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            3,
            6,
            &[
                1.0, 0.0, 0.0, 1.0, 0.0, 0.0, //
                0.0, 1.0, 1.0, 0.0, 1.0, 0.0, //
                0.0, 1.0, 0.0, 1.0, 0.0, 1.0,
            ],
        )
    }

    fn lambda_for_world_velocity(&self, v_world: &Vector3<f64>) -> Vector3<f64> {
        lambda_for_world_velocity(v_world)
    }
}

/// Spherical vehicle with two control inputs: the speed actuator is its own,
/// but one shared actuator drives both angle rates, leaving the actuation
/// Jacobian rank-deficient.
#[derive(Debug, Clone, Default)]
pub struct SphericalUnderactuated {
    pub legacy_kinematics: bool,
}

impl VehicleModel for SphericalUnderactuated {
    fn name(&self) -> &'static str {
        "spherical_underactuated"
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn eval_g(&self, lambda: &Vector3<f64>) -> Vector3<f64> {
        eval_g(lambda, self.legacy_kinematics)
    }

    fn eval_f(&self, _lambda: &Vector3<f64>, u: &DVector<f64>) -> Vector3<f64> {
        assert_eq!(u.len(), 2);
        Vector3::new(u[0], u[1], u[1])
    }

    fn jacobian_lambda(&self, lambda: &Vector3<f64>) -> Matrix3<f64> {
        jacobian_lambda(lambda, self.legacy_kinematics)
    }

    fn jacobian_u(&self, _lambda: &Vector3<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0])
    }

    fn lambda_for_world_velocity(&self, v_world: &Vector3<f64>) -> Vector3<f64> {
        lambda_for_world_velocity(v_world)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_util::{fd_jacobian_lambda, fd_jacobian_u, max_rel_error};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn kinematics_match_jacobian_reference_direction() {
        let m = SphericalRedundant::default();
        let g = m.eval_g(&Vector3::new(1.0, FRAC_PI_2, 0.0));
        assert!((g - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_controls_give_zero_rates() {
        let m = SphericalRedundant::default();
        let rates = m.eval_f(&Vector3::new(1.0, 0.3, 0.7), &DVector::zeros(6));
        assert_eq!(rates, Vector3::zeros());
    }

    #[test]
    fn underactuated_shares_one_angle_actuator() {
        let m = SphericalUnderactuated::default();
        let rates = m.eval_f(&Vector3::zeros(), &DVector::from_vec(vec![1.0, 0.5]));
        assert_eq!(rates, Vector3::new(1.0, 0.5, 0.5));
    }

    #[test]
    fn jacobian_lambda_at_zero_speed_keeps_only_speed_column() {
        let m = SphericalRedundant::default();
        let j = m.jacobian_lambda(&Vector3::new(0.0, 0.4, 1.1));
        assert!(j.column(0).norm() > 0.9);
        assert_eq!(j.column(1).norm(), 0.0);
        assert_eq!(j.column(2).norm(), 0.0);
    }

    #[test]
    fn constant_jacobian_u_is_exact_against_finite_differences() {
        // Affine in u: any differencing step has zero truncation error, so a
        // coarse step keeps roundoff (eps / 2h) below the exactness bound.
        let redundant = SphericalRedundant::default();
        let under = SphericalUnderactuated::default();
        let lambda = Vector3::new(0.8, 0.9, -0.3);
        let u6 = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1]);
        let u2 = DVector::from_vec(vec![0.4, -0.6]);
        let fd = fd_jacobian_u(&redundant, &lambda, &u6, 1e-3);
        assert!((&redundant.jacobian_u(&lambda, &u6) - &fd).amax() < 1e-12);
        let fd = fd_jacobian_u(&under, &lambda, &u2, 1e-3);
        assert!((&under.jacobian_u(&lambda, &u2) - &fd).amax() < 1e-12);
    }

    #[test]
    fn jacobian_lambda_matches_finite_differences_both_kinematics() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for legacy in [false, true] {
            let m = SphericalRedundant {
                legacy_kinematics: legacy,
            };
            for _ in 0..100 {
                let lambda = Vector3::new(
                    rng.gen_range(0.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                );
                let j = DMatrix::from_column_slice(3, 3, m.jacobian_lambda(&lambda).as_slice());
                let fd = DMatrix::from_column_slice(
                    3,
                    3,
                    fd_jacobian_lambda(&m, &lambda, 1e-6).as_slice(),
                );
                assert!(max_rel_error(&j, &fd) < 1e-6, "legacy={legacy} at {lambda}");
            }
        }
    }

    #[test]
    fn redundant_gram_matrix_is_positive_definite() {
        let m = SphericalRedundant::default();
        let ju = m.jacobian_u(&Vector3::zeros(), &DVector::zeros(6));
        let gram = &ju * ju.transpose();
        let eigen = nalgebra::SymmetricEigen::new(gram);
        let min = eigen.eigenvalues.min();
        assert!(min > 1.0, "min eigenvalue {min}");
    }

    #[test]
    fn underactuated_gram_matrix_is_rank_deficient() {
        let m = SphericalUnderactuated::default();
        let ju = m.jacobian_u(&Vector3::zeros(), &DVector::zeros(2));
        let gram = &ju * ju.transpose();
        let eigen = nalgebra::SymmetricEigen::new(gram);
        let min = eigen.eigenvalues.min();
        assert!(min.abs() < 1e-12, "min eigenvalue {min}");
        assert_eq!(ju.rank(1e-12), 2);
    }

    #[test]
    fn least_squares_control_inversion_is_exact_for_redundant() {
        let m = SphericalRedundant::default();
        let rate = Vector3::new(0.7, -0.2, 0.5);
        let u = m.controls_for_local_rate(&Vector3::zeros(), &rate);
        let achieved = m.eval_f(&Vector3::zeros(), &u);
        assert!((achieved - rate).norm() < 1e-12);
    }

    #[test]
    fn world_velocity_inversion_round_trips() {
        let m = SphericalRedundant::default();
        for w in [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.3, -0.4, 0.8),
            Vector3::new(0.0, 0.0, -1.0),
        ] {
            let lambda = m.lambda_for_world_velocity(&w);
            assert!((m.eval_g(&lambda) - w).norm() < 1e-12, "at {w}");
        }
    }
}

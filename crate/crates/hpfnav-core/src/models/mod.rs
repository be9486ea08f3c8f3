//! Two-stage vehicle models: world kinematics driven by local-coordinate
//! dynamics, with the analytic Jacobians the controller differentiates
//! through.
//!
//! Every model maps a three-component local state (radial speed plus two
//! orientation angles) to a world velocity through `G`, and a control vector
//! of model-specific width to local-state rates through `F`.

mod fixed_wing;
mod spherical;

pub use fixed_wing::{FixedWing, PhysicalControls};
pub use spherical::{SphericalRedundant, SphericalUnderactuated};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// A two-stage vehicle: world kinematics `G` over the local state and an
/// actuation map `F` from controls to local-state rates.
///
/// All evaluations are pure; models are immutable parameter bundles and safe
/// to share across threads.
pub trait VehicleModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Width of the control vector.
    fn control_dim(&self) -> usize;

    /// World-frame velocity from the local state.
    fn eval_g(&self, lambda: &Vector3<f64>) -> Vector3<f64>;

    /// Local-state rates from the control vector.
    fn eval_f(&self, lambda: &Vector3<f64>, u: &DVector<f64>) -> Vector3<f64>;

    /// Analytic Jacobian of `eval_g` with respect to the local state.
    fn jacobian_lambda(&self, lambda: &Vector3<f64>) -> Matrix3<f64>;

    /// Analytic Jacobian of `eval_f` with respect to the controls (3 x control_dim).
    fn jacobian_u(&self, lambda: &Vector3<f64>, u: &DVector<f64>) -> DMatrix<f64>;

    /// Local state that realizes a requested world velocity exactly.
    fn lambda_for_world_velocity(&self, v_world: &Vector3<f64>) -> Vector3<f64>;

    /// Controls realizing a requested local-state rate, by least squares
    /// through the actuation Jacobian. Exact for models affine in the
    /// controls; overridden with a closed form elsewhere.
    fn controls_for_local_rate(&self, lambda: &Vector3<f64>, rate: &Vector3<f64>) -> DVector<f64> {
        let ju = self.jacobian_u(lambda, &DVector::zeros(self.control_dim()));
        let pinv = ju
            .pseudo_inverse(1e-12)
            .expect("actuation Jacobian pseudo-inverse");
        &pinv * rate
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    /// Central finite differences of `eval_g` with respect to the local state.
    pub fn fd_jacobian_lambda(
        model: &dyn VehicleModel,
        lambda: &Vector3<f64>,
        step: f64,
    ) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for col in 0..3 {
            let mut up = *lambda;
            let mut dn = *lambda;
            up[col] += step;
            dn[col] -= step;
            let d = (model.eval_g(&up) - model.eval_g(&dn)) / (2.0 * step);
            out.set_column(col, &d);
        }
        out
    }

    /// Central finite differences of `eval_f` with respect to the controls.
    pub fn fd_jacobian_u(
        model: &dyn VehicleModel,
        lambda: &Vector3<f64>,
        u: &DVector<f64>,
        step: f64,
    ) -> DMatrix<f64> {
        let m = model.control_dim();
        let mut out = DMatrix::zeros(3, m);
        for col in 0..m {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[col] += step;
            dn[col] -= step;
            let d = (model.eval_f(lambda, &up) - model.eval_f(lambda, &dn)) / (2.0 * step);
            out.set_column(col, &d);
        }
        out
    }

    pub fn max_rel_error(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
        let scale = analytic.amax().max(1.0);
        (analytic - fd).amax() / scale
    }
}

//! The velocity-attractor control law: world velocity error pulled through
//! the kinematic and actuation Jacobians into a control-rate command, plus
//! the box barrier that keeps controls inside their feasible region.

use crate::models::VehicleModel;
use nalgebra::{DVector, Vector3};
use thiserror::Error;

#[derive(Debug, Clone, Copy)]
pub struct ControllerGains {
    /// World-level velocity-attractor gain.
    pub k_lambda: f64,
    /// Local-level attractor gain on the control rate.
    pub k_u: f64,
}

impl ControllerGains {
    pub fn new(k_lambda: f64, k_u: f64) -> Result<Self, ControllerError> {
        if !(k_lambda > 0.0) {
            return Err(ControllerError::NonPositiveGain("k_lambda", k_lambda));
        }
        if !(k_u > 0.0) {
            return Err(ControllerError::NonPositiveGain("k_u", k_u));
        }
        Ok(Self { k_lambda, k_u })
    }
}

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("{0} must be > 0, got {1}")]
    NonPositiveGain(&'static str, f64),
    #[error("control box bound {index}: lower {lower} must be < upper {upper}")]
    BadBound { index: usize, lower: f64, upper: f64 },
    #[error("control box has {bounds} bounds but the model has {controls} controls")]
    DimensionMismatch { bounds: usize, controls: usize },
    #[error("control component {index} = {value} outside [{lower}, {upper}]")]
    OutsideBox {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("barrier gain bound needs a non-empty sample set")]
    EmptySampleSet,
}

/// Realization of the boundary barrier term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierMode {
    /// Zero any outward rate component at an active bound. The
    /// non-chattering discrete realization; the default.
    Projection,
    /// Add the constant +-K term at active bounds, sized by
    /// [`barrier_gain_bound`].
    BangBang,
}

/// Per-component box bounds on the control vector.
#[derive(Debug, Clone)]
pub struct ControlBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub mode: BarrierMode,
    /// Gain for the bang-bang realization; ignored by projection.
    pub gain: f64,
}

impl ControlBox {
    pub fn symmetric(limit: f64, dim: usize) -> Result<Self, ControllerError> {
        Self::new(
            DVector::from_element(dim, -limit),
            DVector::from_element(dim, limit),
            BarrierMode::Projection,
            0.0,
        )
    }

    pub fn new(
        lower: DVector<f64>,
        upper: DVector<f64>,
        mode: BarrierMode,
        gain: f64,
    ) -> Result<Self, ControllerError> {
        if lower.len() != upper.len() {
            return Err(ControllerError::DimensionMismatch {
                bounds: lower.len(),
                controls: upper.len(),
            });
        }
        for i in 0..lower.len() {
            if !(lower[i] < upper[i]) {
                return Err(ControllerError::BadBound {
                    index: i,
                    lower: lower[i],
                    upper: upper[i],
                });
            }
        }
        Ok(Self {
            lower,
            upper,
            mode,
            gain,
        })
    }

    pub fn check_dims(&self, controls: usize) -> Result<(), ControllerError> {
        if self.lower.len() != controls {
            return Err(ControllerError::DimensionMismatch {
                bounds: self.lower.len(),
                controls,
            });
        }
        Ok(())
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        (0..u.len()).all(|i| u[i] >= self.lower[i] && u[i] <= self.upper[i])
    }

    pub fn clamp(&self, u: &mut DVector<f64>) {
        for i in 0..u.len() {
            u[i] = u[i].clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// World velocity error scaled into the attractor force:
/// `F_p = k_lambda (p_dot_r - p_dot)`. Returns the force and the raw error.
pub fn world_velocity_error(
    gains: &ControllerGains,
    p_dot_r: &Vector3<f64>,
    p_dot: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let p_dot_e = p_dot_r - p_dot;
    (p_dot_e * gains.k_lambda, p_dot_e)
}

/// The world-level force expressed as a local-state reference rate through
/// the kinematic Jacobian transpose.
pub fn local_reference_rate(
    model: &dyn VehicleModel,
    lambda: &Vector3<f64>,
    f_p: &Vector3<f64>,
) -> Vector3<f64> {
    model.jacobian_lambda(lambda).transpose() * f_p
}

/// Everything the control law computes in one pass; the intermediates are
/// the observables the convergence analysis quantifies, so they are kept for
/// logging.
#[derive(Debug, Clone)]
pub struct ControlEval {
    pub u_dot: DVector<f64>,
    pub p_dot: Vector3<f64>,
    pub p_dot_e: Vector3<f64>,
    pub lambda_dot_r: Vector3<f64>,
    pub lambda_dot: Vector3<f64>,
    pub lambda_dot_e: Vector3<f64>,
}

/// The full control-rate law
/// `u_dot = k_u J_u^T [k_lambda J_lambda^T (p_dot_r - G(lambda)) - F(lambda, u)]`.
///
/// `p_dot_r` may come from any reference field, not only a potential
/// gradient.
pub fn control_rate(
    model: &dyn VehicleModel,
    gains: &ControllerGains,
    lambda: &Vector3<f64>,
    u: &DVector<f64>,
    p_dot_r: &Vector3<f64>,
) -> ControlEval {
    let p_dot = model.eval_g(lambda);
    let (f_p, p_dot_e) = world_velocity_error(gains, p_dot_r, &p_dot);
    let lambda_dot_r = local_reference_rate(model, lambda, &f_p);
    let lambda_dot = model.eval_f(lambda, u);
    let lambda_dot_e = lambda_dot_r - lambda_dot;
    let u_dot = model.jacobian_u(lambda, u).transpose() * lambda_dot_e * gains.k_u;
    ControlEval {
        u_dot,
        p_dot,
        p_dot_e,
        lambda_dot_r,
        lambda_dot,
        lambda_dot_e,
    }
}

/// Constrain a control rate at the box boundary.
///
/// Projection zeroes outward components at active bounds; bang-bang adds the
/// constant barrier term instead. `u` must already be inside the box — the
/// integrator's clamp guarantees that.
pub fn apply_barrier(
    cbox: &ControlBox,
    u: &DVector<f64>,
    u_dot: &DVector<f64>,
) -> Result<DVector<f64>, ControllerError> {
    let mut out = u_dot.clone();
    for i in 0..u.len() {
        let (lo, hi) = (cbox.lower[i], cbox.upper[i]);
        if u[i] < lo || u[i] > hi {
            return Err(ControllerError::OutsideBox {
                index: i,
                value: u[i],
                lower: lo,
                upper: hi,
            });
        }
        match cbox.mode {
            BarrierMode::Projection => {
                if (u[i] >= hi && out[i] > 0.0) || (u[i] <= lo && out[i] < 0.0) {
                    out[i] = 0.0;
                }
            }
            BarrierMode::BangBang => {
                if u[i] >= hi {
                    out[i] -= cbox.gain;
                } else if u[i] <= lo {
                    out[i] += cbox.gain;
                }
            }
        }
    }
    Ok(out)
}

/// A state sample for sizing the barrier gain.
#[derive(Debug, Clone)]
pub struct BarrierSample {
    pub lambda: Vector3<f64>,
    pub u: DVector<f64>,
    pub p_dot_r: Vector3<f64>,
}

/// Barrier gain from the largest control-rate magnitude over a sample set,
/// times a safety factor.
pub fn barrier_gain_bound(
    model: &dyn VehicleModel,
    gains: &ControllerGains,
    samples: &[BarrierSample],
    safety_factor: f64,
) -> Result<f64, ControllerError> {
    if samples.is_empty() {
        return Err(ControllerError::EmptySampleSet);
    }
    let mut worst = 0.0f64;
    for s in samples {
        let eval = control_rate(model, gains, &s.lambda, &s.u, &s.p_dot_r);
        worst = worst.max(eval.u_dot.amax());
    }
    Ok(worst * safety_factor)
}

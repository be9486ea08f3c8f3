//! Closed-loop simulation: the joint position/local-state/control ODE under
//! the velocity-attractor law, integrated with fixed-step RK4.
//!
//! The barrier projection is applied inside every stage derivative and the
//! control vector is clamped to its box after each step, so logged controls
//! satisfy the box exactly. Noise, when enabled, perturbs the control rate
//! per stage from a seeded stream; identical scenario and seed give
//! bit-identical logs.

pub mod compliance;
pub mod log;
pub mod multi;
pub mod scenario;

pub use compliance::{run_compliance, ComplianceReport};
pub use log::{LogRow, RunSummary, Termination, TrajectoryLog};
pub use multi::{run_multi, AgentRuntime, HpfResolve, MultiReport, MultiScenario};
pub use scenario::{AgentSpec, ReferenceSpec, ScenarioSpec};

use crate::controller::{apply_barrier, control_rate, ControlBox, ControllerGains};
use crate::field::QueryError;
use crate::guidance::ReferenceField;
use crate::models::VehicleModel;
use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

/// Default capture radius for analytic point targets, in length units.
pub const CAPTURE_RADIUS_ANALYTIC: f64 = 0.05;
/// Capture radius for potential-field targets, in cell spacings.
pub const CAPTURE_RADIUS_HPF_CELLS: f64 = 2.0;
/// Fraction of the rated speed below which a potential-field capture counts.
pub const CAPTURE_V_STOP_FRACTION: f64 = 0.5;

/// The simulated triple: position, local state, controls, at a time.
#[derive(Debug, Clone)]
pub struct JointState {
    pub t: f64,
    pub p: Vector3<f64>,
    pub lambda: Vector3<f64>,
    pub u: DVector<f64>,
}

/// Reference-freezing modes for the convergence-property checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreezeMode {
    /// Hold the position and the local reference rate at their initial
    /// values and integrate only the local state and controls.
    LambdaLevel,
    /// Hold the reference velocity at its initial value and slave the local
    /// rate to its reference, leaving no local error.
    PLevel,
}

/// Additive uniform perturbation on the control rate.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub amplitude: f64,
    pub seed: u64,
}

/// When a run stops before the time horizon.
#[derive(Debug, Clone)]
pub enum CaptureRule {
    None,
    /// Within `radius` of the target point.
    Point { target: Vector3<f64>, radius: f64 },
    /// Within `radius` of the target and slowed below `v_stop`, or within
    /// the unconditional inner radius.
    Hpf {
        target: Vector3<f64>,
        planar: bool,
        radius: f64,
        v_stop: f64,
        inner_radius: f64,
    },
}

impl CaptureRule {
    /// Derive the default rule for a reference field.
    pub fn for_reference(reference: &ReferenceField) -> Self {
        use crate::guidance::ReferenceKind;
        match reference.kind() {
            ReferenceKind::Point { target, .. } => CaptureRule::Point {
                target: *target,
                radius: CAPTURE_RADIUS_ANALYTIC,
            },
            ReferenceKind::Hpf { field, .. } => {
                let spacing = field.env().spacing();
                let c = reference.target_point().unwrap();
                CaptureRule::Hpf {
                    target: c,
                    planar: field.env().dims() == 2,
                    radius: CAPTURE_RADIUS_HPF_CELLS * spacing,
                    v_stop: CAPTURE_V_STOP_FRACTION * reference.v_ref(),
                    inner_radius: 0.75 * spacing,
                }
            }
            _ => CaptureRule::None,
        }
    }

    fn captured(&self, p: &Vector3<f64>, v: f64) -> bool {
        match self {
            CaptureRule::None => false,
            CaptureRule::Point { target, radius } => (p - target).norm() < *radius,
            CaptureRule::Hpf {
                target,
                planar,
                radius,
                v_stop,
                inner_radius,
            } => {
                let dist = if *planar {
                    (p[0] - target[0]).hypot(p[1] - target[1])
                } else {
                    (p - target).norm()
                };
                dist < *inner_radius || (dist < *radius && v.abs() < *v_stop)
            }
        }
    }
}

/// A fully-built single-vehicle scenario, ready to integrate.
#[derive(Clone)]
pub struct Scenario {
    pub model: Arc<dyn VehicleModel>,
    pub gains: ControllerGains,
    pub control_box: Option<ControlBox>,
    pub reference: ReferenceField,
    pub initial: JointState,
    pub dt: f64,
    pub t_final: f64,
    pub freeze: Option<FreezeMode>,
    pub noise: Option<NoiseSpec>,
    pub capture: CaptureRule,
    /// Relative band around the rated speed used for the settling-time
    /// summary.
    pub settling_band: f64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    BadScenario(String),
    #[error("reference query failed: {0}")]
    Reference(#[from] QueryError),
    #[error("controller: {0}")]
    Controller(#[from] crate::controller::ControllerError),
    #[error("non-finite {quantity} at t = {t}")]
    NonFinite { quantity: &'static str, t: f64 },
    #[error("field solve during run: {0}")]
    Solve(#[from] crate::field::SolveError),
    #[error("matched-initial construction failed: residual {residual:e}")]
    MatchedInitial { residual: f64 },
}

impl Scenario {
    pub fn new(
        model: Arc<dyn VehicleModel>,
        gains: ControllerGains,
        reference: ReferenceField,
        initial: JointState,
        dt: f64,
        t_final: f64,
    ) -> Result<Self, SimError> {
        if !(dt > 0.0) {
            return Err(SimError::BadScenario(format!("dt must be > 0, got {dt}")));
        }
        if t_final < dt {
            return Err(SimError::BadScenario(format!(
                "t_final {t_final} must be at least dt {dt}"
            )));
        }
        if initial.u.len() != model.control_dim() {
            return Err(SimError::BadScenario(format!(
                "initial control vector has {} components, model wants {}",
                initial.u.len(),
                model.control_dim()
            )));
        }
        let capture = CaptureRule::for_reference(&reference);
        Ok(Self {
            model,
            gains,
            control_box: None,
            reference,
            initial,
            dt,
            t_final,
            freeze: None,
            noise: None,
            capture,
            settling_band: 0.02,
        })
    }

    pub fn with_control_box(mut self, cbox: ControlBox) -> Result<Self, SimError> {
        cbox.check_dims(self.model.control_dim())?;
        if !cbox.contains(&self.initial.u) {
            return Err(SimError::BadScenario(
                "initial controls outside the control box".into(),
            ));
        }
        self.control_box = Some(cbox);
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_freeze(mut self, mode: FreezeMode) -> Self {
        self.freeze = Some(mode);
        self
    }

    pub fn with_capture(mut self, capture: CaptureRule) -> Self {
        self.capture = capture;
        self
    }
}

/// Frozen quantities captured once at the start of a freeze-mode run.
#[derive(Debug, Clone)]
struct FrozenRefs {
    p_dot_r: Vector3<f64>,
    lambda_dot_r: Vector3<f64>,
}

struct Derivative {
    dp: Vector3<f64>,
    dlambda: Vector3<f64>,
    du: DVector<f64>,
}

/// Integrator for one scenario. Holds the noise stream and frozen
/// references so stepping is deterministic and self-contained.
pub struct Runner {
    scenario: Scenario,
    rng: Option<ChaCha8Rng>,
    frozen: Option<FrozenRefs>,
}

impl Runner {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        let frozen = match scenario.freeze {
            None => None,
            Some(_) => {
                let p0 = scenario.initial.p;
                let p_dot_r = scenario.reference.velocity(&p0)?;
                let eval = control_rate(
                    scenario.model.as_ref(),
                    &scenario.gains,
                    &scenario.initial.lambda,
                    &scenario.initial.u,
                    &p_dot_r,
                );
                Some(FrozenRefs {
                    p_dot_r,
                    lambda_dot_r: eval.lambda_dot_r,
                })
            }
        };
        let rng = scenario
            .noise
            .as_ref()
            .map(|n| ChaCha8Rng::seed_from_u64(n.seed));
        Ok(Self {
            scenario,
            rng,
            frozen,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Swap the reference field mid-run; used by the multi-vehicle loop when
    /// it re-solves the avoidance field. Frozen-reference runs keep their
    /// captured values.
    pub fn set_reference(&mut self, reference: ReferenceField) {
        self.scenario.reference = reference;
    }

    fn derivative(
        &self,
        p: &Vector3<f64>,
        lambda: &Vector3<f64>,
        u: &DVector<f64>,
        noise: Option<&DVector<f64>>,
    ) -> Result<Derivative, SimError> {
        let s = &self.scenario;
        match s.freeze {
            None => {
                let p_dot_r = s.reference.velocity(p)?;
                let eval = control_rate(s.model.as_ref(), &s.gains, lambda, u, &p_dot_r);
                let mut u_dot = eval.u_dot;
                if let Some(n) = noise {
                    u_dot += n;
                }
                if let Some(cbox) = &s.control_box {
                    u_dot = apply_barrier(cbox, u, &u_dot)?;
                }
                Ok(Derivative {
                    dp: eval.p_dot,
                    dlambda: eval.lambda_dot,
                    du: u_dot,
                })
            }
            Some(FreezeMode::LambdaLevel) => {
                let frozen = self.frozen.as_ref().unwrap();
                let lambda_dot = s.model.eval_f(lambda, u);
                let lambda_dot_e = frozen.lambda_dot_r - lambda_dot;
                let mut u_dot =
                    s.model.jacobian_u(lambda, u).transpose() * lambda_dot_e * s.gains.k_u;
                if let Some(n) = noise {
                    u_dot += n;
                }
                if let Some(cbox) = &s.control_box {
                    u_dot = apply_barrier(cbox, u, &u_dot)?;
                }
                Ok(Derivative {
                    dp: Vector3::zeros(),
                    dlambda: lambda_dot,
                    du: u_dot,
                })
            }
            Some(FreezeMode::PLevel) => {
                let frozen = self.frozen.as_ref().unwrap();
                let p_dot = s.model.eval_g(lambda);
                let f_p = (frozen.p_dot_r - p_dot) * s.gains.k_lambda;
                let lambda_dot_r = s.model.jacobian_lambda(lambda).transpose() * f_p;
                Ok(Derivative {
                    dp: p_dot,
                    dlambda: lambda_dot_r,
                    du: DVector::zeros(u.len()),
                })
            }
        }
    }

    /// Observables at a state, for logging.
    fn observe(&self, state: &JointState) -> Result<LogRow, SimError> {
        let s = &self.scenario;
        let p_dot_r = match (&s.freeze, &self.frozen) {
            (Some(_), Some(f)) => f.p_dot_r,
            _ => s.reference.velocity(&state.p)?,
        };
        let eval = control_rate(s.model.as_ref(), &s.gains, &state.lambda, &state.u, &p_dot_r);
        let (lambda_dot_e, p_dot_e) = match s.freeze {
            Some(FreezeMode::LambdaLevel) => {
                let frozen = self.frozen.as_ref().unwrap();
                (frozen.lambda_dot_r - eval.lambda_dot, eval.p_dot_e)
            }
            Some(FreezeMode::PLevel) => (Vector3::zeros(), eval.p_dot_e),
            None => (eval.lambda_dot_e, eval.p_dot_e),
        };
        let ju = s.model.jacobian_u(&state.lambda, &state.u);
        let jl = s.model.jacobian_lambda(&state.lambda);
        Ok(LogRow {
            t: state.t,
            p: state.p,
            lambda: state.lambda,
            u: state.u.clone(),
            p_dot_r,
            p_dot_e,
            lambda_dot_e,
            e_p: p_dot_e.norm_squared(),
            e_lambda: lambda_dot_e.norm_squared(),
            eta_lambda: min_eigenvalue_dyn(&(&ju * ju.transpose())),
            eta_p: min_eigenvalue(&(jl * jl.transpose())),
        })
    }

    fn clamped(&self, mut u: DVector<f64>) -> DVector<f64> {
        if let Some(cbox) = &self.scenario.control_box {
            cbox.clamp(&mut u);
        }
        u
    }

    /// One RK4 step of the joint system.
    pub fn step(&mut self, state: &JointState) -> Result<JointState, SimError> {
        let s = &self.scenario;
        let dt = s.dt;
        let m = state.u.len();
        // Four per-stage noise draws, taken up front so the stream advances
        // identically regardless of stage outcomes.
        let noise: Option<Vec<DVector<f64>>> = match (&s.noise, &mut self.rng) {
            (Some(spec), Some(rng)) => {
                let amp = spec.amplitude;
                Some(
                    (0..4)
                        .map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-amp..=amp)))
                        .collect(),
                )
            }
            _ => None,
        };
        let stage_noise = |i: usize| noise.as_ref().map(|n| &n[i]);

        let k1 = self.derivative(&state.p, &state.lambda, &state.u, stage_noise(0))?;
        let half = dt * 0.5;
        let u2 = self.clamped(&state.u + &k1.du * half);
        let k2 = self.derivative(
            &(state.p + k1.dp * half),
            &(state.lambda + k1.dlambda * half),
            &u2,
            stage_noise(1),
        )?;
        let u3 = self.clamped(&state.u + &k2.du * half);
        let k3 = self.derivative(
            &(state.p + k2.dp * half),
            &(state.lambda + k2.dlambda * half),
            &u3,
            stage_noise(2),
        )?;
        let u4 = self.clamped(&state.u + &k3.du * dt);
        let k4 = self.derivative(
            &(state.p + k3.dp * dt),
            &(state.lambda + k3.dlambda * dt),
            &u4,
            stage_noise(3),
        )?;

        let sixth = dt / 6.0;
        let p = state.p + (k1.dp + k2.dp * 2.0 + k3.dp * 2.0 + k4.dp) * sixth;
        let lambda =
            state.lambda + (k1.dlambda + k2.dlambda * 2.0 + k3.dlambda * 2.0 + k4.dlambda) * sixth;
        let u = self.clamped(&state.u + (&k1.du + &k2.du * 2.0 + &k3.du * 2.0 + &k4.du) * sixth);
        let t = state.t + dt;

        for (name, ok) in [
            ("position", p.iter().all(|x| x.is_finite())),
            ("local state", lambda.iter().all(|x| x.is_finite())),
            ("controls", u.iter().all(|x| x.is_finite())),
        ] {
            if !ok {
                return Err(SimError::NonFinite { quantity: name, t });
            }
        }
        Ok(JointState { t, p, lambda, u })
    }
}

/// Integrate a scenario from start to the time horizon or early capture.
pub fn run(scenario: Scenario) -> Result<TrajectoryLog, SimError> {
    let settling_band = scenario.settling_band;
    let v_ref = scenario.reference.v_ref();
    let capture = scenario.capture.clone();
    let dt = scenario.dt;
    let steps = (scenario.t_final / dt + 1e-9).floor() as usize;
    let mut runner = Runner::new(scenario)?;
    let mut state = runner.scenario.initial.clone();
    state.t = 0.0;
    if let Some(cbox) = &runner.scenario.control_box {
        if !cbox.contains(&state.u) {
            return Err(SimError::BadScenario(
                "initial controls outside the control box".into(),
            ));
        }
    }

    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(runner.observe(&state)?);
    let mut termination = Termination::TimeLimit;
    for k in 1..=steps {
        state = runner.step(&state)?;
        state.t = k as f64 * dt;
        rows.push(runner.observe(&state)?);
        if capture.captured(&state.p, state.lambda[0]) {
            termination = Termination::Captured { t: state.t };
            break;
        }
    }

    let summary = summarize_with_freeze(
        &rows,
        termination,
        runner.scenario.reference.target_point(),
        v_ref,
        settling_band,
        runner.scenario.freeze,
    );
    Ok(TrajectoryLog {
        control_dim: runner.scenario.model.control_dim(),
        rows,
        summary,
    })
}

pub(crate) fn summarize(
    rows: &[LogRow],
    termination: Termination,
    target: Option<Vector3<f64>>,
    v_ref: f64,
    settling_band: f64,
) -> RunSummary {
    summarize_with_freeze(rows, termination, target, v_ref, settling_band, None)
}

pub(crate) fn summarize_with_freeze(
    rows: &[LogRow],
    termination: Termination,
    target: Option<Vector3<f64>>,
    v_ref: f64,
    settling_band: f64,
    freeze: Option<FreezeMode>,
) -> RunSummary {
    let final_target_distance = target.and_then(|t| rows.last().map(|r| (r.p - t).norm()));
    let band = settling_band * v_ref;
    let mut settle: Option<f64> = None;
    for row in rows.iter().rev() {
        if (row.lambda[0] - v_ref).abs() <= band {
            settle = Some(row.t);
        } else {
            break;
        }
    }
    // Never settled if only the final row is inside the band.
    let v_settling_time = match (settle, rows.last()) {
        (Some(t), Some(last)) if t < last.t => Some(t),
        _ => None,
    };
    let max_control = rows
        .iter()
        .map(|r| r.u.amax())
        .fold(0.0f64, f64::max);
    RunSummary {
        termination,
        steps: rows.len().saturating_sub(1),
        final_target_distance,
        v_settling_time,
        max_control,
        min_inter_distance: None,
        freeze: freeze.map(|f| {
            match f {
                FreezeMode::LambdaLevel => "lambda",
                FreezeMode::PLevel => "p",
            }
            .to_string()
        }),
    }
}

pub(crate) fn min_eigenvalue(gram: &Matrix3<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(*gram).eigenvalues.min()
}

pub(crate) fn min_eigenvalue_dyn(gram: &nalgebra::DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(gram.clone()).eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerGains;
    use crate::guidance::{ReferenceField, ReferenceKind};
    use crate::models::{FixedWing, SphericalRedundant};

    fn line_scenario(dt: f64, t_final: f64) -> Scenario {
        let model = Arc::new(FixedWing {
            gravity: 0.0,
            ..FixedWing::default()
        });
        let reference = ReferenceField::new(
            ReferenceKind::Line {
                direction: Vector3::new(1.0, 0.0, 0.0),
                anchor: Vector3::new(0.0, 2.0, 2.0),
                capture_gain: 1.0,
            },
            1.0,
        )
        .unwrap();
        let initial = JointState {
            t: 0.0,
            p: Vector3::zeros(),
            lambda: Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_4),
            u: DVector::zeros(3),
        };
        Scenario::new(
            model,
            ControllerGains::new(2.0, 1.0).unwrap(),
            reference,
            initial,
            dt,
            t_final,
        )
        .unwrap()
    }

    #[test]
    fn rest_equilibrium_stays_put() {
        // Spherical vehicle at rest with a zero reference: every derivative
        // vanishes and the state is unchanged.
        let model = Arc::new(SphericalRedundant::default());
        let reference = ReferenceField::point(Vector3::zeros(), 1.0).unwrap();
        let initial = JointState {
            t: 0.0,
            p: Vector3::zeros(), // at the reference target: tapered to zero
            lambda: Vector3::zeros(),
            u: DVector::zeros(6),
        };
        let scenario = Scenario::new(
            model,
            ControllerGains::new(1.0, 1.0).unwrap(),
            reference,
            initial.clone(),
            0.01,
            1.0,
        )
        .unwrap()
        .with_capture(CaptureRule::None);
        let mut runner = Runner::new(scenario).unwrap();
        let next = runner.step(&initial).unwrap();
        assert_eq!(next.p, initial.p);
        assert_eq!(next.lambda, initial.lambda);
        assert_eq!(next.u, initial.u);
    }

    #[test]
    fn first_step_spins_up_speed() {
        let scenario = line_scenario(0.01, 1.0);
        let mut runner = Runner::new(scenario).unwrap();
        let s0 = runner.scenario().initial.clone();
        let s1 = runner.step(&s0).unwrap();
        assert!(s1.lambda[0] > 0.0, "v did not increase: {}", s1.lambda[0]);
        assert!(s1.u[0] > 0.0, "thrust rate not positive");
    }

    #[test]
    fn log_row_count_matches_horizon() {
        let log = run(line_scenario(0.01, 0.5)).unwrap();
        assert_eq!(log.rows.len(), 51);
        assert!(log
            .rows
            .windows(2)
            .all(|w| w[1].t > w[0].t), "time not monotone");
    }

    #[test]
    fn rk4_order_check() {
        // Start from a smooth mid-flight state so the error is dominated by
        // the integrator, then compare against a fine-step reference.
        let base = |dt: f64, t_final: f64| {
            let mut s = line_scenario(dt, t_final);
            s.initial = JointState {
                t: 0.0,
                p: Vector3::new(0.0, 1.0, 1.0),
                lambda: Vector3::new(1.0, 0.1, 0.3),
                u: DVector::from_vec(vec![0.1, 0.2, 0.05]),
            };
            s
        };
        let final_state = |dt: f64| {
            let log = run(base(dt, 1.0)).unwrap();
            let last = log.rows.last().unwrap();
            (last.p, last.lambda, last.u.clone())
        };
        let reference = final_state(0.000625);
        let err = |dt: f64| {
            let (p, l, u) = final_state(dt);
            ((p - reference.0).norm_squared()
                + (l - reference.1).norm_squared()
                + (&u - &reference.2).norm_squared())
            .sqrt()
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        let e3 = err(0.005);
        let r12 = e1 / e2;
        let r23 = e2 / e3;
        assert!(
            (4.0..64.0).contains(&r12),
            "first halving ratio {r12} (errors {e1:e}, {e2:e})"
        );
        assert!(
            (4.0..64.0).contains(&r23),
            "second halving ratio {r23} (errors {e2:e}, {e3:e})"
        );
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let with_noise = |seed| {
            let mut s = line_scenario(0.01, 0.5);
            s = s.with_noise(NoiseSpec {
                amplitude: 0.05,
                seed,
            });
            run(s).unwrap().to_csv()
        };
        assert_eq!(with_noise(7), with_noise(7));
        assert_ne!(with_noise(7), with_noise(8));
    }

    #[test]
    fn barrier_containment_is_exact() {
        let mut s = line_scenario(0.01, 2.0);
        s = s
            .with_control_box(crate::controller::ControlBox::symmetric(0.4, 3).unwrap())
            .unwrap();
        let log = run(s).unwrap();
        for row in &log.rows {
            assert!(row.u.amax() <= 0.4, "control escaped the box: {}", row.u);
        }
        assert!(log.summary.max_control <= 0.4);
    }
}

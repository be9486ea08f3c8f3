//! Kinematic-vs-dynamic trajectory comparison: gradient descent on the
//! potential field against the full closed-loop vehicle, with optional
//! matched initial conditions that zero both velocity errors at the start.

use super::{run, JointState, Scenario, SimError, TrajectoryLog};
use crate::controller::control_rate;
use crate::field::{DescentOptions, DescentPath};
use crate::guidance::ReferenceKind;
use nalgebra::Vector3;

/// Residual bound for the matched-initial control solve.
const MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug)]
pub struct ComplianceReport {
    /// Gradient-descent path on the field.
    pub kinematic: DescentPath,
    /// Closed-loop run.
    pub dynamic: TrajectoryLog,
    /// Largest distance from a dynamic sample to the nearest kinematic
    /// sample (planar for planar fields).
    pub max_deviation: f64,
}

/// Construct initial local state and controls so the vehicle starts with
/// zero world and local velocity errors: `G(lambda) = p_dot_r` exactly and
/// `F(lambda, u) = lambda_dot_r`.
pub fn matched_initial_state(scenario: &Scenario) -> Result<JointState, SimError> {
    let p0 = scenario.initial.p;
    let p_dot_r = scenario.reference.velocity(&p0)?;
    let lambda = scenario.model.lambda_for_world_velocity(&p_dot_r);
    let eval = control_rate(
        scenario.model.as_ref(),
        &scenario.gains,
        &lambda,
        &scenario.initial.u,
        &p_dot_r,
    );
    let u = scenario
        .model
        .controls_for_local_rate(&lambda, &eval.lambda_dot_r);
    let residual = (scenario.model.eval_f(&lambda, &u) - eval.lambda_dot_r).norm();
    if residual > MATCH_TOLERANCE {
        return Err(SimError::MatchedInitial { residual });
    }
    Ok(JointState {
        t: 0.0,
        p: p0,
        lambda,
        u,
    })
}

/// Run the closed loop over a potential-field reference and compare the
/// dynamic trajectory against the pure gradient-descent path.
pub fn run_compliance(
    mut scenario: Scenario,
    matched_initial: bool,
) -> Result<ComplianceReport, SimError> {
    let (field, planar) = match scenario.reference.kind() {
        ReferenceKind::Hpf { field, .. } => (field.clone(), field.env().dims() == 2),
        _ => {
            return Err(SimError::BadScenario(
                "compliance runs need a potential-field reference".into(),
            ))
        }
    };
    if matched_initial {
        scenario.initial = matched_initial_state(&scenario)?;
    }
    let start = scenario.initial.p;
    let opts = DescentOptions::for_field(&field);
    let kinematic = field
        .descend([start[0], start[1], start[2]], &opts)
        .map_err(SimError::Reference)?;
    let dynamic = run(scenario)?;

    let mut max_deviation = 0.0f64;
    for row in &dynamic.rows {
        let mut best = f64::INFINITY;
        for k in &kinematic.points {
            let d = if planar {
                (row.p[0] - k[0]).hypot(row.p[1] - k[1])
            } else {
                (row.p - Vector3::new(k[0], k[1], k[2])).norm()
            };
            best = best.min(d);
        }
        max_deviation = max_deviation.max(best);
    }
    Ok(ComplianceReport {
        kinematic,
        dynamic,
        max_deviation,
    })
}

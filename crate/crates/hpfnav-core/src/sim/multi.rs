//! Two-vehicle lock-step simulation with dynamic obstacle avoidance: the
//! cooperative vehicle periodically re-solves its potential field with an
//! obstacle disc stamped at the other vehicle's position.

use super::{summarize, JointState, Runner, Scenario, SimError, Termination, TrajectoryLog};
use crate::field::{solve_laplace, SolverParams};
use crate::grid::{CellClass, GridEnvironment};
use crate::guidance::{AltitudeHold, ReferenceField, ReferenceKind};
use nalgebra::Vector3;
use std::sync::Arc;

/// Re-solve configuration for an avoiding vehicle.
#[derive(Clone)]
pub struct HpfResolve {
    /// Environment without the other vehicle.
    pub base_env: Arc<GridEnvironment>,
    pub params: SolverParams,
    /// Obstacle disc radius stamped at the other vehicle, in cells.
    pub stamp_radius_cells: f64,
    pub altitude: Option<AltitudeHold>,
    pub taper_radius: f64,
}

#[derive(Clone)]
pub struct AgentRuntime {
    pub scenario: Scenario,
    /// Non-cooperative vehicles fly their reference blindly.
    pub cooperative: bool,
    /// Present on cooperative vehicles with a potential-field reference.
    pub resolve: Option<HpfResolve>,
}

pub struct MultiScenario {
    pub agents: Vec<AgentRuntime>,
    /// Seconds between field re-solves; None disables avoidance entirely
    /// (the ablation case).
    pub resolve_period: Option<f64>,
}

#[derive(Debug)]
pub struct MultiReport {
    pub logs: Vec<TrajectoryLog>,
    /// Inter-vehicle distance per step, `(t, distance)`.
    pub inter_distance: Vec<(f64, f64)>,
    pub min_inter_distance: f64,
    pub all_captured: bool,
}

/// Stamp an obstacle disc into a copy of the base environment.
///
/// Small exclusion zones are kept free around the stamping vehicle's own
/// position and around its goal — both locations it knows to be safe — so a
/// nearby intruder cannot wall off the solve; a target that is genuinely
/// enclosed elsewhere still surfaces as a solve error.
fn stamped_env(
    base: &GridEnvironment,
    obstacle_at: &Vector3<f64>,
    radius_cells: f64,
    self_at: &Vector3<f64>,
    target_cell: usize,
) -> GridEnvironment {
    let mut env = base.clone();
    let h = env.spacing();
    let radius = radius_cells * h;
    let exclusion = 1.5 * h;
    let goal = env.cell_center(target_cell);
    for cell in 0..env.cell_count() {
        if cell == target_cell || env.class(cell) != CellClass::Free {
            continue;
        }
        let c = env.cell_center(cell);
        let d_obstacle = (c[0] - obstacle_at[0]).hypot(c[1] - obstacle_at[1]);
        let d_self = (c[0] - self_at[0]).hypot(c[1] - self_at[1]);
        let d_goal = (c[0] - goal[0]).hypot(c[1] - goal[1]);
        if d_obstacle <= radius && d_self > exclusion && d_goal > exclusion {
            env.set_class(cell, CellClass::Obstacle);
        }
    }
    env
}

/// Lock-step integration of two vehicles. Within a step each vehicle sees
/// only its own state; coupling happens through the periodic re-solve.
pub fn run_multi(ms: MultiScenario) -> Result<MultiReport, SimError> {
    if ms.agents.len() != 2 {
        return Err(SimError::BadScenario(format!(
            "multi-vehicle runs take exactly 2 agents, got {}",
            ms.agents.len()
        )));
    }
    let dt = ms.agents[0].scenario.dt;
    let t_final = ms.agents[0].scenario.t_final;
    for a in &ms.agents {
        if (a.scenario.dt - dt).abs() > 0.0 || (a.scenario.t_final - t_final).abs() > 0.0 {
            return Err(SimError::BadScenario(
                "agents must share dt and t_final".into(),
            ));
        }
    }
    let steps = (t_final / dt + 1e-9).floor() as usize;
    let resolve_every = ms
        .resolve_period
        .map(|p| ((p / dt).round() as usize).max(1));

    let mut runners: Vec<Runner> = Vec::new();
    for a in &ms.agents {
        runners.push(Runner::new(a.scenario.clone())?);
    }
    let mut states: Vec<JointState> = runners
        .iter()
        .map(|r| {
            let mut s = r.scenario().initial.clone();
            s.t = 0.0;
            s
        })
        .collect();
    let mut captured: Vec<Option<f64>> = vec![None; 2];
    let mut rows: Vec<Vec<super::LogRow>> = vec![Vec::new(), Vec::new()];
    for i in 0..2 {
        rows[i].push(runners[i].observe(&states[i])?);
    }
    let mut inter_distance = Vec::with_capacity(steps + 1);
    let d0 = (states[0].p - states[1].p).norm();
    inter_distance.push((0.0, d0));
    let mut min_inter = d0;

    // Initial field solve with the other vehicle stamped in, so avoidance is
    // active from the first step.
    if resolve_every.is_some() {
        resolve_fields(&ms, &mut runners, &states)?;
    }

    for k in 1..=steps {
        if let Some(every) = resolve_every {
            if k > 1 && (k - 1) % every == 0 {
                resolve_fields(&ms, &mut runners, &states)?;
            }
        }
        let t = k as f64 * dt;
        for i in 0..2 {
            if captured[i].is_some() {
                continue;
            }
            let mut next = runners[i].step(&states[i])?;
            next.t = t;
            rows[i].push(runners[i].observe(&next)?);
            if runners[i]
                .scenario()
                .capture
                .captured(&next.p, next.lambda[0])
            {
                captured[i] = Some(t);
            }
            states[i] = next;
        }
        let d = (states[0].p - states[1].p).norm();
        inter_distance.push((t, d));
        min_inter = min_inter.min(d);
        if captured.iter().all(Option::is_some) {
            break;
        }
    }

    let mut logs = Vec::new();
    for (i, agent_rows) in rows.into_iter().enumerate() {
        let termination = match captured[i] {
            Some(t) => Termination::Captured { t },
            None => Termination::TimeLimit,
        };
        let mut summary = summarize(
            &agent_rows,
            termination,
            runners[i].scenario().reference.target_point(),
            runners[i].scenario().reference.v_ref(),
            runners[i].scenario().settling_band,
        );
        summary.min_inter_distance = Some(min_inter);
        logs.push(TrajectoryLog {
            control_dim: runners[i].scenario().model.control_dim(),
            rows: agent_rows,
            summary,
        });
    }
    Ok(MultiReport {
        logs,
        inter_distance,
        min_inter_distance: min_inter,
        all_captured: captured.iter().all(Option::is_some),
    })
}

fn resolve_fields(
    ms: &MultiScenario,
    runners: &mut [Runner],
    states: &[JointState],
) -> Result<(), SimError> {
    for i in 0..runners.len() {
        let Some(resolve) = &ms.agents[i].resolve else {
            continue;
        };
        if !ms.agents[i].cooperative {
            continue;
        }
        let other = &states[1 - i];
        let target_cell = match runners[i].scenario().reference.kind() {
            ReferenceKind::Hpf { field, .. } => field.target_cell(),
            _ => continue,
        };
        let env = stamped_env(
            &resolve.base_env,
            &other.p,
            resolve.stamp_radius_cells,
            &states[i].p,
            target_cell,
        );
        let field = solve_laplace(env, &resolve.params)?;
        let v_ref = runners[i].scenario().reference.v_ref();
        let reference = ReferenceField::new(
            ReferenceKind::Hpf {
                field: Arc::new(field),
                altitude: resolve.altitude,
                taper_radius: resolve.taper_radius,
            },
            v_ref,
        )
        .map_err(|e| SimError::BadScenario(e.to_string()))?;
        runners[i].set_reference(reference);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerGains;
    use crate::guidance::ReferenceField;
    use crate::models::SphericalRedundant;
    use crate::sim::CaptureRule;
    use nalgebra::{DVector, Vector3};
    use std::f64::consts::FRAC_PI_2;

    fn point_agent(start: Vector3<f64>, target: Vector3<f64>, heading_phi: f64) -> AgentRuntime {
        let reference = ReferenceField::point(target, 1.0).unwrap();
        let scenario = Scenario::new(
            std::sync::Arc::new(SphericalRedundant::default()),
            ControllerGains::new(2.0, 1.0).unwrap(),
            reference,
            JointState {
                t: 0.0,
                p: start,
                lambda: Vector3::new(0.0, FRAC_PI_2, heading_phi),
                u: DVector::zeros(6),
            },
            0.01,
            15.0,
        )
        .unwrap()
        .with_capture(CaptureRule::Point {
            target,
            radius: 0.1,
        });
        AgentRuntime {
            scenario,
            cooperative: false,
            resolve: None,
        }
    }

    #[test]
    fn far_apart_parallel_courses_never_interact() {
        // Same direction, lanes 6 units apart: the inter-distance stays near
        // the initial clearance and both vehicles reach their goals.
        let a = point_agent(Vector3::new(0.0, 0.0, 2.0), Vector3::new(8.0, 0.0, 2.0), 0.0);
        let b = point_agent(Vector3::new(0.0, 6.0, 2.0), Vector3::new(8.0, 6.0, 2.0), 0.0);
        let report = run_multi(MultiScenario {
            agents: vec![a, b],
            resolve_period: None,
        })
        .unwrap();
        assert!(report.all_captured);
        assert!(
            report.min_inter_distance > 6.0 - 0.5,
            "clearance shrank to {}",
            report.min_inter_distance
        );
    }

    #[test]
    fn wrong_agent_count_is_rejected() {
        let a = point_agent(Vector3::zeros(), Vector3::new(8.0, 0.0, 2.0), 0.0);
        let err = run_multi(MultiScenario {
            agents: vec![a],
            resolve_period: None,
        });
        assert!(matches!(err, Err(SimError::BadScenario(_))));
    }
}

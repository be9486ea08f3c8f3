//! Correctness observables: exponential decay-bound checks on frozen-
//! reference logs, finite-difference validation of the analytic Jacobians,
//! and potential-field sanity reports.
//!
//! Every function here is pure: the same log or field yields the identical
//! report.

use crate::controller::{control_rate, ControllerGains};
use crate::field::{DescentOptions, DescentTermination, PotentialField};
use crate::models::VehicleModel;
use crate::sim::{LogRow, TrajectoryLog};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Relative slack allowed over the theoretical decay bound.
pub const DECAY_SLACK: f64 = 1e-6;
/// Error-level bound for zero-initial-error persistence.
pub const ZERO_ERROR_LEVEL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("log was not produced in a frozen-reference mode")]
    NotFrozen,
    #[error("log is empty")]
    EmptyLog,
}

/// Squared error norms recomputed from a log row's error vectors.
pub fn error_measures(row: &LogRow) -> (f64, f64) {
    (row.p_dot_e.norm_squared(), row.lambda_dot_e.norm_squared())
}

/// Recompute a row's observables from its raw state through the model and
/// gains; matches the logged values up to parse round-trip.
pub fn recompute_row(
    model: &dyn VehicleModel,
    gains: &ControllerGains,
    row: &LogRow,
) -> (Vector3<f64>, Vector3<f64>, f64, f64) {
    let eval = control_rate(model, gains, &row.lambda, &row.u, &row.p_dot_r);
    (
        eval.p_dot_e,
        eval.lambda_dot_e,
        eval.p_dot_e.norm_squared(),
        eval.lambda_dot_e.norm_squared(),
    )
}

/// Outcome of comparing a frozen-reference run against its exponential
/// decay bound.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    /// Which error measure was checked: "lambda" or "p".
    pub level: String,
    pub e0: f64,
    /// Exponent fitted to the measured decay, when the error is nonzero.
    pub fitted_exponent: Option<f64>,
    /// `2 K eta_min` with the run-wide minimum eigenvalue.
    pub bound_exponent: f64,
    /// Steps exceeding the bound beyond the relative slack.
    pub violations: usize,
    pub max_violation_ratio: f64,
    pub pass: bool,
}

/// Check a frozen-reference log against
/// `E(t) <= exp(-2 K eta_min t) E(0)` using the running minimum of the
/// logged eigenvalue. A run started at zero error must stay below
/// [`ZERO_ERROR_LEVEL`] instead.
pub fn decay_check(
    log: &TrajectoryLog,
    gains: &ControllerGains,
) -> Result<DecayReport, DiagnosticsError> {
    let level = log
        .summary
        .freeze
        .clone()
        .ok_or(DiagnosticsError::NotFrozen)?;
    if log.rows.is_empty() {
        return Err(DiagnosticsError::EmptyLog);
    }
    type Picker = fn(&LogRow) -> f64;
    let (gain, pick_e, pick_eta): (f64, Picker, Picker) =
        match level.as_str() {
            "lambda" => (log_gain(gains).0, |r| r.e_lambda, |r| r.eta_lambda),
            "p" => (log_gain(gains).1, |r| r.e_p, |r| r.eta_p),
            _ => return Err(DiagnosticsError::NotFrozen),
        };
    let e0 = pick_e(&log.rows[0]);
    let mut eta_min = f64::INFINITY;
    let mut violations = 0usize;
    let mut max_ratio = 0.0f64;
    for row in &log.rows {
        eta_min = eta_min.min(pick_eta(row).max(0.0));
        let e = pick_e(row);
        if e0 == 0.0 {
            if e > ZERO_ERROR_LEVEL {
                violations += 1;
                max_ratio = max_ratio.max(e / ZERO_ERROR_LEVEL);
            }
            continue;
        }
        let bound = e0 * (-2.0 * gain * eta_min * row.t).exp();
        let ratio = e / bound.max(f64::MIN_POSITIVE);
        if ratio > 1.0 + DECAY_SLACK {
            violations += 1;
        }
        max_ratio = max_ratio.max(ratio);
    }
    let fitted_exponent = fit_decay_exponent(&log.rows, pick_e, e0);
    Ok(DecayReport {
        level,
        e0,
        fitted_exponent,
        bound_exponent: 2.0 * gain * if eta_min.is_finite() { eta_min } else { 0.0 },
        violations,
        max_violation_ratio: max_ratio,
        pass: violations == 0,
    })
}

fn log_gain(gains: &ControllerGains) -> (f64, f64) {
    (gains.k_u, gains.k_lambda)
}

/// Least-squares slope of ln E against t over the span where E is still
/// meaningfully above the numeric floor.
fn fit_decay_exponent(rows: &[LogRow], pick: fn(&LogRow) -> f64, e0: f64) -> Option<f64> {
    if e0 <= 0.0 {
        return None;
    }
    let floor = e0 * 1e-10;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.t, pick(r)))
        .take_while(|(_, e)| *e > floor)
        .filter(|(_, e)| *e > 0.0)
        .map(|(t, e)| (t, e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, se) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, me) = (st / n, se / n);
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, e) in &pts {
        num += (t - mt) * (e - me);
        den += (t - mt) * (t - mt);
    }
    if den == 0.0 {
        None
    } else {
        Some(-(num / den))
    }
}

/// Worst-case relative deviation between analytic and finite-difference
/// Jacobians over seeded random admissible states.
#[derive(Debug, Clone, Serialize)]
pub struct FdJacobianReport {
    pub model: String,
    pub samples: usize,
    pub step: f64,
    pub max_rel_error_j_lambda: f64,
    pub max_rel_error_j_u: f64,
}

pub fn fd_jacobian_check(
    model: &dyn VehicleModel,
    samples: usize,
    step: f64,
    seed: u64,
) -> FdJacobianReport {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = model.control_dim();
    let mut worst_l = 0.0f64;
    let mut worst_u = 0.0f64;
    for _ in 0..samples {
        // Admissible window: speeds away from the rate-row guard, angles away
        // from the vertical clamp, so the differencing never straddles a kink.
        let lambda = Vector3::new(
            rng.gen_range(0.3..3.0),
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let u = DVector::from_fn(m, |_, _| rng.gen_range(-2.0..2.0));

        let jl = model.jacobian_lambda(&lambda);
        let mut fd_l = DMatrix::zeros(3, 3);
        for col in 0..3 {
            let mut up = lambda;
            let mut dn = lambda;
            up[col] += step;
            dn[col] -= step;
            let d = (model.eval_g(&up) - model.eval_g(&dn)) / (2.0 * step);
            fd_l.set_column(col, &d);
        }
        let jl_dyn = DMatrix::from_column_slice(3, 3, jl.as_slice());
        worst_l = worst_l.max(rel_error(&jl_dyn, &fd_l));

        let ju = model.jacobian_u(&lambda, &u);
        let mut fd_u = DMatrix::zeros(3, m);
        for col in 0..m {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[col] += step;
            dn[col] -= step;
            let d = (model.eval_f(&lambda, &up) - model.eval_f(&lambda, &dn)) / (2.0 * step);
            fd_u.set_column(col, &d);
        }
        worst_u = worst_u.max(rel_error(&ju, &fd_u));
    }
    FdJacobianReport {
        model: model.name().into(),
        samples,
        step,
        max_rel_error_j_lambda: worst_l,
        max_rel_error_j_u: worst_u,
    }
}

fn rel_error(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    (analytic - fd).amax() / analytic.amax().max(1.0)
}

/// Field health: interior range over reachable cells, spurious discrete
/// minima, and descent success rate.
#[derive(Debug, Clone, Serialize)]
pub struct SanityReport {
    pub interior_min: f64,
    pub interior_max: f64,
    /// All reachable solved cells strictly between the pinned extremes.
    pub strict_interior: bool,
    /// Reachable free cells (not next to the target) below every neighbor
    /// by more than the tolerance.
    pub spurious_minima: usize,
    pub reachable_cells: usize,
    pub unreachable_cells: usize,
    pub descent_attempts: usize,
    pub descent_successes: usize,
    pub descent_success_rate: f64,
}

/// Cell-count threshold up to which the descent sweep is exhaustive.
const EXHAUSTIVE_LIMIT: usize = 32 * 32 * 32;

pub fn field_sanity(field: &PotentialField, tolerance: f64) -> SanityReport {
    let env = field.env();
    let reachable = field.reachable_mask();
    let target = field.target_cell();
    let w = field.complement();
    let v = field.values();

    let mut interior_min = f64::INFINITY;
    let mut interior_max = f64::NEG_INFINITY;
    let mut strict_interior = true;
    let mut spurious = 0usize;
    let mut reachable_count = 0usize;
    let mut unreachable = 0usize;
    let target_neighbors: Vec<usize> = env.neighbors(target).collect();
    for cell in 0..env.cell_count() {
        if !field.is_solvable(cell) {
            continue;
        }
        if !reachable[cell] {
            unreachable += 1;
            continue;
        }
        reachable_count += 1;
        interior_min = interior_min.min(v[cell]);
        interior_max = interior_max.max(v[cell]);
        // Strictness judged on the complement, which resolves values that
        // round to 1.0 in V.
        if !(w[cell] > 0.0 && w[cell] < 1.0) {
            strict_interior = false;
        }
        if target_neighbors.contains(&cell) {
            continue;
        }
        let is_minimum = env
            .neighbors(cell)
            .all(|nb| w[cell] >= w[nb] + tolerance);
        if is_minimum {
            spurious += 1;
        }
    }

    let attempt_cells: Vec<usize> = {
        let all: Vec<usize> = (0..env.cell_count())
            .filter(|&c| field.is_solvable(c) && reachable[c])
            .collect();
        if all.len() <= EXHAUSTIVE_LIMIT {
            all
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut picked = Vec::with_capacity(512);
            for _ in 0..512 {
                picked.push(all[rng.gen_range(0..all.len())]);
            }
            picked
        }
    };
    let opts = DescentOptions::for_field(field);
    let mut successes = 0usize;
    for &cell in &attempt_cells {
        let start = env.cell_center(cell);
        if let Ok(path) = field.descend(start, &opts) {
            if path.termination == DescentTermination::ReachedTarget {
                successes += 1;
            }
        }
    }
    let attempts = attempt_cells.len();
    SanityReport {
        interior_min,
        interior_max,
        strict_interior,
        spurious_minima: spurious,
        reachable_cells: reachable_count,
        unreachable_cells: unreachable,
        descent_attempts: attempts,
        descent_successes: successes,
        descent_success_rate: if attempts == 0 {
            1.0
        } else {
            successes as f64 / attempts as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerGains;
    use crate::field::{solve_laplace, SolverParams};
    use crate::grid::{CellClass, GridEnvironment};
    use crate::guidance::ReferenceField;
    use crate::models::{FixedWing, SphericalRedundant, SphericalUnderactuated};
    use crate::sim::{run, FreezeMode, JointState, Scenario};
    use std::sync::Arc;

    #[test]
    fn error_measures_are_squared_norms() {
        let mut row = sample_row();
        row.p_dot_e = Vector3::new(3.0, 4.0, 0.0);
        row.lambda_dot_e = Vector3::zeros();
        let (e_p, e_lambda) = error_measures(&row);
        assert_eq!(e_p, 25.0);
        assert_eq!(e_lambda, 0.0);
    }

    fn sample_row() -> LogRow {
        LogRow {
            t: 0.0,
            p: Vector3::zeros(),
            lambda: Vector3::new(1.0, 0.0, 0.0),
            u: DVector::zeros(6),
            p_dot_r: Vector3::new(1.0, 0.0, 0.0),
            p_dot_e: Vector3::zeros(),
            lambda_dot_e: Vector3::zeros(),
            e_p: 0.0,
            e_lambda: 0.0,
            eta_lambda: 1.0,
            eta_p: 1.0,
        }
    }

    fn frozen_lambda_scenario() -> Scenario {
        let model = Arc::new(SphericalRedundant::default());
        let reference = ReferenceField::point(Vector3::new(5.0, 5.0, 5.0), 1.0).unwrap();
        let initial = JointState {
            t: 0.0,
            p: Vector3::zeros(),
            lambda: Vector3::new(0.3, 1.2, 0.4),
            u: DVector::from_vec(vec![0.2, -0.1, 0.3, 0.0, 0.1, -0.2]),
        };
        Scenario::new(
            model,
            ControllerGains::new(1.0, 1.0).unwrap(),
            reference,
            initial,
            0.01,
            5.0,
        )
        .unwrap()
        .with_freeze(FreezeMode::LambdaLevel)
    }

    #[test]
    fn redundant_spherical_respects_the_decay_bound() {
        let log = run(frozen_lambda_scenario()).unwrap();
        let gains = ControllerGains::new(1.0, 1.0).unwrap();
        let report = decay_check(&log, &gains).unwrap();
        assert!(report.pass, "violations: {report:?}");
        assert!(report.e0 > 0.0);
        assert!(report.bound_exponent > 0.0);
        // The actual decay is at least as fast as the bound.
        if let Some(fit) = report.fitted_exponent {
            assert!(fit >= report.bound_exponent * 0.99, "{report:?}");
        }
    }

    #[test]
    fn underactuated_bound_degenerates_to_non_increase() {
        let model = Arc::new(SphericalUnderactuated::default());
        let reference = ReferenceField::point(Vector3::new(5.0, 5.0, 5.0), 1.0).unwrap();
        let initial = JointState {
            t: 0.0,
            p: Vector3::zeros(),
            lambda: Vector3::new(0.3, 1.2, 0.4),
            u: DVector::from_vec(vec![0.5, -0.2]),
        };
        let scenario = Scenario::new(
            model,
            ControllerGains::new(1.0, 1.0).unwrap(),
            reference,
            initial,
            0.01,
            5.0,
        )
        .unwrap()
        .with_freeze(FreezeMode::LambdaLevel);
        let log = run(scenario).unwrap();
        let gains = ControllerGains::new(1.0, 1.0).unwrap();
        let report = decay_check(&log, &gains).unwrap();
        assert!(report.bound_exponent.abs() < 1e-9, "{report:?}");
        assert!(report.pass, "{report:?}");
        // Error must be non-increasing even though the bound is flat.
        let mut prev = f64::INFINITY;
        for row in &log.rows {
            assert!(row.e_lambda <= prev + 1e-9);
            prev = row.e_lambda;
        }
    }

    #[test]
    fn logged_rows_recompute_from_raw_state() {
        // Round-trip: serialize to CSV, parse back, recompute the error
        // quantities from the raw state columns through the model and gains.
        let model = SphericalRedundant::default();
        let gains = ControllerGains::new(1.0, 1.0).unwrap();
        let reference = ReferenceField::point(Vector3::new(4.0, 3.0, 5.0), 1.0).unwrap();
        let scenario = Scenario::new(
            Arc::new(SphericalRedundant::default()),
            gains,
            reference,
            JointState {
                t: 0.0,
                p: Vector3::zeros(),
                lambda: Vector3::new(0.2, 1.0, 0.5),
                u: DVector::from_vec(vec![0.1, -0.2, 0.05, 0.3, 0.0, -0.1]),
            },
            0.01,
            2.0,
        )
        .unwrap();
        let log = run(scenario).unwrap();
        let parsed = crate::sim::TrajectoryLog::from_csv(&log.to_csv()).unwrap();
        for row in parsed.rows.iter().step_by(20) {
            let (p_dot_e, lambda_dot_e, e_p, e_lambda) = recompute_row(&model, &gains, row);
            assert!((p_dot_e - row.p_dot_e).norm() <= 1e-12);
            assert!((lambda_dot_e - row.lambda_dot_e).norm() <= 1e-12);
            assert!((e_p - row.e_p).abs() <= 1e-12);
            assert!((e_lambda - row.e_lambda).abs() <= 1e-12);
        }
    }

    #[test]
    fn non_frozen_log_is_rejected() {
        let model = Arc::new(SphericalRedundant::default());
        let reference = ReferenceField::point(Vector3::new(2.0, 2.0, 2.0), 1.0).unwrap();
        let initial = JointState {
            t: 0.0,
            p: Vector3::zeros(),
            lambda: Vector3::new(0.0, 1.0, 1.0),
            u: DVector::zeros(6),
        };
        let scenario = Scenario::new(
            model,
            ControllerGains::new(1.0, 1.0).unwrap(),
            reference,
            initial,
            0.01,
            0.2,
        )
        .unwrap();
        let log = run(scenario).unwrap();
        let gains = ControllerGains::new(1.0, 1.0).unwrap();
        assert!(matches!(
            decay_check(&log, &gains),
            Err(DiagnosticsError::NotFrozen)
        ));
    }

    #[test]
    fn fd_check_validates_all_models() {
        let fw = FixedWing {
            gravity: 0.0,
            ..FixedWing::default()
        };
        let report = fd_jacobian_check(&fw, 100, 1e-6, 42);
        assert!(report.max_rel_error_j_lambda <= 1e-6, "{report:?}");
        assert!(report.max_rel_error_j_u <= 1e-6, "{report:?}");
        // Affine actuation maps difference exactly at a coarse step.
        for report in [
            fd_jacobian_check(&SphericalRedundant::default(), 100, 1e-3, 42),
            fd_jacobian_check(&SphericalUnderactuated::default(), 100, 1e-3, 42),
        ] {
            assert!(report.max_rel_error_j_u <= 1e-12, "{report:?}");
            assert!(report.max_rel_error_j_lambda <= 1e-6, "{report:?}");
        }
    }

    #[test]
    fn fd_truncation_error_shrinks_quadratically() {
        // Fixed-wing kinematics: halving the step cuts the truncation error
        // about fourfold while it dominates roundoff.
        let fw = FixedWing {
            gravity: 0.0,
            ..FixedWing::default()
        };
        let coarse = fd_jacobian_check(&fw, 50, 2e-3, 9).max_rel_error_j_lambda;
        let fine = fd_jacobian_check(&fw, 50, 1e-3, 9).max_rel_error_j_lambda;
        let ratio = coarse / fine;
        assert!((2.5..6.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sanity_on_a_clean_field() {
        let mut env = GridEnvironment::new_2d(9, 9, 1.0).unwrap();
        env.set_border_obstacles();
        env.set_class(env.index(4, 4, 0), CellClass::Target);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        let report = field_sanity(&field, 1e-8);
        assert_eq!(report.spurious_minima, 0);
        assert!(report.strict_interior);
        assert_eq!(report.descent_success_rate, 1.0);
        assert_eq!(report.unreachable_cells, 0);
        assert!(report.interior_min > 0.0 && report.interior_max < 1.0);
    }

    #[test]
    fn walled_off_cell_is_reported_unreachable() {
        let mut env = GridEnvironment::new_2d(7, 7, 1.0).unwrap();
        env.set_border_obstacles();
        env.set_class(env.index(3, 3, 0), CellClass::Target);
        // Wall off the (1,1) corner cell.
        env.set_class(env.index(2, 1, 0), CellClass::Obstacle);
        env.set_class(env.index(1, 2, 0), CellClass::Obstacle);
        env.set_class(env.index(2, 2, 0), CellClass::Obstacle);
        let field = solve_laplace(env, &SolverParams::default()).unwrap();
        let report = field_sanity(&field, 1e-8);
        assert_eq!(report.unreachable_cells, 1);
        assert_eq!(report.descent_success_rate, 1.0);
    }
}

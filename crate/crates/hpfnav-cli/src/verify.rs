//! The standalone verification battery behind `hpfnav verify`: Jacobian
//! finite-difference checks, solver reductions, field sanity, frozen-
//! reference decay bounds, and the integrator order check.

use hpfnav_core::controller::ControllerGains;
use hpfnav_core::diagnostics::{decay_check, fd_jacobian_check, field_sanity};
use hpfnav_core::field::{solve_anisotropic, solve_laplace, solve_weighted, SigmaParams, SolverParams};
use hpfnav_core::grid::{CellClass, GridEnvironment};
use hpfnav_core::guidance::{ReferenceField, ReferenceKind};
use hpfnav_core::models::{FixedWing, SphericalRedundant, SphericalUnderactuated};
use hpfnav_core::sim::{run, CaptureRule, FreezeMode, JointState, Scenario};
use nalgebra::{DVector, Vector3};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name, pass, detail }
}

pub fn battery() -> Vec<CheckResult> {
    let mut out = Vec::new();

    // Finite-difference validation of every analytic Jacobian.
    let fw = FixedWing::default();
    let r = fd_jacobian_check(&fw, 100, 1e-6, 42);
    out.push(check(
        "fd_jacobian_fixed_wing",
        r.max_rel_error_j_lambda <= 1e-6 && r.max_rel_error_j_u <= 1e-6,
        format!(
            "J_lambda {:.2e}, J_u {:.2e} (bound 1e-6)",
            r.max_rel_error_j_lambda, r.max_rel_error_j_u
        ),
    ));
    let r = fd_jacobian_check(&SphericalRedundant::default(), 100, 1e-3, 42);
    out.push(check(
        "fd_jacobian_spherical_redundant",
        r.max_rel_error_j_lambda <= 1e-6 && r.max_rel_error_j_u <= 1e-12,
        format!(
            "J_lambda {:.2e} (1e-6), J_u {:.2e} (1e-12, affine)",
            r.max_rel_error_j_lambda, r.max_rel_error_j_u
        ),
    ));
    let r = fd_jacobian_check(&SphericalUnderactuated::default(), 100, 1e-3, 42);
    out.push(check(
        "fd_jacobian_spherical_underactuated",
        r.max_rel_error_j_lambda <= 1e-6 && r.max_rel_error_j_u <= 1e-12,
        format!(
            "J_lambda {:.2e} (1e-6), J_u {:.2e} (1e-12, affine)",
            r.max_rel_error_j_lambda, r.max_rel_error_j_u
        ),
    ));

    // Solver reduction equivalences.
    let params = SolverParams::default();
    let mut env = GridEnvironment::new_2d(9, 9, 1.0).unwrap();
    env.set_border_obstacles();
    env.set_class(env.index(4, 4, 0), CellClass::Target);
    let base = solve_laplace(env.clone(), &params).unwrap();
    let empty = solve_anisotropic(
        env.clone(),
        &params,
        SigmaParams {
            sigma_f: 1.0,
            sigma_b: 0.01,
        },
    )
    .unwrap();
    let dev_empty = max_abs_diff(base.values(), empty.values());
    let mut env_dir = env.clone();
    for i in 2..7 {
        env_dir
            .set_direction(env_dir.index(i, 2, 0), [0.0, 1.0, 0.0])
            .unwrap();
    }
    let equal = solve_anisotropic(
        env_dir,
        &params,
        SigmaParams {
            sigma_f: 0.6,
            sigma_b: 0.6,
        },
    )
    .unwrap();
    let dev_equal = max_abs_diff(base.values(), equal.values());
    out.push(check(
        "anisotropic_reductions",
        dev_empty <= 10.0 * params.tolerance && dev_equal <= 10.0 * params.tolerance,
        format!("empty-region dev {dev_empty:.2e}, equal-sigma dev {dev_equal:.2e}"),
    ));

    let weighted_dev = weighted_reduction_deviation(&params);
    out.push(check(
        "weighted_reduction",
        weighted_dev <= 10.0 * params.tolerance,
        format!("uniform-fitness dev {weighted_dev:.2e} vs pinned isotropic"),
    ));

    // Field sanity: bordered grid plus a seeded random obstacle grid.
    let report = field_sanity(&base, params.tolerance);
    let random = random_obstacle_field(99, &params);
    let report_r = field_sanity(&random, params.tolerance);
    out.push(check(
        "field_sanity",
        report.spurious_minima == 0
            && report.strict_interior
            && report.descent_success_rate == 1.0
            && report_r.spurious_minima == 0
            && report_r.strict_interior
            && report_r.descent_success_rate == 1.0,
        format!(
            "9x9: {}/{} descents, random 24x24: {}/{} descents, 0 spurious minima",
            report.descent_successes,
            report.descent_attempts,
            report_r.descent_successes,
            report_r.descent_attempts
        ),
    ));

    // Frozen-reference decay bounds.
    let gains = ControllerGains::new(1.0, 1.0).unwrap();
    let log = run(frozen_lambda_spherical()).unwrap();
    let d = decay_check(&log, &gains).unwrap();
    out.push(check(
        "decay_lambda_spherical",
        d.pass && d.bound_exponent > 0.0,
        format!(
            "bound exponent {:.3}, fitted {:?}, violations {}",
            d.bound_exponent, d.fitted_exponent, d.violations
        ),
    ));
    let log = run(frozen_p_fixed_wing()).unwrap();
    let d = decay_check(&log, &gains).unwrap();
    out.push(check(
        "decay_p_fixed_wing",
        d.pass && d.bound_exponent > 0.0,
        format!(
            "bound exponent {:.3}, fitted {:?}, violations {}",
            d.bound_exponent, d.fitted_exponent, d.violations
        ),
    ));

    // Zero-initial-error persistence.
    let log = run(zero_error_fixed_wing()).unwrap();
    let worst = log
        .rows
        .iter()
        .map(|r| r.e_p.max(r.e_lambda))
        .fold(0.0f64, f64::max);
    out.push(check(
        "zero_error_persistence",
        worst <= 1e-9,
        format!("max error measure {worst:.2e} over 5 s (bound 1e-9)"),
    ));

    // Physical-control inversion round trip.
    let fw = FixedWing {
        c_drag: 0.2,
        c_lift: 0.8,
        air_density: 1.2,
        ..FixedWing::default()
    };
    let mut worst = 0.0f64;
    for (f_t, f_n, v) in [(1.0, 3.0, 2.0), (-0.4, 0.7, 1.3), (0.0, 0.0, 0.9)] {
        let pc = fw.physical_controls(f_t, f_n, v);
        let (rt, rn) = fw.forces_from_physical(pc.thrust, pc.angle_of_attack, v);
        worst = worst.max((rt - f_t).abs().max((rn - f_n).abs()));
    }
    out.push(check(
        "physical_controls_round_trip",
        worst <= 1e-12,
        format!("max reconstruction error {worst:.2e} (bound 1e-12)"),
    ));

    // Integrator order.
    let (r12, r23) = rk4_order_ratios();
    out.push(check(
        "rk4_order",
        (4.0..64.0).contains(&r12) && (4.0..64.0).contains(&r23),
        format!("halving ratios {r12:.1}, {r23:.1} (expect ~16, accept 4..64)"),
    ));

    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn weighted_reduction_deviation(params: &SolverParams) -> f64 {
    // Identical pinning: the weighted problem's start cell plays the role of
    // an extra high-pinned obstacle in the isotropic problem, and the border
    // ring conducts with unit fitness in both.
    let mut base_env = GridEnvironment::new_2d(9, 9, 1.0).unwrap();
    base_env.set_border_obstacles();
    base_env.set_class(base_env.index(4, 4, 0), CellClass::Target);
    base_env.set_class(base_env.index(2, 2, 0), CellClass::Obstacle);
    let base = solve_laplace(base_env, params).unwrap();

    let mut weighted_env = GridEnvironment::new_2d(9, 9, 1.0).unwrap();
    weighted_env.set_border_obstacles();
    for idx in 0..weighted_env.cell_count() {
        weighted_env.set_beta(idx, 1.0).unwrap();
    }
    weighted_env.set_class(weighted_env.index(4, 4, 0), CellClass::Target);
    weighted_env.set_class(weighted_env.index(2, 2, 0), CellClass::Start);
    let weighted = solve_weighted(weighted_env, params).unwrap();
    max_abs_diff(base.values(), weighted.values())
}

fn random_obstacle_field(seed: u64, params: &SolverParams) -> hpfnav_core::PotentialField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut env = GridEnvironment::new_2d(24, 24, 1.0).unwrap();
        env.set_border_obstacles();
        for idx in 0..env.cell_count() {
            if !env.is_border(idx) && rng.gen_bool(0.18) {
                env.set_class(idx, CellClass::Obstacle);
            }
        }
        let t = env.index(rng.gen_range(1..23), rng.gen_range(1..23), 0);
        env.set_class(t, CellClass::Target);
        if let Ok(field) = solve_laplace(env, params) {
            return field;
        }
    }
}

fn frozen_lambda_spherical() -> Scenario {
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
    .with_capture(CaptureRule::None)
}

fn frozen_p_fixed_wing() -> Scenario {
    let model = Arc::new(FixedWing {
        gravity: 0.0,
        ..FixedWing::default()
    });
    let reference = ReferenceField::point(Vector3::new(10.0, 0.0, 0.0), 1.0).unwrap();
    let initial = JointState {
        t: 0.0,
        p: Vector3::zeros(),
        lambda: Vector3::new(0.5, 0.2, -0.4),
        u: DVector::zeros(3),
    };
    Scenario::new(
        model,
        ControllerGains::new(2.0, 1.0).unwrap(),
        reference,
        initial,
        0.01,
        5.0,
    )
    .unwrap()
    .with_freeze(FreezeMode::PLevel)
    .with_capture(CaptureRule::None)
}

fn zero_error_fixed_wing() -> Scenario {
    let g = 1.5;
    let model = Arc::new(FixedWing {
        gravity: g,
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
    // On the line, at speed, trimmed: both velocity errors are exactly zero.
    let initial = JointState {
        t: 0.0,
        p: Vector3::new(0.0, 2.0, 2.0),
        lambda: Vector3::new(1.0, 0.0, 0.0),
        u: DVector::from_vec(vec![0.0, g, 0.0]),
    };
    Scenario::new(
        model,
        ControllerGains::new(2.0, 1.0).unwrap(),
        reference,
        initial,
        0.01,
        5.0,
    )
    .unwrap()
}

pub fn rk4_order_ratios() -> (f64, f64) {
    let scenario = |dt: f64| {
        let model = Arc::new(FixedWing {
            gravity: 1.5,
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
            p: Vector3::new(0.0, 1.0, 1.0),
            lambda: Vector3::new(1.0, 0.1, 0.3),
            u: DVector::from_vec(vec![0.1, 1.4, 0.05]),
        };
        Scenario::new(
            model,
            ControllerGains::new(2.0, 1.0).unwrap(),
            reference,
            initial,
            dt,
            1.0,
        )
        .unwrap()
    };
    let final_state = |dt: f64| {
        let log = run(scenario(dt)).unwrap();
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
    let (e1, e2, e3) = (err(0.02), err(0.01), err(0.005));
    (e1 / e2, e2 / e3)
}

//! Property tests for the module invariants.

use hpfnav_core::controller::{apply_barrier, ControlBox};
use hpfnav_core::field::{solve_laplace, solve_weighted, SolverParams};
use hpfnav_core::grid::{CellClass, GridEnvironment};
use hpfnav_core::guidance::{ReferenceField, ReferenceKind};
use hpfnav_core::models::FixedWing;
use nalgebra::{DVector, Vector3};
use proptest::prelude::*;

proptest! {
    /// Every reference variant emits exactly the rated speed away from its
    /// taper region.
    #[test]
    fn reference_magnitude_is_rated_speed(
        v_ref in 0.1f64..5.0,
        px in -10.0f64..10.0,
        py in -10.0f64..10.0,
        pz in -10.0f64..10.0,
        gain in 0.1f64..3.0,
    ) {
        let p = Vector3::new(px, py, pz);
        let line = ReferenceField::new(
            ReferenceKind::Line {
                direction: Vector3::new(1.0, 0.3, -0.2),
                anchor: Vector3::new(0.0, 2.0, 2.0),
                capture_gain: gain,
            },
            v_ref,
        )
        .unwrap();
        prop_assert!((line.velocity(&p).unwrap().norm() - v_ref).abs() < 1e-9);

        let spiral = ReferenceField::new(
            ReferenceKind::Spiral {
                center: [0.5, -0.5],
                growth_rate: 0.2,
                altitude: 2.0,
                capture_gain: gain,
            },
            v_ref,
        )
        .unwrap();
        prop_assert!((spiral.velocity(&p).unwrap().norm() - v_ref).abs() < 1e-9);

        let target = Vector3::new(20.0, 20.0, 20.0); // far outside the taper
        let point = ReferenceField::point(target, v_ref).unwrap();
        prop_assert!((point.velocity(&p).unwrap().norm() - v_ref).abs() < 1e-9);
    }

    /// The thrust / angle-of-attack decomposition inverts the force pair
    /// exactly.
    #[test]
    fn physical_controls_round_trip(
        f_t in -5.0f64..5.0,
        f_n in -5.0f64..5.0,
        v in 0.0f64..4.0,
        c_drag in 0.0f64..1.0,
        c_lift in 0.0f64..1.0,
    ) {
        let model = FixedWing { c_drag, c_lift, air_density: 1.2, ..FixedWing::default() };
        let pc = model.physical_controls(f_t, f_n, v);
        let (rt, rn) = model.forces_from_physical(pc.thrust, pc.angle_of_attack, v);
        prop_assert!((rt - f_t).abs() < 1e-12);
        prop_assert!((rn - f_n).abs() < 1e-12);
    }

    /// Projection never produces an outward rate at an active bound and
    /// leaves interior components alone.
    #[test]
    fn barrier_projection_is_sound(
        u_fracs in proptest::collection::vec(0.0f64..1.0, 4),
        rates in proptest::collection::vec(-3.0f64..3.0, 4),
        limit in 0.1f64..2.0,
    ) {
        let cbox = ControlBox::symmetric(limit, 4).unwrap();
        let u = DVector::from_iterator(4, u_fracs.iter().map(|f| -limit + 2.0 * limit * f));
        let u_dot = DVector::from_vec(rates.clone());
        let out = apply_barrier(&cbox, &u, &u_dot).unwrap();
        for i in 0..4 {
            if u[i] >= limit {
                prop_assert!(out[i] <= 0.0);
            } else if u[i] <= -limit {
                prop_assert!(out[i] >= 0.0);
            } else {
                prop_assert_eq!(out[i], rates[i]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any one-cell-wide strip solves to an affine profile, for both the
    /// isotropic and the uniform-fitness problem.
    #[test]
    fn strips_solve_affine(n in 5usize..40, spacing in 0.1f64..2.0) {
        let params = SolverParams::default();

        let mut env = GridEnvironment::new_2d(n, 1, spacing).unwrap();
        env.set_class(0, CellClass::Obstacle);
        env.set_class(n - 1, CellClass::Target);
        let field = solve_laplace(env, &params).unwrap();
        for (i, v) in field.values().iter().enumerate() {
            let expected = 1.0 - i as f64 / (n - 1) as f64;
            prop_assert!((v - expected).abs() <= 10.0 * params.tolerance);
        }

        let mut env = GridEnvironment::new_2d(n, 1, spacing).unwrap();
        env.set_class(0, CellClass::Start);
        env.set_class(n - 1, CellClass::Target);
        let field = solve_weighted(env, &params).unwrap();
        for (i, v) in field.values().iter().enumerate() {
            let expected = 1.0 - i as f64 / (n - 1) as f64;
            prop_assert!((v - expected).abs() <= 10.0 * params.tolerance);
        }
    }

    /// Interior extremes stay strictly between the pinned values and no free
    /// cell undercuts its neighborhood, on randomized obstacle grids.
    #[test]
    fn min_max_principle_holds(seed in 0u64..10_000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (nx, ny) = (rng.gen_range(6..=16), rng.gen_range(6..=16));
        let env = loop {
            let mut env = GridEnvironment::new_2d(nx, ny, 1.0).unwrap();
            env.set_border_obstacles();
            for idx in 0..env.cell_count() {
                if !env.is_border(idx) && rng.gen_bool(0.15) {
                    env.set_class(idx, CellClass::Obstacle);
                }
            }
            let t = env.index(rng.gen_range(1..nx - 1), rng.gen_range(1..ny - 1), 0);
            env.set_class(t, CellClass::Target);
            if env.neighbors(t).any(|n| env.class(n) == CellClass::Free) {
                break env;
            }
        };
        let params = SolverParams::default();
        let field = solve_laplace(env, &params).unwrap();
        let report = hpfnav_core::diagnostics::field_sanity(&field, params.tolerance);
        prop_assert!(report.strict_interior);
        prop_assert_eq!(report.spurious_minima, 0);
    }
}

use criterion::{criterion_group, criterion_main, Criterion};
use hpfnav_core::controller::ControllerGains;
use hpfnav_core::guidance::{ReferenceField, ReferenceKind};
use hpfnav_core::models::{FixedWing, SphericalRedundant};
use hpfnav_core::sim::{run, CaptureRule, JointState, Scenario};
use nalgebra::{DVector, Vector3};
use std::sync::Arc;

fn fixed_wing_second() -> Scenario {
    let g = 1.5;
    let model = Arc::new(FixedWing { gravity: g, ..FixedWing::default() });
    let reference = ReferenceField::new(
        ReferenceKind::Line {
            direction: Vector3::new(1.0, 0.0, 0.0),
            anchor: Vector3::new(0.0, 2.0, 2.0),
            capture_gain: 0.3,
        },
        1.0,
    )
    .unwrap();
    let initial = JointState {
        t: 0.0,
        p: Vector3::new(0.0, 1.0, 1.0),
        lambda: Vector3::new(1.0, 0.1, 0.3),
        u: DVector::from_vec(vec![0.0, g, 0.0]),
    };
    Scenario::new(
        model,
        ControllerGains::new(2.0, 1.0).unwrap(),
        reference,
        initial,
        0.01,
        1.0,
    )
    .unwrap()
}

fn spherical_second() -> Scenario {
    let model = Arc::new(SphericalRedundant::default());
    let reference = ReferenceField::point(Vector3::new(5.0, 5.0, 5.0), 1.0).unwrap();
    let initial = JointState {
        t: 0.0,
        p: Vector3::zeros(),
        lambda: Vector3::new(0.5, 1.0, 0.5),
        u: DVector::zeros(6),
    };
    Scenario::new(
        model,
        ControllerGains::new(2.0, 1.0).unwrap(),
        reference,
        initial,
        0.01,
        1.0,
    )
    .unwrap()
    .with_capture(CaptureRule::None)
}

fn bench_integration(c: &mut Criterion) {
    c.bench_function("fixed_wing_100_steps", |b| {
        b.iter(|| run(fixed_wing_second()).unwrap())
    });
    c.bench_function("spherical_100_steps", |b| {
        b.iter(|| run(spherical_second()).unwrap())
    });
}

criterion_group!(benches, bench_integration);
criterion_main!(benches);

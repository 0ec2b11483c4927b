use batchpic_core::fields::FieldGrid;
use batchpic_core::grid::GridGeometry;
use batchpic_core::mover::PushContext;
use proptest::prelude::*;

fn geom() -> GridGeometry {
    GridGeometry::periodic([4, 4, 4], [8.0, 8.0, 8.0]).unwrap()
}

fn speed(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[test]
fn pure_magnetic_push_preserves_speed() {
    let g = geom();
    let fields = FieldGrid::uniform(&g, [0.0; 3], [0.3, -0.2, 1.1]);
    let ctx = PushContext::<f64, f64, _>::new(&g, &fields, -1.7, 0.2, 1.0, 3);
    let (mut x, mut v) = ([1.0, 2.0, 3.0], [0.05, -0.02, 0.03]);
    let s0 = speed(v);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let before = speed(v);
        (x, v) = ctx.advance(x, v).unwrap();
        worst = worst.max((speed(v) - before).abs() / (before * f64::EPSILON));
    }
    assert!(worst <= 8.0, "worst per-step change {worst} ulps");
    assert!((speed(v) - s0).abs() / s0 < 1e-10);
}

#[test]
fn gyration_angle_per_step() {
    let g = geom();
    for (qom, dt, bz) in [
        (1.0, 0.5, 1.0),
        (-1.0, 0.1, 3.0),
        (64.0, 0.25, 0.0195),
        (1.0, 4.0, 2.0),
    ] {
        let fields = FieldGrid::uniform(&g, [0.0; 3], [0.0, 0.0, bz]);
        let c = 1.0;
        let ctx = PushContext::<f64, f64, _>::new(&g, &fields, qom, dt, c, 3);
        let v0 = [0.01, 0.0, 0.004];
        let (_, v1) = ctx.advance([4.0; 3], v0).unwrap();
        let turned = (v0[0] * v1[1] - v0[1] * v1[0]).atan2(v0[0] * v1[0] + v0[1] * v1[1]);
        // Positive charges gyrate clockwise about +z.
        let want = -2.0 * (qom * dt * bz / (2.0 * c)).atan();
        assert!(
            ((turned - want) / want).abs() <= 1e-12,
            "qom {qom} dt {dt}: {turned} vs {want}"
        );
        assert_eq!(v1[2], v0[2]);
    }
}

#[test]
fn e_cross_b_drift() {
    let g = geom();
    let (c, bz, ey) = (1.0, 2.0, 0.01);
    let fields = FieldGrid::uniform(&g, [0.0, ey, 0.0], [0.0, 0.0, bz]);
    for qom in [1.0f64, -25.0] {
        let omega = qom.abs() * bz / c;
        let dt = 0.1 / omega;
        let ctx = PushContext::<f64, f64, _>::new(&g, &fields, qom, dt, c, 3);
        let angle = 2.0 * (0.5 * omega * dt).atan();
        let steps = (100.0 * 2.0 * std::f64::consts::PI / angle).round() as usize;
        let (mut x, mut v) = ([4.0; 3], [0.002, 0.001, 0.0]);
        let mut travelled = [0.0; 3];
        for _ in 0..steps {
            let (nx, nv) = ctx.advance(x, v).unwrap();
            for a in 0..3 {
                travelled[a] += 0.5 * (v[a] + nv[a]) * dt;
            }
            (x, v) = (nx, nv);
        }
        let drift = travelled[0] / (steps as f64 * dt);
        let want = c * ey / bz;
        assert!(
            ((drift - want) / want).abs() < 0.02,
            "qom {qom}: {drift} vs {want}"
        );
        assert!((travelled[1] / (steps as f64 * dt)).abs() < 0.02 * want);
    }
}

proptest! {
    #[test]
    fn magnetic_rotation_is_norm_preserving(
        v in prop::array::uniform3(-1.0..1.0f64),
        b in prop::array::uniform3(-3.0..3.0f64),
        qom in -50.0..50.0f64,
    ) {
        let g = geom();
        let fields = FieldGrid::uniform(&g, [0.0; 3], b);
        let ctx = PushContext::<f64, f64, _>::new(&g, &fields, qom, 0.1, 1.0, 3);
        let (_, v1) = ctx.mover_iterate([4.0; 3], v).unwrap();
        let s = speed(v);
        prop_assert!((speed(v1) - s).abs() <= 8.0 * f64::EPSILON * s.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn field_free_push_is_ballistic(
        x in prop::array::uniform3(0.0..8.0f64),
        v in prop::array::uniform3(-1.0..1.0f64),
    ) {
        let g = geom();
        let fields = FieldGrid::<f64>::zeros(&g);
        let ctx = PushContext::<f64, f64, _>::new(&g, &fields, 1.0, 0.5, 1.0, 3);
        let (x1, v1) = ctx.mover_iterate(x, v).unwrap();
        prop_assert_eq!(v1, v);
        for a in 0..3 {
            prop_assert_eq!(x1[a], x[a] + v[a] * 0.5);
        }
    }
}

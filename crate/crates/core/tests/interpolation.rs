use batchpic_core::fields::FieldGrid;
use batchpic_core::grid::{Boundary, GridGeometry};
use batchpic_core::mover::{gather_fields, weights};
use proptest::prelude::*;

fn box_geom() -> GridGeometry {
    GridGeometry::new(
        [7, 5, 6],
        [3.5, 2.0, 4.2],
        [-1.0, 0.5, 2.0],
        [
            Boundary::Reflecting,
            Boundary::Periodic,
            Boundary::Reflecting,
        ],
    )
    .unwrap()
}

fn position(g: &GridGeometry) -> impl Strategy<Value = [f64; 3]> {
    let (o, l) = (g.origin, g.lengths);
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
        .prop_map(move |(a, b, c)| [o[0] + a * l[0], o[1] + b * l[1], o[2] + c * l[2]])
}

/// Node values of `f(x, y, z)` for every stored node.
fn sample_nodes(g: &GridGeometry, f: impl Fn([f64; 3]) -> [f64; 6]) -> FieldGrid<f64> {
    let mut grid = FieldGrid::zeros(g);
    for n in 0..g.node_count() {
        let [i, j, k] = g.node_triple(n);
        let x = [
            g.origin[0] + i as f64 * g.spacing[0],
            g.origin[1] + j as f64 * g.spacing[1],
            g.origin[2] + k as f64 * g.spacing[2],
        ];
        let v = f(x);
        for c in 0..3 {
            grid.e[c][n] = v[c];
            grid.b[c][n] = v[c + 3];
        }
    }
    grid
}

proptest! {
    #[test]
    fn weights_partition_unity(p in position(&box_geom())) {
        let st = weights(p, &box_geom()).unwrap();
        let sum: f64 = st.w.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 4.0 * f64::EPSILON, "sum {sum}");
        prop_assert!(st.w.iter().all(|&w| (0.0..=1.0).contains(&w)));
    }

    #[test]
    fn single_precision_weights_partition_unity(p in position(&box_geom())) {
        let st = weights(p.map(|v| v as f32), &box_geom()).unwrap();
        let sum: f32 = st.w.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 4.0 * f32::EPSILON, "sum {sum}");
    }

    #[test]
    fn uniform_field_gathers_to_constant(p in position(&box_geom())) {
        let g = box_geom();
        let e = [0.3, -1.25, 7.5];
        let b = [2.0, 0.0, -0.125];
        let grid = FieldGrid::uniform(&g, e, b);
        let s = gather_fields::<f64, f64>(p, &grid, &g).unwrap();
        for c in 0..3 {
            prop_assert!((s.e[c] - e[c]).abs() <= 4.0 * f64::EPSILON * e[c].abs());
            prop_assert!((s.b[c] - b[c]).abs() <= 4.0 * f64::EPSILON * b[c].abs());
        }
    }

    #[test]
    fn linear_field_reproduced(p in position(&box_geom())) {
        let g = box_geom();
        let f = |x: [f64; 3]| {
            let a = 1.0 + 0.5 * x[0] - 0.25 * x[2];
            let b = -2.0 + 0.75 * x[0] + 0.125 * x[2];
            [a, b, a - b, 3.0, 0.5 * x[0], -x[2]]
        };
        let grid = sample_nodes(&g, f);
        let s = gather_fields::<f64, f64>(p, &grid, &g).unwrap();
        let want = f(p);
        let got = [s.e[0], s.e[1], s.e[2], s.b[0], s.b[1], s.b[2]];
        for c in 0..6 {
            let scale = want[c].abs().max(1.0);
            prop_assert!(
                (got[c] - want[c]).abs() <= 8.0 * f64::EPSILON * scale,
                "component {c}: {} vs {}", got[c], want[c]
            );
        }
    }

    #[test]
    fn mixed_gather_is_double_gather_rounded_once(p in position(&box_geom())) {
        let g = box_geom();
        let grid = sample_nodes(&g, |x| {
            [x[0].sin(), x[1].cos(), x[0] * x[2], 1.0 / (1.0 + x[1] * x[1]), x[2], 0.1]
        });
        let p32 = p.map(|v| v as f32);
        let mixed = gather_fields::<f64, f32>(p32, &grid, &g).unwrap();
        let double = gather_fields::<f64, f64>(p32.map(f64::from), &grid, &g).unwrap();
        prop_assert_eq!(mixed.e, double.e.map(|v| v as f32));
        prop_assert_eq!(mixed.b, double.b.map(|v| v as f32));
    }
}

#[test]
fn outside_positions_are_rejected() {
    let g = box_geom();
    assert!(weights([-1.5f64, 1.0, 3.0], &g).is_err());
    assert!(weights([0.0f64, 1.0, 7.0], &g).is_err());
}

#[test]
fn far_faces_are_inside() {
    let g = box_geom();
    let far = [
        g.origin[0] + g.lengths[0],
        g.origin[1] + g.lengths[1],
        g.origin[2] + g.lengths[2],
    ];
    let st = weights(far, &g).unwrap();
    let sum: f64 = st.w.iter().sum();
    assert!((sum - 1.0).abs() <= 4.0 * f64::EPSILON);
}

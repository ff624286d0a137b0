mod common;

use common::{brute_force_distance, random_graph, rng};
use graph_hjb::operators::eval_eikonal;
use graph_hjb::{path_distance, Form};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_matches_path_enumeration(seed in any::<u64>(), n in 2usize..8, q in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let (graph, boundary) = random_graph(&mut rng(seed), n, 0.3);
        let d = path_distance(&graph, &boundary, q).unwrap();
        let oracle = brute_force_distance(&graph, &boundary, q);
        for x in 0..n {
            prop_assert!((d[x] - oracle[x]).abs() <= 1e-12 * (1.0 + oracle[x]), "x={x}: {} vs {}", d[x], oracle[x]);
        }
    }

    #[test]
    fn exponent_equals_powered_weights(seed in any::<u64>(), n in 2usize..12, q in 0.2f64..3.0) {
        let (graph, boundary) = random_graph(&mut rng(seed), n, 0.4);
        let a = path_distance(&graph, &boundary, q).unwrap();
        let b = path_distance(&graph.powered(q), &boundary, 1.0).unwrap();
        for x in 0..n {
            prop_assert!((a[x] - b[x]).abs() <= 1e-12 * (1.0 + a[x]));
        }
    }

    #[test]
    fn distance_is_zero_exactly_on_boundary(seed in any::<u64>(), n in 2usize..20) {
        let (graph, boundary) = random_graph(&mut rng(seed), n, 0.2);
        let d = path_distance(&graph, &boundary, 1.0).unwrap();
        prop_assert!(d.is_finite());
        for x in 0..n {
            prop_assert_eq!(d[x] == 0.0, boundary.contains(x));
        }
    }

    #[test]
    fn eikonal_of_distance_is_one(seed in any::<u64>(), n in 2usize..30) {
        let (graph, boundary) = random_graph(&mut rng(seed), n, 0.3);
        let d = path_distance(&graph, &boundary, 1.0).unwrap();
        for x in boundary.interior() {
            let h = eval_eikonal(&graph, d.values(), x, Form::H);
            prop_assert!((h - 1.0).abs() <= 1e-12 * (1.0 + d[x]), "x={x}: {h}");
        }
    }
}

#[test]
fn unreachable_vertices_are_infinite() {
    let graph =
        graph_hjb::Graph::from_edges(4, None, &[(1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]).unwrap();
    let boundary = graph_hjb::BoundarySet::new(&[0], 4).unwrap();
    let d = path_distance(&graph, &boundary, 1.0).unwrap();
    assert_eq!(d.values(), &[0.0, 1.0, f64::INFINITY, f64::INFINITY]);
    assert!(d.to_function().is_none());
}

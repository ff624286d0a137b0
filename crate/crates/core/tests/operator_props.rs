mod common;

use common::{random_family, random_function, random_graph, rng};
use graph_hjb::operators::{eval_bellman_inf, eval_extremal, eval_pucci_j_minus};
use graph_hjb::{Form, HamiltonianSpec, MonotoneProfile, Operator, Side};
use proptest::prelude::*;
use rand::Rng;

/// One of each built-in operator over `n` vertices.
fn builtins(seed: u64, n: usize) -> Vec<Operator> {
    let mut r = rng(seed);
    let (graph, _) = random_graph(&mut r, n, 0.4);
    let (family, _) = random_family(&mut r, n, 3, 0.2);
    vec![
        Operator::Linear(family.kernel(0).clone()),
        Operator::BellmanInf(family.clone()),
        Operator::Extremal(family.clone(), Side::Minus),
        Operator::Extremal(family, Side::Plus),
        Operator::Eikonal(graph.clone(), Form::I),
        Operator::peikonal(graph.clone(), 1.0, Form::I).unwrap(),
        Operator::peikonal(graph.clone(), 2.5, Form::I).unwrap(),
        Operator::J {
            graph: graph.clone(),
            profile: MonotoneProfile::cubic(),
        },
        Operator::pucci_j_minus(graph.clone(), 0.5, 2.0).unwrap(),
        Operator::wrap_hamiltonian(HamiltonianSpec::eikonal(&graph)),
        Operator::wrap_hamiltonian(HamiltonianSpec::peikonal(&graph, 2.0)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn comparison_at_touching_point(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed ^ 0x5eed);
        for op in builtins(seed, n) {
            let v = random_function(&mut r, n, -2.0, 2.0);
            let x0 = r.gen_range(0..n);
            let u: Vec<f64> = (0..n).map(|y| if y == x0 { v[y] } else { v[y] - r.gen_range(0.0..3.0) }).collect();
            let (iu, iv) = (op.apply(&u, x0), op.apply(v.values(), x0));
            prop_assert!(iu <= iv + 1e-12 * (1.0 + iu.abs() + iv.abs()), "{}: {iu} > {iv}", op.name());
        }
    }

    #[test]
    fn constants_do_not_change_difference_operators(seed in any::<u64>(), n in 2usize..9, c in 0.0f64..5.0) {
        let mut r = rng(seed ^ 0xc0);
        for op in builtins(seed, n) {
            let u = random_function(&mut r, n, -1.0, 1.0);
            let lowered: Vec<f64> = u.values().iter().map(|v| v - c).collect();
            for x in 0..n {
                let (a, b) = (op.apply(u.values(), x), op.apply(&lowered, x));
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()) * (1.0 + c).powi(3), "{}: {a} vs {b}", op.name());
            }
        }
    }

    #[test]
    fn eikonal_types_are_homogeneous(seed in any::<u64>(), n in 2usize..9, t in 0.01f64..100.0) {
        let mut r = rng(seed);
        let (graph, _) = random_graph(&mut r, n, 0.5);
        let u = random_function(&mut r, n, -1.0, 1.0);
        let scaled: Vec<f64> = u.values().iter().map(|v| t * v).collect();
        for op in [Operator::Eikonal(graph.clone(), Form::I), Operator::peikonal(graph.clone(), 1.7, Form::I).unwrap()] {
            let q = op.homogeneity().unwrap();
            for x in 0..n {
                let (a, b) = (op.apply(&scaled, x), t.powf(q) * op.apply(u.values(), x));
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn bellman_differences_are_sandwiched(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let (family, _) = random_family(&mut r, n, 3, 0.1);
        let u = random_function(&mut r, n, -1.0, 1.0);
        let v = random_function(&mut r, n, -1.0, 1.0);
        let diff: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect();
        for x in 0..n {
            let d = eval_bellman_inf(&family, u.values(), x) - eval_bellman_inf(&family, v.values(), x);
            prop_assert!(eval_extremal(&family, &diff, x, Side::Minus) <= d + 1e-12);
            prop_assert!(d <= eval_extremal(&family, &diff, x, Side::Plus) + 1e-12);
        }
    }

    #[test]
    fn pucci_is_the_per_term_infimum(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let (graph, _) = random_graph(&mut r, n, 0.6);
        let u = random_function(&mut r, n, -1.0, 1.0);
        let (lambda, big) = (0.3, 1.7);
        for x in 0..n {
            let grid: f64 = (0..n)
                .filter(|&y| graph.weight(x, y) > 0.0)
                .map(|y| {
                    let d = u[y] - u[x];
                    (0..=200).map(|k| lambda + (big - lambda) * k as f64 / 200.0).map(|a| graph.weight(x, y) * a * d).fold(f64::INFINITY, f64::min)
                })
                .sum();
            let p = eval_pucci_j_minus(&graph, lambda, big, u.values(), x);
            prop_assert!((p - grid).abs() <= 1e-12 * (1.0 + grid.abs()));
        }
    }

    #[test]
    fn hamiltonian_presets_wrap_to_native_operators(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let (graph, _) = random_graph(&mut r, n, 0.5);
        let (family, _) = random_family(&mut r, n, 1, 0.1);
        let kernel = family.kernel(0).clone();
        let coefficients: Vec<f64> = (0..n).flat_map(|x| kernel.row(x).to_vec()).collect();
        let pairs = [
            (Operator::wrap_hamiltonian(HamiltonianSpec::eikonal(&graph)), Operator::Eikonal(graph.clone(), Form::I)),
            (Operator::wrap_hamiltonian(HamiltonianSpec::peikonal(&graph, 3.0)), Operator::peikonal(graph.clone(), 3.0, Form::I).unwrap()),
            (Operator::wrap_hamiltonian(HamiltonianSpec::linear(n, coefficients).unwrap()), Operator::Linear(kernel)),
        ];
        let u = random_function(&mut r, n, -1.0, 1.0);
        for (wrapped, native) in &pairs {
            for x in 0..n {
                let (a, b) = (wrapped.apply(u.values(), x), native.apply(u.values(), x));
                prop_assert!((a - b).abs() <= 1e-13, "{}: {a} vs {b}", native.name());
            }
        }
    }

    #[test]
    fn i_form_is_h_form_of_negation(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let (graph, _) = random_graph(&mut r, n, 0.5);
        let u = random_function(&mut r, n, -1.0, 1.0);
        let neg: Vec<f64> = u.values().iter().map(|v| -v).collect();
        for (h, i) in [
            (Operator::Eikonal(graph.clone(), Form::H), Operator::Eikonal(graph.clone(), Form::I)),
            (Operator::peikonal(graph.clone(), 2.0, Form::H).unwrap(), Operator::peikonal(graph.clone(), 2.0, Form::I).unwrap()),
        ] {
            for x in 0..n {
                prop_assert_eq!(i.apply(u.values(), x), h.apply(&neg, x));
            }
        }
    }
}

#[test]
fn nan_from_a_hamiltonian_is_an_evaluation_error() {
    let op = Operator::wrap_hamiltonian(HamiltonianSpec::new(2, |_: &[f64], _: f64, _: usize| {
        f64::NAN
    }));
    let u = graph_hjb::GraphFunction::zeros(2);
    assert!(matches!(
        op.eval(&u, 0),
        Err(graph_hjb::Error::Evaluation(_))
    ));
}

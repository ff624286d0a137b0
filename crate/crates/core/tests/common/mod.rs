//! Random instance generators and independent oracles shared by the
//! integration tests.
#![allow(dead_code)]

use graph_hjb::{BoundarySet, Graph, GraphFunction, KernelFamily, Policy, TransitionKernel};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A boundary of `1..=max(1, n/4)` vertices and, for each interior vertex, a
/// "parent" closer to the boundary. Following parents always reaches Γ.
pub struct Skeleton {
    pub n: usize,
    pub boundary: BoundarySet,
    pub parent: Vec<Option<usize>>,
}

pub fn skeleton(rng: &mut ChaCha8Rng, n: usize) -> Skeleton {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let nb = rng.gen_range(1..=(n / 4).max(1));
    let boundary = BoundarySet::new(&order[..nb], n).unwrap();
    let mut parent = vec![None; n];
    for k in nb..n {
        parent[order[k]] = Some(order[rng.gen_range(0..k)]);
    }
    Skeleton {
        n,
        boundary,
        parent,
    }
}

/// Random digraph in which every vertex reaches Γ; extra edges appear with
/// probability `density`, weights in `[0.1, 10]`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> (Graph, BoundarySet) {
    let sk = skeleton(rng, n);
    let mut edges = Vec::new();
    for x in 0..n {
        for y in 0..n {
            let tree = sk.parent[x] == Some(y);
            if x != y && (tree || rng.gen_bool(density)) {
                edges.push((x, y, rng.gen_range(0.1..10.0)));
            }
        }
    }
    (Graph::from_edges(n, None, &edges).unwrap(), sk.boundary)
}

/// Random kernel without interior self-loops whose rows put mass at least
/// `min_parent` on the skeleton parent.
pub fn random_kernel(rng: &mut ChaCha8Rng, sk: &Skeleton, min_parent: f64) -> TransitionKernel {
    let n = sk.n;
    let mut rows = Vec::with_capacity(n);
    for x in 0..n {
        let mut row = vec![0.0; n];
        for (y, r) in row.iter_mut().enumerate() {
            if y != x && rng.gen_bool(0.5) {
                *r = rng.gen_range(0.0..1.0);
            }
        }
        let mass: f64 = row.iter().sum();
        match sk.parent[x] {
            Some(p) => {
                let share = rng.gen_range(min_parent..1.0);
                if mass > 0.0 {
                    row.iter_mut().for_each(|r| *r *= (1.0 - share) / mass);
                } else {
                    row[p] = 1.0 - share;
                }
                row[p] += share;
            }
            None => {
                let y = (x + 1) % n;
                row[y] += 1.0;
            }
        }
        rows.push(row);
    }
    TransitionKernel::from_rows(&rows, true).unwrap()
}

/// A family sharing one skeleton, so every stationary policy exits.
pub fn random_family(
    rng: &mut ChaCha8Rng,
    n: usize,
    size: usize,
    min_parent: f64,
) -> (KernelFamily, BoundarySet) {
    let sk = skeleton(rng, n);
    let kernels = (0..size)
        .map(|_| random_kernel(rng, &sk, min_parent))
        .collect();
    (KernelFamily::new(kernels).unwrap(), sk.boundary)
}

pub fn random_function(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> GraphFunction {
    GraphFunction::new((0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Minimal `Σ w^{-q}` over simple paths to Γ by depth-first enumeration.
pub fn brute_force_distance(graph: &Graph, boundary: &BoundarySet, q: f64) -> Vec<f64> {
    fn go(
        graph: &Graph,
        boundary: &BoundarySet,
        q: f64,
        x: usize,
        seen: &mut Vec<bool>,
        acc: f64,
        best: &mut f64,
    ) {
        if boundary.contains(x) {
            *best = best.min(acc);
            return;
        }
        seen[x] = true;
        for y in 0..graph.n() {
            let w = graph.weight(x, y);
            if w > 0.0 && !seen[y] {
                go(graph, boundary, q, y, seen, acc + w.powf(-q), best);
            }
        }
        seen[x] = false;
    }
    (0..graph.n())
        .map(|x| {
            let mut best = f64::INFINITY;
            go(
                graph,
                boundary,
                q,
                x,
                &mut vec![false; graph.n()],
                0.0,
                &mut best,
            );
            best
        })
        .collect()
}

/// Expected running cost plus exit value through an LU solve of the
/// interior block.
pub fn linear_oracle(
    kernel: &TransitionKernel,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
) -> Option<Vec<f64>> {
    let interior = boundary.interior_vec();
    let m = interior.len();
    let a = DMatrix::from_fn(m, m, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - kernel.get(interior[i], interior[j])
    });
    let b = DVector::from_fn(m, |i, _| {
        let x = interior[i];
        f[x] + boundary
            .members()
            .iter()
            .map(|&y| kernel.get(x, y) * g[y])
            .sum::<f64>()
    });
    let sol = a.lu().solve(&b)?;
    let mut u: Vec<f64> = g.values().to_vec();
    for (i, &x) in interior.iter().enumerate() {
        u[x] = sol[i];
    }
    Some(u)
}

/// Pointwise minimum of the policy values over every stationary policy.
pub fn enumerate_policies(
    family: &KernelFamily,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
) -> Vec<f64> {
    let n = family.n();
    let interior = boundary.interior_vec();
    let a = family.len();
    let total = a.pow(interior.len() as u32);
    let mut best = vec![f64::INFINITY; n];
    for code in 0..total {
        let mut choice = vec![0; n];
        let mut c = code;
        for &x in &interior {
            choice[x] = c % a;
            c /= a;
        }
        let kernel = family
            .compose(&Policy::new(choice, family).unwrap())
            .unwrap();
        let u = linear_oracle(&kernel, f, g, boundary).expect("every policy exits");
        for x in 0..n {
            best[x] = best[x].min(u[x]);
        }
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

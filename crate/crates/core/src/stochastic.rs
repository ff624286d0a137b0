//! Markov-chain simulation and Monte Carlo estimators.
//!
//! Sample `i` of a run seeded with `s` draws from the ChaCha8 stream
//! `(s, i)`, so estimates are bit-identical regardless of how samples are
//! spread over worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::graph::{BoundarySet, GraphFunction, KernelFamily, Policy, TransitionKernel};
use crate::operators::eval_linear;

pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

/// Censored fractions above this make an estimate biased enough to flag.
pub const CENSORING_WARNING_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    /// `X_0, …, X_T`.
    pub states: Vec<usize>,
    /// Hitting time of Γ, `None` if the path was cut off at `max_steps`.
    pub exit_time: Option<usize>,
    pub seed: u64,
    pub stream: u64,
}

impl Trajectory {
    pub fn censored(&self) -> bool {
        self.exit_time.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    /// Mean over uncensored samples (NaN if every sample was censored).
    pub mean: f64,
    /// Unbiased sample standard deviation over `√(uncensored count)`.
    pub stderr: f64,
    /// Samples drawn, censored ones included.
    pub samples: usize,
    pub censored: usize,
}

impl McEstimate {
    fn from_values(values: &[Option<f64>]) -> Self {
        let kept: Vec<f64> = values.iter().flatten().copied().collect();
        let m = kept.len();
        let censored = values.len() - m;
        // Deviations from the first sample keep constant samples exact.
        let shift = kept.first().copied().unwrap_or(0.0);
        let offset = kept.iter().map(|v| v - shift).sum::<f64>() / m.max(1) as f64;
        let mean = if m == 0 { f64::NAN } else { shift + offset };
        let stderr = if m < 2 {
            0.0
        } else {
            let var = kept
                .iter()
                .map(|v| (v - shift - offset).powi(2))
                .sum::<f64>()
                / (m - 1) as f64;
            (var / m as f64).sqrt()
        };
        McEstimate {
            mean,
            stderr,
            samples: values.len(),
            censored,
        }
    }

    fn exact(value: f64, samples: usize) -> Self {
        McEstimate {
            mean: value,
            stderr: 0.0,
            samples,
            censored: 0,
        }
    }

    /// More than 1% of the samples hit `max_steps`.
    pub fn censoring_warning(&self) -> bool {
        self.censored as f64 > CENSORING_WARNING_FRACTION * self.samples as f64
    }

    /// `|mean − target| ≤ k·stderr`, requiring an uncensored run.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        self.censored == 0 && (self.mean - target).abs() <= k * self.stderr
    }
}

/// The RNG used for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Kernel rows as cumulative sums for inverse-CDF sampling.
struct Sampler {
    n: usize,
    cumulative: Vec<f64>,
    last_positive: Vec<usize>,
}

impl Sampler {
    fn new(kernel: &TransitionKernel) -> Self {
        let n = kernel.n();
        let mut cumulative = Vec::with_capacity(n * n);
        let mut last_positive = Vec::with_capacity(n);
        for x in 0..n {
            let row = kernel.row(x);
            let mut acc = 0.0;
            for &k in row {
                acc += k;
                cumulative.push(acc);
            }
            last_positive.push(row.iter().rposition(|&k| k > 0.0).unwrap_or(x));
        }
        Sampler {
            n,
            cumulative,
            last_positive,
        }
    }

    fn step(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        let r: f64 = rng.gen();
        let row = &self.cumulative[x * self.n..(x + 1) * self.n];
        match row.iter().position(|&c| r < c) {
            Some(y) if y <= self.last_positive[x] => y,
            _ => self.last_positive[x],
        }
    }

    /// Runs from `x0` until Γ or `max_steps`, calling `visit` on every
    /// `X_t` with `t < τ`. Returns the exit state, `None` if censored.
    fn run(
        &self,
        x0: usize,
        boundary: &BoundarySet,
        rng: &mut ChaCha8Rng,
        max_steps: usize,
        mut visit: impl FnMut(usize),
    ) -> Option<usize> {
        let mut x = x0;
        for _ in 0..max_steps {
            if boundary.contains(x) {
                return Some(x);
            }
            visit(x);
            x = self.step(x, rng);
        }
        boundary.contains(x).then_some(x)
    }
}

fn check_start(n: usize, boundary: &BoundarySet, x0: usize, max_steps: usize) -> Result<()> {
    if boundary.n() != n {
        return invalid(format!(
            "boundary is over {} vertices, kernel has {n}",
            boundary.n()
        ));
    }
    if x0 >= n {
        return invalid(format!("start vertex {x0} out of range for {n} vertices"));
    }
    if max_steps == 0 {
        return invalid("max_steps must be at least 1");
    }
    Ok(())
}

/// Simulates the chain from `x0` until it hits Γ or takes `max_steps` steps.
pub fn sample_path(
    kernel: &TransitionKernel,
    x0: usize,
    boundary: &BoundarySet,
    seed: u64,
    max_steps: usize,
) -> Result<Trajectory> {
    check_start(kernel.n(), boundary, x0, max_steps)?;
    let sampler = Sampler::new(kernel);
    let mut rng = sample_rng(seed, 0);
    let mut states = vec![x0];
    let mut x = x0;
    while !boundary.contains(x) && states.len() <= max_steps {
        x = sampler.step(x, &mut rng);
        states.push(x);
    }
    let exit_time = boundary.contains(x).then(|| states.len() - 1);
    Ok(Trajectory {
        states,
        exit_time,
        seed,
        stream: 0,
    })
}

fn collect_samples(
    samples: usize,
    per_sample: impl Fn(u64) -> Option<f64> + Sync + Send,
) -> McEstimate {
    let values: Vec<Option<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(per_sample)
        .collect();
    McEstimate::from_values(&values)
}

/// Monte Carlo estimate of `E_x0[Σ_{t<τ} f(X_t) + g(X_τ)]`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_exit_functional(
    kernel: &TransitionKernel,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    x0: usize,
    samples: usize,
    seed: u64,
    max_steps: usize,
) -> Result<McEstimate> {
    let n = kernel.n();
    check_start(n, boundary, x0, max_steps)?;
    f.expect_len(n, "f")?;
    g.expect_len(n, "g")?;
    if samples == 0 {
        return invalid("samples must be at least 1");
    }
    if boundary.contains(x0) {
        return Ok(McEstimate::exact(g[x0], samples));
    }
    let sampler = Sampler::new(kernel);
    Ok(collect_samples(samples, |i| {
        let mut rng = sample_rng(seed, i);
        let mut running = 0.0;
        let exit = sampler.run(x0, boundary, &mut rng, max_steps, |x| running += f[x]);
        exit.map(|y| running + g[y])
    }))
}

/// Monte Carlo estimate of `E_x0[w(X_τ) − Σ_{t<τ} L(w, X_t)] − w(x0)`,
/// which vanishes by Dynkin's formula.
#[allow(clippy::too_many_arguments)]
pub fn verify_dynkin(
    kernel: &TransitionKernel,
    w: &GraphFunction,
    boundary: &BoundarySet,
    x0: usize,
    samples: usize,
    seed: u64,
    max_steps: usize,
) -> Result<McEstimate> {
    let n = kernel.n();
    check_start(n, boundary, x0, max_steps)?;
    w.expect_len(n, "w")?;
    if samples == 0 {
        return invalid("samples must be at least 1");
    }
    if boundary.contains(x0) {
        return Ok(McEstimate::exact(0.0, samples));
    }
    let generator: Vec<f64> = (0..n).map(|x| eval_linear(kernel, w.values(), x)).collect();
    let sampler = Sampler::new(kernel);
    Ok(collect_samples(samples, |i| {
        let mut rng = sample_rng(seed, i);
        let mut drift = 0.0;
        let exit = sampler.run(x0, boundary, &mut rng, max_steps, |x| drift += generator[x]);
        exit.map(|y| w[y] - drift - w[x0])
    }))
}

/// [`estimate_exit_functional`] on the composed kernel `K^α(x,·) = K^{α(x)}(x,·)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy_mc(
    family: &KernelFamily,
    policy: &Policy,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    x0: usize,
    samples: usize,
    seed: u64,
    max_steps: usize,
) -> Result<McEstimate> {
    let kernel = family.compose(policy)?;
    estimate_exit_functional(&kernel, f, g, boundary, x0, samples, seed, max_steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn go_right(n: usize) -> TransitionKernel {
        TransitionKernel::deterministic(n, |x| (x + 1).min(n - 1)).unwrap()
    }

    #[test]
    fn path_from_boundary_is_trivial() {
        let k = TransitionKernel::chain_walk(3).unwrap();
        let b = BoundarySet::new(&[0, 2], 3).unwrap();
        let t = sample_path(&k, 0, &b, 7, 10).unwrap();
        assert_eq!(t.states, vec![0]);
        assert_eq!(t.exit_time, Some(0));
    }

    #[test]
    fn deterministic_path() {
        let b = BoundarySet::new(&[4], 5).unwrap();
        let t = sample_path(&go_right(5), 1, &b, 0, 100).unwrap();
        assert_eq!(t.states, vec![1, 2, 3, 4]);
        assert_eq!(t.exit_time, Some(3));
    }

    #[test]
    fn walk_on_three_chain_exits_in_one_step() {
        let k = TransitionKernel::chain_walk(3).unwrap();
        let b = BoundarySet::new(&[0, 2], 3).unwrap();
        for seed in 0..20 {
            let t = sample_path(&k, 1, &b, seed, 10).unwrap();
            assert_eq!(t.exit_time, Some(1));
            assert_eq!(t.states.len(), 2);
        }
    }

    #[test]
    fn censored_path_keeps_every_state() {
        let k = TransitionKernel::from_rows(
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
            ],
            false,
        )
        .unwrap();
        let b = BoundarySet::new(&[0], 3).unwrap();
        let t = sample_path(&k, 1, &b, 3, 5).unwrap();
        assert!(t.censored());
        assert_eq!(t.states, vec![1, 2, 1, 2, 1, 2]);
    }

    #[test]
    fn exit_functional_examples() {
        let k = TransitionKernel::chain_walk(3).unwrap();
        let b = BoundarySet::new(&[0, 2], 3).unwrap();
        let ones = GraphFunction::constant(3, 1.0);
        let g = GraphFunction::new(vec![0.3, 0.0, 0.7]).unwrap();
        let e = estimate_exit_functional(&k, &ones, &g, &b, 2, 50, 1, 100).unwrap();
        assert_eq!((e.mean, e.stderr), (0.7, 0.0));
        let e = estimate_exit_functional(&k, &ones, &GraphFunction::zeros(3), &b, 1, 1000, 1, 100)
            .unwrap();
        assert_eq!((e.mean, e.stderr, e.censored), (1.0, 0.0, 0));
    }

    #[test]
    fn five_chain_exit_time() {
        let k = TransitionKernel::chain_walk(5).unwrap();
        let b = BoundarySet::new(&[0, 4], 5).unwrap();
        let e = estimate_exit_functional(
            &k,
            &GraphFunction::constant(5, 1.0),
            &GraphFunction::zeros(5),
            &b,
            2,
            100_000,
            11,
            DEFAULT_MAX_STEPS,
        )
        .unwrap();
        assert!(e.agrees_with(4.0, 4.0), "{e:?}");
    }

    #[test]
    fn dynkin_deterministic_is_exact() {
        let b = BoundarySet::new(&[5], 6).unwrap();
        let w = GraphFunction::new(vec![3.0, -1.0, 4.0, 1.0, -5.0, 9.0]).unwrap();
        let d = verify_dynkin(&go_right(6), &w, &b, 0, 100, 5, 100).unwrap();
        assert_eq!((d.mean, d.stderr), (0.0, 0.0));
    }

    #[test]
    fn estimates_are_reproducible() {
        let k = TransitionKernel::chain_walk(6).unwrap();
        let b = BoundarySet::new(&[0, 5], 6).unwrap();
        let f = GraphFunction::constant(6, 1.0);
        let g = GraphFunction::zeros(6);
        let a = estimate_exit_functional(&k, &f, &g, &b, 2, 5000, 42, 1000).unwrap();
        let c = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_exit_functional(&k, &f, &g, &b, 2, 5000, 42, 1000).unwrap());
        assert_eq!(a.mean.to_bits(), c.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), c.stderr.to_bits());
    }

    #[test]
    fn censoring_is_reported() {
        let k = TransitionKernel::from_rows(
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
            ],
            false,
        )
        .unwrap();
        let b = BoundarySet::new(&[0], 3).unwrap();
        let e = estimate_exit_functional(
            &k,
            &GraphFunction::constant(3, 1.0),
            &GraphFunction::zeros(3),
            &b,
            1,
            10,
            0,
            50,
        )
        .unwrap();
        assert_eq!(e.censored, 10);
        assert!(e.mean.is_nan());
        assert!(e.censoring_warning());
    }

    #[test]
    fn policy_estimate_uses_composed_kernel() {
        let left = TransitionKernel::deterministic(5, |x| x.saturating_sub(1)).unwrap();
        let right = go_right(5);
        let fam = KernelFamily::new(vec![left, right]).unwrap();
        let policy = Policy::new(vec![0, 0, 0, 1, 1], &fam).unwrap();
        let b = BoundarySet::new(&[0, 4], 5).unwrap();
        let e = evaluate_policy_mc(
            &fam,
            &policy,
            &GraphFunction::constant(5, 1.0),
            &GraphFunction::zeros(5),
            &b,
            2,
            100,
            0,
            100,
        )
        .unwrap();
        assert_eq!(e.mean, 2.0);
    }
}

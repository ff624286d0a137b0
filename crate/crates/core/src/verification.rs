//! Randomized, seeded property checks for the structural hypotheses on
//! operators (global comparison, monotonicity in constants, differences
//! monotonicity, convexity) and for the comparison conclusion itself.
//!
//! Each check reports the worst violation normalized by `1 + ‖inputs‖∞`
//! and the first failing trial as a witness. H-form eikonal operators are
//! checked in their I-form `u ↦ H(−u)`, where the comparison property holds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::graph::{sup_norm, BoundarySet, Graph, GraphFunction};
use crate::operators::{eval_peikonal, Form, HamiltonianSpec, Operator};
use crate::stochastic::sample_rng;

pub const DEFAULT_SLACK: f64 = 1e-12;

/// Bump sizes used by [`check_bump_perturbation`].
pub const BUMP_STEPS: [f64; 3] = [1e-2, 1e-4, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub slack: f64,
    /// Random functions are drawn uniformly from `[−scale, scale]^n`.
    pub scale: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            slack: DEFAULT_SLACK,
            scale: 1.0,
        }
    }
}

/// A violating configuration: functions `u`, `v` (or gradients `p`, `q`
/// with levels `s`, `t`) and the vertex where the inequality fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub x: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub trials: usize,
    pub worst_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

struct Tally {
    slack: f64,
    trials: usize,
    worst: f64,
    witness: Option<Witness>,
}

impl Tally {
    fn new(slack: f64) -> Self {
        Tally {
            slack,
            trials: 0,
            worst: 0.0,
            witness: None,
        }
    }

    fn record(&mut self, violation: f64, witness: impl FnOnce() -> Witness) {
        let violation = if violation.is_nan() {
            f64::INFINITY
        } else {
            violation
        };
        self.worst = self.worst.max(violation);
        if violation > self.slack && self.witness.is_none() {
            self.witness = Some(witness());
        }
    }

    fn finish(self) -> CheckReport {
        CheckReport {
            passed: self.worst <= self.slack,
            trials: self.trials,
            worst_violation: self.worst,
            witness: self.witness,
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    Ok(())
}

/// Draws `v`, a vertex `x0` and a deficit `d ≥ 0` with `d(x0) = 0`, sets
/// `u = v − d` and checks `I(u, x0) ≤ I(v, x0)`.
///
/// One trial in three uses a single-vertex deficit `d = c·1_y`; the rest
/// zero each `d(y)` with probability 1/2.
pub fn check_gcp(op: &Operator, trials: usize, seed: u64) -> Result<CheckReport> {
    check_gcp_with(op, trials, seed, &CheckOptions::default())
}

pub fn check_gcp_with(
    op: &Operator,
    trials: usize,
    seed: u64,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let op = &op.to_i_form();
    let n = op.n();
    let mut tally = Tally::new(opts.slack);
    for trial in 0..trials {
        let mut rng = sample_rng(seed, trial as u64);
        let v = random_vec(&mut rng, n, opts.scale);
        let x0 = rng.gen_range(0..n);
        let mut d = vec![0.0; n];
        if rng.gen_bool(1.0 / 3.0) {
            let y = (x0 + rng.gen_range(1..n)) % n;
            d[y] = rng.gen_range(0.0..=2.0 * opts.scale);
        } else {
            for (y, dy) in d.iter_mut().enumerate() {
                if y != x0 && rng.gen_bool(0.5) {
                    *dy = rng.gen_range(0.0..=2.0 * opts.scale);
                }
            }
        }
        let u: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a - b).collect();
        let gap = op.apply(&u, x0) - op.apply(&v, x0);
        let scale = 1.0 + sup_norm(&u) + sup_norm(&v);
        tally.trials += 1;
        tally.record(gap / scale, || Witness {
            u: u.clone(),
            v: v.clone(),
            x: x0,
            levels: None,
        });
    }
    Ok(tally.finish())
}

/// Draws `u` and `c ≥ 0` and checks `I(u − c, x) ≥ I(u, x)` at every vertex.
pub fn check_constant_monotonicity(op: &Operator, trials: usize, seed: u64) -> Result<CheckReport> {
    check_constant_monotonicity_with(op, trials, seed, &CheckOptions::default())
}

pub fn check_constant_monotonicity_with(
    op: &Operator,
    trials: usize,
    seed: u64,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let op = &op.to_i_form();
    let n = op.n();
    let mut tally = Tally::new(opts.slack);
    for trial in 0..trials {
        let mut rng = sample_rng(seed, trial as u64);
        let u = random_vec(&mut rng, n, opts.scale);
        let c = rng.gen_range(0.0..=2.0 * opts.scale);
        let lowered: Vec<f64> = u.iter().map(|v| v - c).collect();
        let scale = 1.0 + sup_norm(&u) + sup_norm(&lowered);
        tally.trials += 1;
        for x in 0..n {
            let gap = op.apply(&u, x) - op.apply(&lowered, x);
            tally.record(gap / scale, || Witness {
                u: u.clone(),
                v: lowered.clone(),
                x,
                levels: None,
            });
        }
    }
    Ok(tally.finish())
}

/// Draws a vertex `x`, gradients `p ≤ q` with `p_x = q_x = 0` and levels
/// `s ≤ t`, and checks `H(p, s, x) ≤ H(q, t, x)`. The witness stores `p` in
/// `u`, `q` in `v` and `[s, t]` in `levels`.
pub fn check_differences_monotone(
    spec: &HamiltonianSpec,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_differences_monotone_with(spec, trials, seed, &CheckOptions::default())
}

pub fn check_differences_monotone_with(
    spec: &HamiltonianSpec,
    trials: usize,
    seed: u64,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let n = spec.n();
    let mut tally = Tally::new(opts.slack);
    for trial in 0..trials {
        let mut rng = sample_rng(seed, trial as u64);
        let x = rng.gen_range(0..n);
        let mut p = random_vec(&mut rng, n, opts.scale);
        p[x] = 0.0;
        let q: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(y, &py)| {
                if y == x || rng.gen_bool(0.5) {
                    py
                } else {
                    py + rng.gen_range(0.0..=opts.scale)
                }
            })
            .collect();
        let s = rng.gen_range(-opts.scale..=opts.scale);
        let t = s + if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..=opts.scale)
        };
        let gap = spec.eval(&p, s, x) - spec.eval(&q, t, x);
        let scale = 1.0 + sup_norm(&p) + sup_norm(&q) + s.abs().max(t.abs());
        tally.trials += 1;
        tally.record(gap / scale, || Witness {
            u: p.clone(),
            v: q.clone(),
            x,
            levels: Some([s, t]),
        });
    }
    Ok(tally.finish())
}

/// `(max_G (u − v)₊, max_Γ (u − v)₊)`.
pub fn comparison_sides(
    u: &GraphFunction,
    v: &GraphFunction,
    boundary: &BoundarySet,
) -> (f64, f64) {
    let pos = |x: usize| (u[x] - v[x]).max(0.0);
    let everywhere = (0..u.len()).map(pos).fold(0.0, f64::max);
    let on_boundary = boundary
        .members()
        .iter()
        .map(|&b| pos(b))
        .fold(0.0, f64::max);
    (everywhere, on_boundary)
}

/// Checks `max_G (u − v)₊ ≤ max_Γ (u − v)₊`. Establishing the premises is
/// the caller's job.
pub fn check_comparison_conclusion(
    u: &GraphFunction,
    v: &GraphFunction,
    boundary: &BoundarySet,
) -> Result<CheckReport> {
    if u.len() != v.len() || boundary.n() != u.len() {
        return invalid(format!(
            "dimension mismatch: u has {}, v has {}, boundary is over {}",
            u.len(),
            v.len(),
            boundary.n()
        ));
    }
    let (lhs, rhs) = comparison_sides(u, v, boundary);
    let mut tally = Tally::new(DEFAULT_SLACK);
    tally.trials = 1;
    let scale = 1.0 + u.sup_norm() + v.sup_norm();
    tally.record((lhs - rhs) / scale, || {
        let x = (0..u.len())
            .max_by(|&a, &b| (u[a] - v[a]).total_cmp(&(u[b] - v[b])))
            .unwrap_or(0);
        Witness {
            u: u.values().to_vec(),
            v: v.values().to_vec(),
            x,
            levels: None,
        }
    });
    Ok(tally.finish())
}

fn subsolution_defect(
    op: &Operator,
    u: &[f64],
    f: &GraphFunction,
    boundary: &BoundarySet,
) -> Option<(usize, f64)> {
    boundary
        .interior()
        .map(|x| (x, f[x] - op.apply(u, x)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Given subsolutions `u1`, `u2` of `I = f`, checks that `max(u1, u2)` is one.
pub fn check_max_subsolution(
    op: &Operator,
    u1: &GraphFunction,
    u2: &GraphFunction,
    f: &GraphFunction,
    boundary: &BoundarySet,
) -> Result<CheckReport> {
    let n = op.n();
    u1.expect_len(n, "u1")?;
    u2.expect_len(n, "u2")?;
    f.expect_len(n, "f")?;
    if boundary.n() != n {
        return invalid(format!(
            "boundary is over {} vertices, operator has {n}",
            boundary.n()
        ));
    }
    let scale = 1.0 + u1.sup_norm() + u2.sup_norm() + f.sup_norm();
    for (name, u) in [("u1", u1), ("u2", u2)] {
        if let Some((x, defect)) = subsolution_defect(op, u.values(), f, boundary) {
            if defect / scale > DEFAULT_SLACK {
                return invalid(format!(
                    "{name} is not a subsolution at vertex {x}: I falls short of f by {defect}"
                ));
            }
        }
    }
    let w: Vec<f64> = u1
        .values()
        .iter()
        .zip(u2.values())
        .map(|(a, b)| a.max(*b))
        .collect();
    let mut tally = Tally::new(DEFAULT_SLACK);
    tally.trials = 1;
    if let Some((x, defect)) = subsolution_defect(op, &w, f, boundary) {
        tally.record(defect / scale, || Witness {
            u: u1.values().to_vec(),
            v: u2.values().to_vec(),
            x,
            levels: None,
        });
    }
    Ok(tally.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// `u_k = u·(k+1)/k`, for positively homogeneous operators.
    Scale,
    /// `u_k = u − 1/k`, for operators strictly decreasing in constants.
    Shift,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub passed: bool,
    /// Smallest `I(u_k, x) − I(u, x)` over interior `x` and the tested `k`.
    pub worst_margin: f64,
    pub vertex: usize,
    pub k: u32,
}

/// Checks `I(u_k, x) > I(u, x)` strictly on the interior for every `k`.
pub fn check_strict_perturbation(
    op: &Operator,
    u: &GraphFunction,
    boundary: &BoundarySet,
    kind: Perturbation,
    ks: &[u32],
) -> Result<PerturbationReport> {
    let n = op.n();
    u.expect_len(n, "u")?;
    if ks.is_empty() || ks.contains(&0) {
        return invalid("perturbation indices must be nonempty and positive");
    }
    let base: Vec<f64> = (0..n).map(|x| op.apply(u.values(), x)).collect();
    let mut report = PerturbationReport {
        passed: true,
        worst_margin: f64::INFINITY,
        vertex: 0,
        k: ks[0],
    };
    for &k in ks {
        let kf = f64::from(k);
        let uk: Vec<f64> = match kind {
            Perturbation::Scale => u.values().iter().map(|v| v * (kf + 1.0) / kf).collect(),
            Perturbation::Shift => u.values().iter().map(|v| v - 1.0 / kf).collect(),
        };
        for x in boundary.interior() {
            let margin = op.apply(&uk, x) - base[x];
            if margin < report.worst_margin || margin.is_nan() {
                report.worst_margin = margin;
                report.vertex = x;
                report.k = k;
            }
        }
    }
    report.passed = report.worst_margin > 0.0;
    Ok(report)
}

/// Finite surrogate for the positive perturbation property: for random `u`,
/// a random vertex `x0` and `t` in [`BUMP_STEPS`], checks
/// `I(u + t·1_{x0}, x) − I(u, x) ≥ −t·c` at every vertex.
pub fn check_bump_perturbation(
    op: &Operator,
    c: f64,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let n = op.n();
    let mut tally = Tally::new(DEFAULT_SLACK);
    for trial in 0..trials {
        let mut rng = sample_rng(seed, trial as u64);
        let u = random_vec(&mut rng, n, 1.0);
        let x0 = rng.gen_range(0..n);
        let scale = 1.0 + sup_norm(&u);
        tally.trials += 1;
        for t in BUMP_STEPS {
            let mut bumped = u.clone();
            bumped[x0] += t;
            for x in 0..n {
                let drop = -(op.apply(&bumped, x) - op.apply(&u, x)) - t * c;
                tally.record(drop / scale, || Witness {
                    u: u.clone(),
                    v: bumped.clone(),
                    x,
                    levels: None,
                });
            }
        }
    }
    Ok(tally.finish())
}

/// Convexity data for `φ_i = H_p(·, x_i)` at a base point `v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexCertificate {
    pub vertex: usize,
    /// `∇φ_i(v)`.
    pub gradient: Vec<f64>,
    /// `φ_i*(∇φ_i(v)) = ∇φ_i(v)·v − φ_i(v)`.
    pub legendre_value: f64,
    /// `φ_i(u) − φ_i(v) − ∇φ_i(v)·(u − v)`.
    pub support_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexReport {
    #[serde(flatten)]
    pub report: CheckReport,
    /// Points skipped by the finite-difference comparison because an active
    /// difference sat within the kink margin.
    pub fd_skipped: usize,
    /// Worst `|Σ_y ∂_y φ_i(v)|` over all samples.
    pub gradient_sum: f64,
    #[serde(skip)]
    pub certificates: Vec<ConvexCertificate>,
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-6;
pub const ATTAINMENT_TOLERANCE: f64 = 1e-10;

/// Closed-form gradient of `u ↦ Σ_y (1/p) w(x,y)((u(x) − u(y))₊)^p`.
pub fn peikonal_gradient(graph: &Graph, p: f64, u: &[f64], x: usize) -> Vec<f64> {
    let mut grad = vec![0.0; u.len()];
    for (y, &w) in graph.row(x).iter().enumerate() {
        let d = u[x] - u[y];
        if w > 0.0 && d > 0.0 {
            let term = w * d.powf(p - 1.0);
            grad[x] += term;
            grad[y] -= term;
        }
    }
    grad
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Samples `u`, `v` from the sup-norm ball of radius `radius` and checks, at
/// every vertex, the closed-form gradient against central differences, the
/// support inequality `φ(u) ≥ φ(v) + ∇φ(v)·(u − v)`, its equality at `v = u`,
/// and the sup-of-affine lower bound `∇φ(v)·u − φ*(∇φ(v)) ≤ φ(u)`.
pub fn check_convex_representation(
    graph: &Graph,
    p: f64,
    trials: usize,
    seed: u64,
    radius: f64,
) -> Result<ConvexReport> {
    check_trials(trials)?;
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("convexity check needs p > 1, got {p}"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return invalid(format!("ball radius must be positive, got {radius}"));
    }
    let n = graph.n();
    let phi = |u: &[f64], x: usize| eval_peikonal(graph, p, u, x, Form::H);
    let kink = 1e-3 * radius;
    let mut tally = Tally::new(DEFAULT_SLACK);
    let mut fd_skipped = 0;
    let mut gradient_sum = 0.0_f64;
    let mut certificates = Vec::with_capacity(trials * n);
    for trial in 0..trials {
        let mut rng = sample_rng(seed, trial as u64);
        let u = random_vec(&mut rng, n, radius);
        let v = random_vec(&mut rng, n, radius);
        tally.trials += 1;
        let norms = 1.0 + sup_norm(&u) + sup_norm(&v);
        for x in 0..n {
            let witness = || Witness {
                u: u.clone(),
                v: v.clone(),
                x,
                levels: None,
            };
            let grad = peikonal_gradient(graph, p, &v, x);
            gradient_sum = gradient_sum.max(grad.iter().sum::<f64>().abs());
            let (phi_u, phi_v) = (phi(&u, x), phi(&v, x));
            let legendre = dot(&grad, &v) - phi_v;
            let affine = dot(&grad, &u) - legendre;
            let gap = phi_u - phi_v - (dot(&grad, &u) - dot(&grad, &v));
            let scale =
                1.0 + phi_u.abs() + phi_v.abs() + grad.iter().map(|g| g.abs()).sum::<f64>() * norms;
            tally.record(-gap / scale, witness);
            tally.record((affine - phi_u) / scale, witness);

            let grad_u = peikonal_gradient(graph, p, &u, x);
            let at_base = dot(&grad_u, &u) - (dot(&grad_u, &u) - phi_u);
            if (at_base - phi_u).abs() > ATTAINMENT_TOLERANCE * (1.0 + phi_u.abs()) {
                tally.record(f64::INFINITY, witness);
            }

            let near_kink = graph
                .row(x)
                .iter()
                .zip(&v)
                .any(|(&w, &vy)| w > 0.0 && (v[x] - vy).abs() < kink);
            if near_kink {
                fd_skipped += 1;
            } else {
                let mut probe = v.clone();
                let mut fd_error = 0.0_f64;
                for y in 0..n {
                    probe[y] = v[y] + FD_STEP;
                    let up = phi(&probe, x);
                    probe[y] = v[y] - FD_STEP;
                    let down = phi(&probe, x);
                    probe[y] = v[y];
                    fd_error = fd_error.max(((up - down) / (2.0 * FD_STEP) - grad[y]).abs());
                }
                let allowed =
                    FD_TOLERANCE * (norms + grad.iter().map(|g| g.abs()).fold(0.0, f64::max));
                if fd_error > allowed {
                    tally.record(f64::INFINITY, witness);
                }
            }
            certificates.push(ConvexCertificate {
                vertex: x,
                gradient: grad,
                legendre_value: legendre,
                support_gap: gap,
            });
        }
    }
    Ok(ConvexReport {
        report: tally.finish(),
        fd_skipped,
        gradient_sum,
        certificates,
    })
}

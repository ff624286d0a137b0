//! Deterministic solvers for `I(u, ·) = f` on `G∖Γ`, `u = g` on `Γ`.
//!
//! `f` and `g` are full-length functions; entries of `f` on Γ and of `g` off
//! Γ are ignored.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{
    label_setting, sup_norm, BoundarySet, Graph, GraphFunction, KernelFamily, Policy,
    TransitionKernel,
};
use crate::operators::{
    eval_bellman_inf, eval_eikonal, eval_linear, eval_peikonal, Form, Operator,
};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Pivots below this magnitude make the interior system singular.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Infeasible,
    Singular,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Infeasible => "infeasible",
            Status::Singular => "singular",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Solution values; may contain `+∞` or partial iterates when not converged.
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the equation residual on the interior.
    pub residual: f64,
    pub status: Status,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// The solution as a [`GraphFunction`]; fails if some entry is not finite.
    pub fn function(&self) -> Result<GraphFunction> {
        GraphFunction::new(self.solution.clone())
    }
}

fn check_data(
    n: usize,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
) -> Result<()> {
    if boundary.n() != n {
        return invalid(format!(
            "boundary is over {} vertices, problem has {n}",
            boundary.n()
        ));
    }
    f.expect_len(n, "f")?;
    g.expect_len(n, "g")
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    Ok(())
}

fn boundary_start(g: &GraphFunction, boundary: &BoundarySet, interior: f64) -> Vec<f64> {
    (0..g.len())
        .map(|x| if boundary.contains(x) { g[x] } else { interior })
        .collect()
}

/// Dense Gaussian elimination with partial pivoting. `None` when a pivot
/// falls below [`PIVOT_TOL`].
pub(crate) fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let piv =
            (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))?;
        if a[piv * m + col].abs() < PIVOT_TOL {
            return None;
        }
        if piv != col {
            for k in 0..m {
                a.swap(col * m + k, piv * m + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * m + col];
        for r in col + 1..m {
            let factor = a[r * m + col] / d;
            if factor != 0.0 {
                for k in col..m {
                    a[r * m + k] -= factor * a[col * m + k];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|k| a[r * m + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * m + r];
    }
    Some(x)
}

fn linear_residual(
    kernel: &TransitionKernel,
    u: &[f64],
    f: &GraphFunction,
    boundary: &BoundarySet,
) -> f64 {
    boundary
        .interior()
        .map(|x| (eval_linear(kernel, u, x) + f[x]).abs())
        .fold(0.0, f64::max)
}

/// Solves `L(u, ·) = −f` on the interior, `u = g` on Γ, by eliminating
/// `u(x) − Σ_{y∉Γ} K(x,y)u(y) = f(x) + Σ_{y∈Γ} K(x,y)g(y)`.
///
/// The solution is the expected running cost plus exit value of the chain.
/// A singular interior system means the exit time is not finite everywhere.
pub fn solve_linear_exit(
    kernel: &TransitionKernel,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
) -> Result<SolveReport> {
    let n = kernel.n();
    check_data(n, f, g, boundary)?;
    let interior = boundary.interior_vec();
    let m = interior.len();
    let mut pos = vec![usize::MAX; n];
    for (i, &x) in interior.iter().enumerate() {
        pos[x] = i;
    }
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (i, &x) in interior.iter().enumerate() {
        a[i * m + i] = 1.0;
        b[i] = f[x];
        for (y, &k) in kernel.row(x).iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            if boundary.contains(y) {
                b[i] += k * g[y];
            } else {
                a[i * m + pos[y]] -= k;
            }
        }
    }
    let mut solution = boundary_start(g, boundary, 0.0);
    let Some(x) = dense_solve(a, b) else {
        return Ok(SolveReport {
            solution,
            iterations: 1,
            residual: f64::INFINITY,
            status: Status::Singular,
        });
    };
    for (i, &v) in interior.iter().enumerate() {
        solution[v] = x[i];
    }
    let residual = linear_residual(kernel, &solution, f, boundary);
    Ok(SolveReport {
        solution,
        iterations: 1,
        residual,
        status: Status::Converged,
    })
}

/// Sup over the interior of `|min_i L_{K^i}(u, x) + f(x)|`.
pub fn bellman_residual(
    family: &KernelFamily,
    u: &[f64],
    f: &GraphFunction,
    boundary: &BoundarySet,
) -> f64 {
    boundary
        .interior()
        .map(|x| (eval_bellman_inf(family, u, x) + f[x]).abs())
        .fold(0.0, f64::max)
}

fn check_bellman_family(family: &KernelFamily, boundary: &BoundarySet) -> Result<()> {
    for (i, k) in family.kernels().iter().enumerate() {
        if let Some(x) = boundary.interior().find(|&x| k.get(x, x) != 0.0) {
            return invalid(format!(
                "kernel {i} has a self-loop K({x},{x}) = {} on the interior",
                k.get(x, x)
            ));
        }
    }
    Ok(())
}

/// Value iteration `u ← f + min_i K^i u` on the interior for the Bellman
/// equation `min_i L_{K^i}(u, ·) = −f`, starting from `0` inside and `g` on Γ.
pub fn value_iteration_bellman(
    family: &KernelFamily,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let n = family.n();
    check_data(n, f, g, boundary)?;
    check_tol(tol)?;
    check_bellman_family(family, boundary)?;
    let interior = boundary.interior_vec();
    let mut u = boundary_start(g, boundary, 0.0);
    let mut next = u.clone();
    for iter in 1..=max_iter {
        let mut step = 0.0_f64;
        for &x in &interior {
            let best = family
                .kernels()
                .iter()
                .map(|k| k.row(x).iter().zip(&u).map(|(kk, uy)| kk * uy).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            next[x] = f[x] + best;
            step = step.max((next[x] - u[x]).abs());
        }
        std::mem::swap(&mut u, &mut next);
        if sup_norm(&u) > 1.0 / tol {
            let residual = bellman_residual(family, &u, f, boundary);
            return Ok(SolveReport {
                solution: u,
                iterations: iter,
                residual,
                status: Status::Infeasible,
            });
        }
        if step < tol {
            let residual = bellman_residual(family, &u, f, boundary);
            if residual < 10.0 * tol {
                return Ok(SolveReport {
                    solution: u,
                    iterations: iter,
                    residual,
                    status: Status::Converged,
                });
            }
        }
    }
    let residual = bellman_residual(family, &u, f, boundary);
    Ok(SolveReport {
        solution: u,
        iterations: max_iter,
        residual,
        status: Status::MaxIter,
    })
}

/// Policy iteration: evaluate the composed kernel `K^α` exactly, then pick
/// `argmin_i Σ_y K^i(x,y)u(y)` at each interior vertex (lowest index among
/// ties) until the policy is stable.
///
/// A singular evaluation returns status `Infeasible` together with the
/// offending policy.
pub fn policy_iteration_bellman(
    family: &KernelFamily,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    tol: f64,
    max_iter: usize,
) -> Result<(SolveReport, Policy)> {
    let n = family.n();
    check_data(n, f, g, boundary)?;
    check_tol(tol)?;
    let mut policy = Policy::uniform(n, 0);
    for iter in 1..=max_iter.max(1) {
        let kernel = family.compose(&policy)?;
        let eval = solve_linear_exit(&kernel, f, g, boundary)?;
        if eval.status != Status::Converged {
            let report = SolveReport {
                status: Status::Infeasible,
                iterations: iter,
                ..eval
            };
            return Ok((report, policy));
        }
        let u = eval.solution;
        let mut choice = policy.choice().to_vec();
        for x in boundary.interior() {
            let values: Vec<f64> = family
                .kernels()
                .iter()
                .map(|k| k.row(x).iter().zip(&u).map(|(kk, uy)| kk * uy).sum())
                .collect();
            let best = values.iter().copied().fold(f64::INFINITY, f64::min);
            let slack = 1e-12 * (1.0 + best.abs());
            choice[x] = values.iter().position(|&v| v <= best + slack).unwrap_or(0);
        }
        let improved = Policy::new(choice, family)?;
        if improved == policy {
            let residual = bellman_residual(family, &u, f, boundary);
            let status = if residual <= 10.0 * tol {
                Status::Converged
            } else {
                Status::MaxIter
            };
            return Ok((
                SolveReport {
                    solution: u,
                    iterations: iter,
                    residual,
                    status,
                },
                policy,
            ));
        }
        policy = improved;
    }
    let kernel = family.compose(&policy)?;
    let eval = solve_linear_exit(&kernel, f, g, boundary)?;
    let residual = bellman_residual(family, &eval.solution, f, boundary);
    Ok((
        SolveReport {
            solution: eval.solution,
            iterations: max_iter,
            residual,
            status: Status::MaxIter,
        },
        policy,
    ))
}

fn require_positive_interior(f: &GraphFunction, boundary: &BoundarySet) -> Result<()> {
    if let Some(x) = boundary.interior().find(|&x| f[x] <= 0.0) {
        return invalid(format!(
            "f must be positive on the interior; f({x}) = {}",
            f[x]
        ));
    }
    Ok(())
}

fn negated(g: &GraphFunction) -> GraphFunction {
    GraphFunction::new(g.values().iter().map(|v| -v).collect())
        .expect("negation keeps values finite")
}

/// Runs an H-form solve and maps it to the I-form via `u ↦ −u`, `g ↦ −g`.
fn via_h_form(
    form: Form,
    g: &GraphFunction,
    solve_h: impl FnOnce(&GraphFunction) -> Result<SolveReport>,
) -> Result<SolveReport> {
    match form {
        Form::H => solve_h(g),
        Form::I => {
            let mut report = solve_h(&negated(g))?;
            report.solution.iter_mut().for_each(|v| *v = -*v);
            Ok(report)
        }
    }
}

fn eikonal_residual(graph: &Graph, u: &[f64], f: &GraphFunction, boundary: &BoundarySet) -> f64 {
    boundary
        .interior()
        .map(|x| (eval_eikonal(graph, u, x, Form::H) - f[x]).abs())
        .fold(0.0, f64::max)
}

/// Label-setting solve of the eikonal equation `H_e(u, ·) = f` (H-form) or
/// `I_e(u, ·) = f` (I-form), with `f > 0` on the interior.
///
/// In H-form `u(x) = min_y [u(y) + f(x)/w(x,y)]`, finalized in nondecreasing
/// order of value.
pub fn solve_eikonal(
    graph: &Graph,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    form: Form,
) -> Result<SolveReport> {
    let n = graph.n();
    check_data(n, f, g, boundary)?;
    require_positive_interior(f, boundary)?;
    via_h_form(form, g, |g| {
        let cost = |a: usize, b: usize| {
            let w = graph.weight(a, b);
            if w > 0.0 {
                f[a] / w
            } else {
                f64::INFINITY
            }
        };
        let solution = label_setting(n, boundary, |b| g[b], cost);
        if solution.iter().any(|v| !v.is_finite()) {
            return Ok(SolveReport {
                solution,
                iterations: 1,
                residual: f64::INFINITY,
                status: Status::Infeasible,
            });
        }
        let residual = eikonal_residual(graph, &solution, f, boundary);
        Ok(SolveReport {
            solution,
            iterations: 1,
            residual,
            status: Status::Converged,
        })
    })
}

pub(crate) enum Root {
    Found(f64),
    Unbounded,
}

/// Largest `t ≥ start` with `r(t) ≥ 0` for a nonincreasing `r` with
/// `r(start) ≥ 0`. The bracket `[start, start + 1]` doubles until `r` turns
/// negative; bisection then keeps `r(lo) ≥ 0` and stops once the bracket is
/// below `xtol` and `r(lo) ≤ ftol`, or the bracket cannot shrink.
pub(crate) fn largest_root(
    mut r: impl FnMut(f64) -> f64,
    start: f64,
    xtol: f64,
    ftol: f64,
    max_width: f64,
) -> Root {
    let mut lo = start;
    let mut r_lo = r(lo);
    let mut width = 1.0;
    let mut hi = lo + width;
    loop {
        let r_hi = r(hi);
        if r_hi < 0.0 {
            break;
        }
        lo = hi;
        r_lo = r_hi;
        width *= 2.0;
        if width > max_width {
            return Root::Unbounded;
        }
        hi = lo + width;
    }
    loop {
        if hi - lo <= xtol && r_lo <= ftol {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let r_mid = r(mid);
        if r_mid >= 0.0 {
            lo = mid;
            r_lo = r_mid;
        } else {
            hi = mid;
        }
    }
    Root::Found(lo)
}

fn peikonal_residual(
    graph: &Graph,
    p: f64,
    u: &[f64],
    f: &GraphFunction,
    boundary: &BoundarySet,
) -> f64 {
    boundary
        .interior()
        .map(|x| (eval_peikonal(graph, p, u, x, Form::H) - f[x]).abs())
        .fold(0.0, f64::max)
}

/// Exact solve of `Σ_y w_y (t − a_y)₊ = target` for positive weights.
fn piecewise_linear_root(mut pts: Vec<(f64, f64)>, target: f64) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut wsum, mut wa) = (0.0, 0.0);
    for k in 0..pts.len() {
        wsum += pts[k].1;
        wa += pts[k].1 * pts[k].0;
        let t = (target + wa) / wsum;
        if k + 1 == pts.len() || t <= pts[k + 1].0 {
            return t;
        }
    }
    unreachable!("nonempty neighbor list")
}

/// Gauss-Seidel solve of the p-eikonal equation `H_p(u, ·) = f` (or
/// `I_p(u, ·) = f` in I-form) with `f > 0` on the interior.
///
/// Each interior vertex solves `Σ_y (1/p) w(x,y)((t − u(y))₊)^p = f(x)` for
/// `t`: bisection for `p > 1`, an exact piecewise-linear solve for `p = 1`.
/// Iterates start below the solution and are nondecreasing.
#[allow(clippy::too_many_arguments)]
pub fn solve_peikonal(
    graph: &Graph,
    p: f64,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    form: Form,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let n = graph.n();
    check_data(n, f, g, boundary)?;
    check_tol(tol)?;
    if !(p >= 1.0 && p.is_finite()) {
        return invalid(format!("p-eikonal exponent must be >= 1, got {p}"));
    }
    require_positive_interior(f, boundary)?;
    let interior = boundary.interior_vec();
    if let Some(&x) = interior
        .iter()
        .find(|&&x| graph.row(x).iter().all(|&w| w == 0.0))
    {
        let solution = vec![f64::INFINITY; n];
        let _ = x;
        return Ok(SolveReport {
            solution,
            iterations: 0,
            residual: f64::INFINITY,
            status: Status::Infeasible,
        });
    }
    via_h_form(form, g, |g| {
        let floor = boundary
            .members()
            .iter()
            .map(|&b| g[b])
            .fold(f64::INFINITY, f64::min);
        let mut u = boundary_start(g, boundary, floor);
        for iter in 1..=max_iter {
            let mut change = 0.0_f64;
            for &x in &interior {
                let row = graph.row(x);
                let left = row
                    .iter()
                    .zip(&u)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(_, uy)| *uy)
                    .fold(f64::INFINITY, f64::min);
                let old = u[x];
                let new = if p == 1.0 {
                    let pts = row
                        .iter()
                        .zip(&u)
                        .filter(|(w, _)| **w > 0.0)
                        .map(|(w, uy)| (*uy, *w))
                        .collect();
                    piecewise_linear_root(pts, f[x]).max(old)
                } else {
                    let fx = f[x];
                    let residual = |t: f64| {
                        let mut acc = 0.0;
                        for (w, uy) in row.iter().zip(&u) {
                            if *w > 0.0 && t > *uy {
                                acc += w * (t - uy).powf(p);
                            }
                        }
                        fx - acc / p
                    };
                    let start = left.max(old);
                    if residual(start) < 0.0 {
                        return Err(Error::Internal(format!(
                            "p-eikonal bracket lost at vertex {x}"
                        )));
                    }
                    match largest_root(residual, start, tol / 10.0, tol / 10.0, 1.0 / tol) {
                        Root::Found(t) => t,
                        Root::Unbounded => {
                            let residual = peikonal_residual(graph, p, &u, f, boundary);
                            return Ok(SolveReport {
                                solution: u,
                                iterations: iter,
                                residual,
                                status: Status::Infeasible,
                            });
                        }
                    }
                };
                change = change.max((new - old).abs());
                u[x] = new;
            }
            if change < tol {
                let residual = peikonal_residual(graph, p, &u, f, boundary);
                if residual <= tol {
                    return Ok(SolveReport {
                        solution: u,
                        iterations: iter,
                        residual,
                        status: Status::Converged,
                    });
                }
            }
        }
        let residual = peikonal_residual(graph, p, &u, f, boundary);
        Ok(SolveReport {
            solution: u,
            iterations: max_iter,
            residual,
            status: Status::MaxIter,
        })
    })
}

fn operator_residual(op: &Operator, u: &[f64], f: &GraphFunction, boundary: &BoundarySet) -> f64 {
    boundary
        .interior()
        .map(|x| (op.apply(u, x) - f[x]).abs())
        .fold(0.0, f64::max)
}

/// Slack used when validating a Perron starting subsolution.
fn subsolution_slack(u: &[f64]) -> f64 {
    1e-12 * (1.0 + sup_norm(u))
}

/// Monotone Gauss-Seidel realization of Perron's method for `I(u, ·) = f`.
///
/// Starting from a subsolution (raised to `g` on Γ), each interior value is
/// replaced by the largest root of `t ↦ I(u with u(x)=t, x) − f(x)`. The
/// residual must be nonincreasing in `t`, which holds for every operator with
/// the global comparison property.
pub fn perron_gauss_seidel(
    op: &Operator,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    start: &GraphFunction,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    perron_gauss_seidel_observed(op, f, g, boundary, start, tol, max_iter, |_, _| {})
}

/// [`perron_gauss_seidel`] calling `observe(sweep, u)` after every sweep.
#[allow(clippy::too_many_arguments)]
pub fn perron_gauss_seidel_observed(
    op: &Operator,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    start: &GraphFunction,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<SolveReport> {
    let n = op.n();
    check_data(n, f, g, boundary)?;
    check_tol(tol)?;
    start.expect_len(n, "start")?;
    let slack = subsolution_slack(start.values());
    if let Some(&b) = boundary
        .members()
        .iter()
        .find(|&&b| start[b] > g[b] + slack)
    {
        return invalid(format!(
            "start exceeds g on the boundary at vertex {b}: {} > {}",
            start[b], g[b]
        ));
    }
    let mut u = start.values().to_vec();
    for &b in boundary.members() {
        u[b] = g[b];
    }
    for x in boundary.interior() {
        let v = op.apply(start.values(), x);
        if v.is_nan() || v < f[x] - slack {
            return invalid(format!(
                "start is not a subsolution at vertex {x}: I = {v} < f = {}",
                f[x]
            ));
        }
    }
    let interior = boundary.interior_vec();
    for sweep in 1..=max_iter {
        let mut change = 0.0_f64;
        for &x in &interior {
            let old = u[x];
            let fx = f[x];
            let mut residual = |t: f64| {
                u[x] = t;
                op.apply(&u, x) - fx
            };
            if residual(old) < 0.0 {
                u[x] = old;
                continue;
            }
            match largest_root(&mut residual, old, tol / 10.0, tol / 10.0, 1.0 / tol) {
                Root::Found(t) => {
                    change = change.max(t - old);
                    u[x] = t;
                }
                Root::Unbounded => {
                    u[x] = old;
                    let residual = operator_residual(op, &u, f, boundary);
                    return Ok(SolveReport {
                        solution: u,
                        iterations: sweep,
                        residual,
                        status: Status::Infeasible,
                    });
                }
            }
        }
        observe(sweep, &u);
        if change < tol {
            let residual = operator_residual(op, &u, f, boundary);
            if residual <= tol {
                return Ok(SolveReport {
                    solution: u,
                    iterations: sweep,
                    residual,
                    status: Status::Converged,
                });
            }
        }
    }
    let residual = operator_residual(op, &u, f, boundary);
    Ok(SolveReport {
        solution: u,
        iterations: max_iter,
        residual,
        status: Status::MaxIter,
    })
}

/// A starting subsolution for [`perron_gauss_seidel`], built from the path
/// distance (eikonal, p-eikonal in I-form) or from `φ` with `min_i L_i(φ) = 1`
/// (linear, Bellman, extremal). Other operators need a caller-supplied start.
pub fn default_subsolution(
    op: &Operator,
    f: &GraphFunction,
    g: &GraphFunction,
    boundary: &BoundarySet,
    tol: f64,
    max_iter: usize,
) -> Result<GraphFunction> {
    let n = op.n();
    check_data(n, f, g, boundary)?;
    let g_min = boundary
        .members()
        .iter()
        .map(|&b| g[b])
        .fold(f64::INFINITY, f64::min);
    let f_max = boundary
        .interior()
        .map(|x| f[x])
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    // a relative margin absorbs the rounding in the distance / φ identities
    let margin = 1.0 + 1e-9;
    let combine = |shape: &[f64], scale: f64| -> Result<GraphFunction> {
        if shape.iter().any(|v| !v.is_finite()) {
            return invalid("no finite subsolution: some vertex cannot reach the boundary");
        }
        GraphFunction::new(shape.iter().map(|v| g_min + scale * v).collect())
    };
    match op {
        Operator::Eikonal(graph, Form::I) => {
            let d = crate::graph::path_distance(graph, boundary, 1.0)?;
            combine(d.values(), -f_max * margin)
        }
        Operator::PEikonal {
            graph,
            p,
            form: Form::I,
        } => {
            let d = crate::graph::path_distance(graph, boundary, 1.0 / p)?;
            combine(d.values(), -(p * f_max).powf(1.0 / p) * margin)
        }
        Operator::Linear(kernel) => {
            let minus_one = GraphFunction::constant(n, -1.0);
            let r = solve_linear_exit(kernel, &minus_one, &GraphFunction::zeros(n), boundary)?;
            if r.status != Status::Converged {
                return invalid("no finite subsolution: the exit time is not finite");
            }
            combine(&r.solution, f_max * margin)
        }
        Operator::BellmanInf(family) | Operator::Extremal(family, _) => {
            let cert = certify_exit_time(family, boundary, tol, max_iter)?;
            if cert.status != Status::Converged {
                return invalid(format!(
                    "no finite subsolution: exit-time certificate is {}",
                    cert.status.as_str()
                ));
            }
            combine(&cert.phi, f_max * margin)
        }
        Operator::Eikonal(_, Form::H) | Operator::PEikonal { form: Form::H, .. } => {
            invalid("Perron iteration needs the I-form operator")
        }
        other => invalid(format!(
            "no default subsolution for the {} operator; supply a start",
            other.name()
        )),
    }
}

/// Solution `φ` of the minimal equation `M⁻(φ, ·) = 1`, `φ = 0` on Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitCertificate {
    pub status: Status,
    pub iterations: usize,
    /// Empty unless the status is `Converged`.
    pub phi: Vec<f64>,
    /// `−φ(x)`: the worst expected exit time over all controls.
    pub worst_expected_exit: Vec<f64>,
    /// `2·‖φ‖`, bounding `E_x τ^α` for every control; `+∞` when infeasible.
    pub bound: f64,
    /// Interior vertices some control can keep away from Γ forever.
    pub trapped: Vec<usize>,
}

/// Largest set `S` of interior vertices such that every `x ∈ S` has a kernel
/// supported in `S`. Nonempty exactly when some stationary control never
/// exits from `S`.
pub fn trapping_set(family: &KernelFamily, boundary: &BoundarySet) -> Vec<usize> {
    let n = family.n();
    let mut inside: Vec<bool> = (0..n).map(|x| !boundary.contains(x)).collect();
    loop {
        let mut changed = false;
        for x in 0..n {
            if !inside[x] {
                continue;
            }
            let stays = family.kernels().iter().any(|k| {
                k.row(x)
                    .iter()
                    .enumerate()
                    .all(|(y, &kk)| kk == 0.0 || inside[y])
            });
            if !stays {
                inside[x] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&x| inside[x]).collect()
}

/// Certifies the finite-exit-time property for the whole control family.
///
/// A nonempty [`trapping_set`] is reported as `Infeasible` immediately;
/// otherwise value iteration with running cost `−1` computes `φ`.
pub fn certify_exit_time(
    family: &KernelFamily,
    boundary: &BoundarySet,
    tol: f64,
    max_iter: usize,
) -> Result<ExitCertificate> {
    let n = family.n();
    if boundary.n() != n {
        return invalid(format!(
            "boundary is over {} vertices, family has {n}",
            boundary.n()
        ));
    }
    check_tol(tol)?;
    check_bellman_family(family, boundary)?;
    let infeasible = |iterations, trapped| ExitCertificate {
        status: Status::Infeasible,
        iterations,
        phi: Vec::new(),
        worst_expected_exit: Vec::new(),
        bound: f64::INFINITY,
        trapped,
    };
    let trapped = trapping_set(family, boundary);
    if !trapped.is_empty() {
        return Ok(infeasible(0, trapped));
    }
    let f = GraphFunction::constant(n, -1.0);
    let g = GraphFunction::zeros(n);
    let report = value_iteration_bellman(family, &f, &g, boundary, tol, max_iter)?;
    match report.status {
        Status::Converged => {
            let worst = report.solution.iter().map(|v| -v).collect();
            let bound = 2.0 * sup_norm(&report.solution);
            Ok(ExitCertificate {
                status: Status::Converged,
                iterations: report.iterations,
                phi: report.solution,
                worst_expected_exit: worst,
                bound,
                trapped: Vec::new(),
            })
        }
        Status::Infeasible => Ok(infeasible(report.iterations, Vec::new())),
        other => Ok(ExitCertificate {
            status: other,
            ..infeasible(report.iterations, Vec::new())
        }),
    }
}

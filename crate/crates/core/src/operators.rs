//! Uniform evaluation `I(u, x)` of the monotone operators on a graph.
//!
//! Operators follow the "I-form" sign convention: they are nondecreasing in
//! the neighbor values `u(y)` and nonincreasing in `u(x)`, so subsolutions
//! satisfy `I(u, ·) ≥ f`. The eikonal and p-eikonal operators additionally
//! have an H-form, related by `I(u, x) = H(−u, x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::graph::{discrete_gradient, Graph, GraphFunction, KernelFamily, TransitionKernel};

/// Which of the two eikonal-type forms to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Form {
    H,
    #[default]
    I,
}

impl std::str::FromStr for Form {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" | "H" => Ok(Form::H),
            "i" | "I" => Ok(Form::I),
            other => invalid(format!("unknown form '{other}', expected h or i")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// `L_K(u, x) = Σ_y K(x, y)(u(y) − u(x))`.
#[inline]
pub fn eval_linear(kernel: &TransitionKernel, u: &[f64], x: usize) -> f64 {
    let ux = u[x];
    kernel
        .row(x)
        .iter()
        .zip(u)
        .filter(|(k, _)| **k != 0.0)
        .map(|(k, uy)| k * (uy - ux))
        .sum()
}

/// Bellman infimum over the family together with its minimizing index
/// (lowest index on ties).
pub fn eval_bellman_inf_argmin(family: &KernelFamily, u: &[f64], x: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, k) in family.kernels().iter().enumerate() {
        let v = eval_linear(k, u, x);
        if v < best.0 {
            best = (v, i);
        }
    }
    best
}

pub fn eval_bellman_inf(family: &KernelFamily, u: &[f64], x: usize) -> f64 {
    eval_bellman_inf_argmin(family, u, x).0
}

/// Extremal operators `M⁻` (inf) and `M⁺` (sup) over the family.
pub fn eval_extremal(family: &KernelFamily, u: &[f64], x: usize, side: Side) -> f64 {
    let values = family.kernels().iter().map(|k| eval_linear(k, u, x));
    match side {
        Side::Minus => values.fold(f64::INFINITY, f64::min),
        Side::Plus => values.fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Graph eikonal operator. H-form `max_y w(x,y)(u(x) − u(y))`, I-form
/// `max_y w(x,y)(u(y) − u(x))`. The maximum runs over all of `G`, so the
/// zero-weight terms make both forms nonnegative.
pub fn eval_eikonal(graph: &Graph, u: &[f64], x: usize, form: Form) -> f64 {
    let ux = u[x];
    let sign = match form {
        Form::H => 1.0,
        Form::I => -1.0,
    };
    graph
        .row(x)
        .iter()
        .zip(u)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, uy)| w * (sign * (ux - uy)))
        .fold(0.0, f64::max)
}

/// Graph p-eikonal operator, `Σ_y (1/p) w(x,y) ((u(x) − u(y))₊)^p` in H-form
/// and the same with the differences negated in I-form.
pub fn eval_peikonal(graph: &Graph, p: f64, u: &[f64], x: usize, form: Form) -> f64 {
    let ux = u[x];
    let sign = match form {
        Form::H => 1.0,
        Form::I => -1.0,
    };
    let mut acc = 0.0;
    for (w, uy) in graph.row(x).iter().zip(u) {
        if *w > 0.0 {
            let d = sign * (ux - uy);
            if d > 0.0 {
                acc += w * d.powf(p);
            }
        }
    }
    acc / p
}

/// `J(u, x) = Σ_y w(x,y) c(u(y) − u(x))`.
pub fn eval_j(profile: &MonotoneProfile, graph: &Graph, u: &[f64], x: usize) -> f64 {
    let ux = u[x];
    graph
        .row(x)
        .iter()
        .zip(u)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, uy)| w * profile.c(uy - ux))
        .sum()
}

/// Pucci minimal operator `Σ_y w(x,y)[λ(δ)₊ + Λ(δ)₋]`, `δ = u(y) − u(x)`,
/// with `(t)₋ = min(t, 0)`.
pub fn eval_pucci_j_minus(graph: &Graph, lambda: f64, big_lambda: f64, u: &[f64], x: usize) -> f64 {
    let ux = u[x];
    graph
        .row(x)
        .iter()
        .zip(u)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, uy)| {
            let d = uy - ux;
            w * if d > 0.0 { lambda * d } else { big_lambda * d }
        })
        .sum()
}

/// A Hamiltonian `H(p, s, x)` in the gradient convention `p = ∇_G u(x)`.
pub trait Hamiltonian: Send + Sync {
    fn eval(&self, p: &[f64], s: f64, x: usize) -> f64;
}

impl<F> Hamiltonian for F
where
    F: Fn(&[f64], f64, usize) -> f64 + Send + Sync,
{
    fn eval(&self, p: &[f64], s: f64, x: usize) -> f64 {
        self(p, s, x)
    }
}

/// A user-supplied Hamiltonian on `n` vertices.
#[derive(Clone)]
pub struct HamiltonianSpec {
    n: usize,
    h: Arc<dyn Hamiltonian>,
}

impl HamiltonianSpec {
    pub fn new(n: usize, h: impl Hamiltonian + 'static) -> Self {
        Self { n, h: Arc::new(h) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, p: &[f64], s: f64, x: usize) -> f64 {
        self.h.eval(p, s, x)
    }

    /// `H(p, s, x) = max_y w(x,y) p_y`, the H-form eikonal Hamiltonian.
    pub fn eikonal(graph: &Graph) -> Self {
        let g = graph.clone();
        Self::new(graph.n(), move |p: &[f64], _s: f64, x: usize| {
            g.row(x)
                .iter()
                .zip(p)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, py)| w * py)
                .fold(0.0, f64::max)
        })
    }

    /// `H(p, s, x) = Σ_y (1/p) w(x,y) ((p_y)₊)^p`.
    pub fn peikonal(graph: &Graph, exponent: f64) -> Self {
        let g = graph.clone();
        Self::new(graph.n(), move |p: &[f64], _s: f64, x: usize| {
            g.row(x)
                .iter()
                .zip(p)
                .filter(|(w, py)| **w > 0.0 && **py > 0.0)
                .map(|(w, py)| w * py.powf(exponent))
                .sum::<f64>()
                / exponent
        })
    }

    /// `H(p, s, x) = Σ_y a(x,y) p_y`; wraps to the linear form
    /// `Σ_y a(x,y)(u(y) − u(x))`. Coefficients may be negative.
    pub fn linear(n: usize, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != n * n {
            return invalid(format!(
                "coefficient matrix has {} entries, expected {n}x{n}",
                coefficients.len()
            ));
        }
        Ok(Self::new(n, move |p: &[f64], _s: f64, x: usize| {
            coefficients[x * n..(x + 1) * n]
                .iter()
                .zip(p)
                .map(|(a, py)| a * py)
                .sum()
        }))
    }
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A continuous nondecreasing profile `c`, optionally uniformly elliptic
/// (`λ ≤ c' ≤ Λ`).
#[derive(Clone)]
pub struct MonotoneProfile {
    c: Arc<ScalarFn>,
    bounds: Option<(f64, f64)>,
}

impl MonotoneProfile {
    pub const DEFAULT_RANGE: f64 = 10.0;
    const SAMPLES: usize = 4001;
    const SLOPE_TOL: f64 = 1e-6;

    /// Validates `c` on a grid over `[-10, 10]`.
    pub fn new(
        c: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        Self::with_range(c, bounds, Self::DEFAULT_RANGE)
    }

    pub fn with_range(
        c: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bounds: Option<(f64, f64)>,
        range: f64,
    ) -> Result<Self> {
        if let Some((lo, hi)) = bounds {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return invalid(format!(
                    "ellipticity bounds must satisfy 0 < λ ≤ Λ, got ({lo}, {hi})"
                ));
            }
        }
        let step = 2.0 * range / (Self::SAMPLES - 1) as f64;
        let mut prev_t = -range;
        let mut prev = c(prev_t);
        for i in 1..Self::SAMPLES {
            let t = -range + i as f64 * step;
            let v = c(t);
            if !v.is_finite() {
                return invalid(format!("profile c({t}) is not finite"));
            }
            if v < prev {
                return invalid(format!("profile decreases between {prev_t} and {t}"));
            }
            if let Some((lo, hi)) = bounds {
                let slope = (v - prev) / (t - prev_t);
                if slope < lo - Self::SLOPE_TOL || slope > hi + Self::SLOPE_TOL {
                    return invalid(format!(
                        "profile slope {slope} near {t} outside [{lo}, {hi}]"
                    ));
                }
            }
            prev_t = t;
            prev = v;
        }
        Ok(Self {
            c: Arc::new(c),
            bounds,
        })
    }

    pub fn identity() -> Self {
        Self {
            c: Arc::new(|t| t),
            bounds: Some((1.0, 1.0)),
        }
    }

    pub fn cubic() -> Self {
        Self {
            c: Arc::new(|t| t * t * t),
            bounds: None,
        }
    }

    #[inline]
    pub fn c(&self, t: f64) -> f64 {
        (self.c)(t)
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }
}

impl fmt::Debug for MonotoneProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneProfile")
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

/// Any of the supported operators, evaluable as `I(u, x)`.
#[derive(Debug, Clone)]
pub enum Operator {
    Linear(TransitionKernel),
    BellmanInf(KernelFamily),
    Extremal(KernelFamily, Side),
    Eikonal(Graph, Form),
    PEikonal {
        graph: Graph,
        p: f64,
        form: Form,
    },
    J {
        graph: Graph,
        profile: MonotoneProfile,
    },
    PucciJMinus {
        graph: Graph,
        lambda: f64,
        big_lambda: f64,
    },
    Hamiltonian(HamiltonianSpec),
}

impl Operator {
    pub fn peikonal(graph: Graph, p: f64, form: Form) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return invalid(format!("p-eikonal exponent must be >= 1, got {p}"));
        }
        Ok(Self::PEikonal { graph, p, form })
    }

    pub fn pucci_j_minus(graph: Graph, lambda: f64, big_lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && big_lambda >= lambda && big_lambda.is_finite()) {
            return invalid(format!(
                "Pucci bounds must satisfy 0 < λ ≤ Λ, got ({lambda}, {big_lambda})"
            ));
        }
        Ok(Self::PucciJMinus {
            graph,
            lambda,
            big_lambda,
        })
    }

    /// `I(u, x) = H(−∇_G u(x), −u(x), x)`.
    pub fn wrap_hamiltonian(spec: HamiltonianSpec) -> Self {
        Self::Hamiltonian(spec)
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Linear(k) => k.n(),
            Self::BellmanInf(f) | Self::Extremal(f, _) => f.n(),
            Self::Eikonal(g, _) => g.n(),
            Self::PEikonal { graph, .. }
            | Self::J { graph, .. }
            | Self::PucciJMinus { graph, .. } => graph.n(),
            Self::Hamiltonian(h) => h.n(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear(_) => "linear",
            Self::BellmanInf(_) => "bellman",
            Self::Extremal(_, Side::Minus) => "extremal-minus",
            Self::Extremal(_, Side::Plus) => "extremal-plus",
            Self::Eikonal(..) => "eikonal",
            Self::PEikonal { .. } => "peikonal",
            Self::J { .. } => "j",
            Self::PucciJMinus { .. } => "pucci-j",
            Self::Hamiltonian(_) => "hamiltonian",
        }
    }

    /// Evaluates without dimension checks. Panics if `u` is too short.
    pub fn apply(&self, u: &[f64], x: usize) -> f64 {
        match self {
            Self::Linear(k) => eval_linear(k, u, x),
            Self::BellmanInf(f) => eval_bellman_inf(f, u, x),
            Self::Extremal(f, side) => eval_extremal(f, u, x, *side),
            Self::Eikonal(g, form) => eval_eikonal(g, u, x, *form),
            Self::PEikonal { graph, p, form } => eval_peikonal(graph, *p, u, x, *form),
            Self::J { graph, profile } => eval_j(profile, graph, u, x),
            Self::PucciJMinus {
                graph,
                lambda,
                big_lambda,
            } => eval_pucci_j_minus(graph, *lambda, *big_lambda, u, x),
            Self::Hamiltonian(h) => {
                let mut p = discrete_gradient(u, x);
                p.iter_mut().for_each(|v| *v = -*v);
                h.eval(&p, -u[x], x)
            }
        }
    }

    /// Validated evaluation; non-finite results are evaluation errors.
    pub fn eval(&self, u: &GraphFunction, x: usize) -> Result<f64> {
        u.expect_len(self.n(), "function")?;
        if x >= self.n() {
            return invalid(format!("vertex {x} out of range for {} vertices", self.n()));
        }
        let v = self.apply(u.values(), x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!(
                "{} operator returned {v} at vertex {x}",
                self.name()
            )))
        }
    }

    /// `I(u, ·)` at every vertex.
    pub fn eval_all(&self, u: &GraphFunction) -> Result<Vec<f64>> {
        (0..self.n()).map(|x| self.eval(u, x)).collect()
    }

    /// Degree `q` with `I(t·u) = t^q I(u)` for `t > 0`, when known.
    pub fn homogeneity(&self) -> Option<f64> {
        match self {
            Self::Linear(_)
            | Self::BellmanInf(_)
            | Self::Extremal(..)
            | Self::Eikonal(..)
            | Self::PucciJMinus { .. } => Some(1.0),
            Self::PEikonal { p, .. } => Some(*p),
            Self::J { .. } | Self::Hamiltonian(_) => None,
        }
    }

    /// The operator in I-form: H-form eikonal types become `u ↦ H(−u)`,
    /// everything else is returned unchanged.
    pub fn to_i_form(&self) -> Operator {
        match self {
            Self::Eikonal(g, Form::H) => Self::Eikonal(g.clone(), Form::I),
            Self::PEikonal {
                graph,
                p,
                form: Form::H,
            } => Self::PEikonal {
                graph: graph.clone(),
                p: *p,
                form: Form::I,
            },
            other => other.clone(),
        }
    }

    /// True when `I(u − c) = I(u)` for constants `c`.
    pub fn is_translation_invariant(&self) -> bool {
        !matches!(self, Self::Hamiltonian(_))
    }
}

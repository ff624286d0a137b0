//! Graphs, boundary sets, vertex functions and transition kernels.
//!
//! Weights are stored densely, row = source and column = target. A zero
//! weight means "no edge". Every operator evaluated at a vertex `x` reads the
//! weights of the edges leaving `x`, `w(x, y)`, which is also the direction in
//! which paths travel toward the boundary in [`path_distance`].

use std::ops::Index;

use crate::error::{invalid, Result};

/// Row sum tolerance for transition kernels.
pub const KERNEL_ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl Graph {
    /// Builds a graph from a dense row-major `n×n` weight matrix.
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return invalid(format!("graph needs at least 2 vertices, got {n}"));
        }
        if weights.len() != n * n {
            return invalid(format!(
                "weight matrix has {} entries, expected {n}x{n}",
                weights.len()
            ));
        }
        for x in 0..n {
            for y in 0..n {
                let w = weights[x * n + y];
                if !w.is_finite() || w < 0.0 {
                    return invalid(format!("weight w({x},{y}) = {w} must be finite and >= 0"));
                }
                if x == y && w != 0.0 {
                    return invalid(format!("self-loop weight w({x},{x}) = {w} must be 0"));
                }
            }
        }
        Ok(Self { labels, weights })
    }

    /// Builds a graph from an edge list; absent edges have weight 0.
    /// Repeated edges keep the last weight.
    pub fn from_edges(
        n: usize,
        labels: Option<Vec<String>>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let labels = match labels {
            Some(l) if l.len() != n => {
                return invalid(format!("{} labels given for {n} vertices", l.len()));
            }
            Some(l) => l,
            None => (0..n).map(|i| format!("x{}", i + 1)).collect(),
        };
        let mut weights = vec![0.0; n * n];
        for &(s, t, w) in edges {
            if s >= n || t >= n {
                return invalid(format!("edge ({s},{t}) out of range for {n} vertices"));
            }
            weights[s * n + t] = w;
        }
        Self::new(labels, weights)
    }

    /// Unit-weight path graph `x1 – x2 – … – xn`, symmetric.
    pub fn chain(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n.saturating_sub(1) {
            edges.push((i, i + 1, 1.0));
            edges.push((i + 1, i, 1.0));
        }
        Self::from_edges(n, None, &edges)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.weights[x * self.n() + y]
    }

    /// Row of outgoing weights of `x`.
    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.n();
        &self.weights[x * n..(x + 1) * n]
    }

    /// Same graph with every weight raised to `q`.
    pub fn powered(&self, q: f64) -> Self {
        let weights = self
            .weights
            .iter()
            .map(|&w| if w > 0.0 { w.powf(q) } else { 0.0 })
            .collect();
        Self {
            labels: self.labels.clone(),
            weights,
        }
    }
}

/// Nonempty proper subset Γ of the vertices, carrying Dirichlet data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySet {
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl BoundarySet {
    pub fn new(indices: &[usize], n: usize) -> Result<Self> {
        let mut members = indices.to_vec();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return invalid("boundary set must be nonempty");
        }
        if let Some(&bad) = members.iter().find(|&&i| i >= n) {
            return invalid(format!(
                "boundary index {bad} out of range for {n} vertices"
            ));
        }
        if members.len() == n {
            return invalid("boundary set must be a proper subset of the vertices");
        }
        let mut mask = vec![false; n];
        for &i in &members {
            mask[i] = true;
        }
        Ok(Self { members, mask })
    }

    pub fn n(&self) -> usize {
        self.mask.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.mask[x]
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(i, _)| i)
    }

    pub fn interior_vec(&self) -> Vec<usize> {
        self.interior().collect()
    }
}

/// Real function on the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFunction(Vec<f64>);

impl GraphFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return invalid(format!("function value at vertex {i} is not finite ({v})"));
        }
        Ok(Self(values))
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.0)
    }

    pub(crate) fn expect_len(&self, n: usize, what: &str) -> Result<()> {
        if self.len() != n {
            return invalid(format!("{what} has length {}, expected {n}", self.len()));
        }
        Ok(())
    }
}

impl Index<usize> for GraphFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Distance values in `[0, +∞]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedDistance(Vec<f64>);

impl ExtendedDistance {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|d| d.is_finite())
    }

    /// Finite distances as a function; `None` if some vertex cannot reach Γ.
    pub fn to_function(&self) -> Option<GraphFunction> {
        self.is_finite().then(|| GraphFunction(self.0.clone()))
    }
}

impl Index<usize> for ExtendedDistance {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Row-stochastic matrix `K(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n: usize,
    rows: Vec<f64>,
}

impl TransitionKernel {
    /// Validates nonnegativity and unit row sums. Rows are rescaled only when
    /// `normalize` is set.
    pub fn new(n: usize, mut rows: Vec<f64>, normalize: bool) -> Result<Self> {
        if n == 0 || rows.len() != n * n {
            return invalid(format!(
                "kernel has {} entries, expected {n}x{n}",
                rows.len()
            ));
        }
        for x in 0..n {
            let row = &mut rows[x * n..(x + 1) * n];
            if let Some((y, k)) = row
                .iter()
                .enumerate()
                .find(|(_, k)| !k.is_finite() || **k < 0.0)
            {
                return invalid(format!(
                    "kernel entry K({x},{y}) = {k} must be finite and >= 0"
                ));
            }
            let sum: f64 = row.iter().sum();
            if normalize {
                if sum <= 0.0 {
                    return invalid(format!(
                        "kernel row {x} has zero mass and cannot be normalized"
                    ));
                }
                row.iter_mut().for_each(|k| *k /= sum);
            } else if (sum - 1.0).abs() > KERNEL_ROW_TOLERANCE {
                return invalid(format!("kernel row {x} sums to {sum}, expected 1"));
            }
        }
        Ok(Self { n, rows })
    }

    pub fn from_rows(rows: &[Vec<f64>], normalize: bool) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return invalid(format!(
                "kernel row {i} has {} entries, expected {n}",
                r.len()
            ));
        }
        Self::new(n, rows.concat(), normalize)
    }

    /// Symmetric simple random walk on the unit chain; the end vertices step
    /// to their only neighbor.
    pub fn chain_walk(n: usize) -> Result<Self> {
        let mut rows = vec![0.0; n * n];
        for x in 0..n {
            match (x > 0, x + 1 < n) {
                (true, true) => {
                    rows[x * n + x - 1] = 0.5;
                    rows[x * n + x + 1] = 0.5;
                }
                (true, false) => rows[x * n + x - 1] = 1.0,
                (false, true) => rows[x * n + x + 1] = 1.0,
                (false, false) => rows[x * n + x] = 1.0,
            }
        }
        Self::new(n, rows, false)
    }

    /// Deterministic kernel sending each `x` to `target(x)`.
    pub fn deterministic(n: usize, target: impl Fn(usize) -> usize) -> Result<Self> {
        let mut rows = vec![0.0; n * n];
        for x in 0..n {
            let y = target(x);
            if y >= n {
                return invalid(format!("deterministic target {y} out of range"));
            }
            rows[x * n + y] = 1.0;
        }
        Self::new(n, rows, false)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[x * self.n + y]
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x * self.n..(x + 1) * self.n]
    }

    /// True when `K(x, x) = 0` for every `x` in `vertices`.
    pub fn has_no_self_loops_on(&self, mut vertices: impl Iterator<Item = usize>) -> bool {
        vertices.all(|x| self.get(x, x) == 0.0)
    }

    pub fn has_no_self_loops(&self) -> bool {
        self.has_no_self_loops_on(0..self.n)
    }
}

/// Nonempty indexed family `{K^i}` of kernels on the same vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    kernels: Vec<TransitionKernel>,
}

impl KernelFamily {
    pub fn new(kernels: Vec<TransitionKernel>) -> Result<Self> {
        let Some(first) = kernels.first() else {
            return invalid("kernel family must be nonempty");
        };
        let n = first.n();
        if let Some(i) = kernels.iter().position(|k| k.n() != n) {
            return invalid(format!(
                "kernel {i} has {} vertices, expected {n}",
                kernels[i].n()
            ));
        }
        Ok(Self { kernels })
    }

    pub fn singleton(kernel: TransitionKernel) -> Self {
        Self {
            kernels: vec![kernel],
        }
    }

    pub fn n(&self) -> usize {
        self.kernels[0].n()
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kernels(&self) -> &[TransitionKernel] {
        &self.kernels
    }

    pub fn kernel(&self, i: usize) -> &TransitionKernel {
        &self.kernels[i]
    }

    /// The kernel `K^α(x, ·) = K^{α(x)}(x, ·)`.
    pub fn compose(&self, policy: &Policy) -> Result<TransitionKernel> {
        policy.validate_for(self)?;
        let n = self.n();
        let mut rows = Vec::with_capacity(n * n);
        for x in 0..n {
            rows.extend_from_slice(self.kernels[policy.choice[x]].row(x));
        }
        Ok(TransitionKernel { n, rows })
    }
}

/// A stationary control `α: G → A`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    choice: Vec<usize>,
}

impl Policy {
    pub fn new(choice: Vec<usize>, family: &KernelFamily) -> Result<Self> {
        let p = Self { choice };
        p.validate_for(family)?;
        Ok(p)
    }

    pub fn uniform(n: usize, index: usize) -> Self {
        Self {
            choice: vec![index; n],
        }
    }

    pub fn choice(&self) -> &[usize] {
        &self.choice
    }

    fn validate_for(&self, family: &KernelFamily) -> Result<()> {
        if self.choice.len() != family.n() {
            return invalid(format!(
                "policy covers {} vertices, family has {}",
                self.choice.len(),
                family.n()
            ));
        }
        if let Some((x, &i)) = self
            .choice
            .iter()
            .enumerate()
            .find(|(_, &i)| i >= family.len())
        {
            return invalid(format!(
                "policy chooses kernel {i} at vertex {x}; family has {}",
                family.len()
            ));
        }
        Ok(())
    }
}

/// Minimal path cost from every vertex into Γ, where stepping along the edge
/// `a → b` costs `w(a, b)^(-exponent)` and zero-weight edges cannot be used.
///
/// Label-setting scan over the reversed edges, seeded with `d = 0` on Γ.
pub fn path_distance(
    graph: &Graph,
    boundary: &BoundarySet,
    exponent: f64,
) -> Result<ExtendedDistance> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return invalid(format!(
            "path distance exponent must be positive, got {exponent}"
        ));
    }
    let n = graph.n();
    if boundary.n() != n {
        return invalid(format!(
            "boundary is over {} vertices, graph has {n}",
            boundary.n()
        ));
    }
    let cost = |a: usize, b: usize| {
        let w = graph.weight(a, b);
        if w > 0.0 {
            1.0 / w.powf(exponent)
        } else {
            f64::INFINITY
        }
    };
    Ok(ExtendedDistance(label_setting(n, boundary, |_| 0.0, cost)))
}

/// Dense Dijkstra for `d(a) = min_b [cost(a, b) + d(b)]` with `d = seed` on Γ.
pub(crate) fn label_setting(
    n: usize,
    boundary: &BoundarySet,
    seed: impl Fn(usize) -> f64,
    cost: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    for &b in boundary.members() {
        dist[b] = seed(b);
    }
    loop {
        let next = (0..n)
            .filter(|&i| !done[i] && dist[i].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
        let Some(b) = next else { break };
        done[b] = true;
        for a in 0..n {
            if done[a] || boundary.contains(a) {
                continue;
            }
            let c = cost(a, b);
            if c.is_finite() {
                let cand = dist[b] + c;
                if cand < dist[a] {
                    dist[a] = cand;
                }
            }
        }
    }
    dist
}

/// The vector of differences `u(x) − u(x_j)`.
pub fn discrete_gradient(u: &[f64], x: usize) -> Vec<f64> {
    let ux = u[x];
    u.iter().map(|&uy| ux - uy).collect()
}

/// Indicator of `x0`.
pub fn bump(x0: usize, n: usize) -> GraphFunction {
    let mut v = vec![0.0; n];
    v[x0] = 1.0;
    GraphFunction(v)
}

//! C ABI for graph-hjb.
//!
//! Every fallible function returns a [`GhjbStatus`]; on failure the message
//! is available from [`ghjb_last_error_message`] on the same thread. Objects
//! are opaque handles released with their `_free` function. Vertex data is
//! passed as `(pointer, length)` pairs and the length must equal the vertex
//! count of the handles involved.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use graph_hjb::solvers::{self, ExitCertificate};
use graph_hjb::stochastic;
use graph_hjb::{
    io, BoundarySet, Error, Form, Graph, GraphFunction, KernelFamily, SolveReport, Status,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhjbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Evaluation = 5,
    Internal = 6,
    Panic = 7,
}

/// Outcome of an iterative solve, mirrored from the library.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhjbSolveStatus {
    Converged = 0,
    MaxIter = 1,
    Infeasible = 2,
    Singular = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhjbForm {
    I = 0,
    H = 1,
}

/// Monte Carlo estimate; `mean` is NaN when every sample was censored.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhjbMcEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub censored: usize,
}

pub struct GhjbGraph(Graph);

pub struct GhjbBoundary(BoundarySet);

pub struct GhjbFamily(KernelFamily);

pub struct GhjbReport {
    report: SolveReport,
    /// `2·‖φ‖` for certificates, NaN otherwise.
    bound: f64,
    policy: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GhjbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Validation(_) => GhjbStatus::Validation,
            Error::Parse { .. } | Error::Io { .. } => GhjbStatus::Parse,
            Error::Evaluation(_) => GhjbStatus::Evaluation,
            Error::Internal(_) => GhjbStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn guard(body: impl FnOnce() -> Outcome) -> GhjbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GhjbStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            GhjbStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GhjbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(GhjbStatus::InvalidUtf8, format!("{what} is not UTF-8: {e}")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn function(
    p: *const f64,
    len: usize,
    n: usize,
    what: &str,
) -> Result<GraphFunction, Failure> {
    if len != n {
        return Err(Failure(
            GhjbStatus::Validation,
            format!("{what} has {len} values, expected {n}"),
        ));
    }
    Ok(GraphFunction::new(slice(p, len, what)?.to_vec())?)
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn form(f: GhjbForm) -> Form {
    match f {
        GhjbForm::I => Form::I,
        GhjbForm::H => Form::H,
    }
}

fn report(report: SolveReport) -> GhjbReport {
    GhjbReport {
        report,
        bound: f64::NAN,
        policy: Vec::new(),
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ghjb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ghjb_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Parses `{"n": .., "labels": [..]?, "edges": [[source, target, weight], ..]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghjb_graph_from_json(
    json: *const c_char,
    out: *mut *mut GhjbGraph,
) -> GhjbStatus {
    guard(|| {
        let text = string(json, "json")?;
        emit(out, GhjbGraph(io::parse_graph(text, "graph")?))
    })
}

/// # Safety
/// `graph` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn ghjb_graph_n(graph: *const GhjbGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghjb_graph_free(graph: *mut GhjbGraph) {
    release(graph)
}

/// Boundary set `Γ` over `n` vertices; must be a nonempty proper subset.
///
/// # Safety
/// `indices` must point to `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ghjb_boundary_new(
    indices: *const usize,
    len: usize,
    n: usize,
    out: *mut *mut GhjbBoundary,
) -> GhjbStatus {
    guard(|| {
        let indices = slice(indices, len, "indices")?;
        emit(out, GhjbBoundary(BoundarySet::new(indices, n)?))
    })
}

/// # Safety
/// `boundary` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghjb_boundary_free(boundary: *mut GhjbBoundary) {
    release(boundary)
}

/// Parses a JSON array of row-stochastic matrices (a bare matrix is a family
/// of one). With `normalize`, rows are rescaled to sum to one.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghjb_family_from_json(
    json: *const c_char,
    normalize: bool,
    out: *mut *mut GhjbFamily,
) -> GhjbStatus {
    guard(|| {
        let text = string(json, "json")?;
        emit(
            out,
            GhjbFamily(io::parse_family(text, "family", normalize)?),
        )
    })
}

/// # Safety
/// `family` must be null or a live family handle.
#[no_mangle]
pub unsafe extern "C" fn ghjb_family_len(family: *const GhjbFamily) -> usize {
    family.as_ref().map_or(0, |f| f.0.len())
}

/// # Safety
/// `family` must be null or a live family handle.
#[no_mangle]
pub unsafe extern "C" fn ghjb_family_n(family: *const GhjbFamily) -> usize {
    family.as_ref().map_or(0, |f| f.0.n())
}

/// # Safety
/// `family` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghjb_family_free(family: *mut GhjbFamily) {
    release(family)
}

/// Writes `d(x) = min Σ w^(−exponent)` over paths to `Γ` into `out`
/// (`+∞` where `Γ` is unreachable).
///
/// # Safety
/// Handles must be live and `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn ghjb_path_distance(
    graph: *const GhjbGraph,
    boundary: *const GhjbBoundary,
    exponent: f64,
    out: *mut f64,
    len: usize,
) -> GhjbStatus {
    guard(|| {
        let graph = &handle(graph, "graph")?.0;
        let boundary = &handle(boundary, "boundary")?.0;
        let d = graph_hjb::path_distance(graph, boundary, exponent)?;
        copy_out(d.values(), out, len)
    })
}

unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Outcome {
    if len != values.len() {
        return Err(Failure(
            GhjbStatus::Validation,
            format!("buffer holds {len} values, expected {}", values.len()),
        ));
    }
    if len > 0 {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, len);
    }
    Ok(())
}

/// Eikonal equation with running cost `f > 0` on the interior and `u = g` on `Γ`.
///
/// # Safety
/// Handles must be live, `f` and `g` must point to `n` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ghjb_solve_eikonal(
    graph: *const GhjbGraph,
    f: *const f64,
    g: *const f64,
    n: usize,
    boundary: *const GhjbBoundary,
    form_: GhjbForm,
    out: *mut *mut GhjbReport,
) -> GhjbStatus {
    guard(|| {
        let graph = &handle(graph, "graph")?.0;
        let boundary = &handle(boundary, "boundary")?.0;
        let (f, g) = (
            function(f, n, graph.n(), "f")?,
            function(g, n, graph.n(), "g")?,
        );
        emit(
            out,
            report(solvers::solve_eikonal(
                graph,
                &f,
                &g,
                boundary,
                form(form_),
            )?),
        )
    })
}

/// p-eikonal equation `H_p(u, x) = f(x)` for `p ≥ 1`.
///
/// # Safety
/// Handles must be live, `f` and `g` must point to `n` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ghjb_solve_peikonal(
    graph: *const GhjbGraph,
    p: f64,
    f: *const f64,
    g: *const f64,
    n: usize,
    boundary: *const GhjbBoundary,
    form_: GhjbForm,
    tol: f64,
    max_iter: usize,
    out: *mut *mut GhjbReport,
) -> GhjbStatus {
    guard(|| {
        let graph = &handle(graph, "graph")?.0;
        let boundary = &handle(boundary, "boundary")?.0;
        let (f, g) = (
            function(f, n, graph.n(), "f")?,
            function(g, n, graph.n(), "g")?,
        );
        let r = solvers::solve_peikonal(graph, p, &f, &g, boundary, form(form_), tol, max_iter)?;
        emit(out, report(r))
    })
}

unsafe fn kernel_of(
    family: &KernelFamily,
    index: usize,
) -> Result<&graph_hjb::TransitionKernel, Failure> {
    if index >= family.len() {
        return Err(Failure(
            GhjbStatus::Validation,
            format!(
                "kernel index {index} out of range for a family of {}",
                family.len()
            ),
        ));
    }
    Ok(family.kernel(index))
}

/// Expected running cost plus exit value of kernel `kernel_index` of `family`.
///
/// # Safety
/// Handles must be live, `f` and `g` must point to `n` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ghjb_solve_linear_exit(
    family: *const GhjbFamily,
    kernel_index: usize,
    f: *const f64,
    g: *const f64,
    n: usize,
    boundary: *const GhjbBoundary,
    out: *mut *mut GhjbReport,
) -> GhjbStatus {
    guard(|| {
        let family = &handle(family, "family")?.0;
        let boundary = &handle(boundary, "boundary")?.0;
        let kernel = kernel_of(family, kernel_index)?;
        let (f, g) = (
            function(f, n, family.n(), "f")?,
            function(g, n, family.n(), "g")?,
        );
        emit(
            out,
            report(solvers::solve_linear_exit(kernel, &f, &g, boundary)?),
        )
    })
}

/// Value iteration for the minimal-cost Bellman equation.
///
/// # Safety
/// Handles must be live, `f` and `g` must point to `n` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ghjb_value_iteration(
    family: *const GhjbFamily,
    f: *const f64,
    g: *const f64,
    n: usize,
    boundary: *const GhjbBoundary,
    tol: f64,
    max_iter: usize,
    out: *mut *mut GhjbReport,
) -> GhjbStatus {
    guard(|| {
        let family = &handle(family, "family")?.0;
        let boundary = &handle(boundary, "boundary")?.0;
        let (f, g) = (
            function(f, n, family.n(), "f")?,
            function(g, n, family.n(), "g")?,
        );
        let r = solvers::value_iteration_bellman(family, &f, &g, boundary, tol, max_iter)?;
        emit(out, report(r))
    })
}

/// Policy iteration; the final policy is read with [`ghjb_report_policy`].
///
/// # Safety
/// Handles must be live, `f` and `g` must point to `n` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ghjb_policy_iteration(
    family: *const GhjbFamily,
    f: *const f64,
    g: *const f64,
    n: usize,
    boundary: *const GhjbBoundary,
    tol: f64,
    max_iter: usize,
    out: *mut *mut GhjbReport,
) -> GhjbStatus {
    guard(|| {
        let family = &handle(family, "family")?.0;
        let boundary = &handle(boundary, "boundary")?.0;
        let (f, g) = (
            function(f, n, family.n(), "f")?,
            function(g, n, family.n(), "g")?,
        );
        let (r, policy) =
            solvers::policy_iteration_bellman(family, &f, &g, boundary, tol, max_iter)?;
        let policy = policy.choice().to_vec();
        emit(
            out,
            GhjbReport {
                policy,
                ..report(r)
            },
        )
    })
}

/// Exit-time certificate: the report solution is `φ` (empty unless
/// converged) and [`ghjb_report_bound`] gives `2·‖φ‖`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ghjb_certify(
    family: *const GhjbFamily,
    boundary: *const GhjbBoundary,
    tol: f64,
    max_iter: usize,
    out: *mut *mut GhjbReport,
) -> GhjbStatus {
    guard(|| {
        let family = &handle(family, "family")?.0;
        let boundary = &handle(boundary, "boundary")?.0;
        let ExitCertificate {
            status,
            iterations,
            phi,
            bound,
            ..
        } = solvers::certify_exit_time(family, boundary, tol, max_iter)?;
        let r = SolveReport {
            solution: phi,
            iterations,
            residual: f64::NAN,
            status,
        };
        emit(out, GhjbReport { bound, ..report(r) })
    })
}

/// Monte Carlo estimate of `E[Σ_{t<τ} f(X_t) + g(X_τ)]` from `x0` under
/// kernel `kernel_index`, with per-sample streams keyed by `seed`.
///
/// # Safety
/// Handles must be live, `f` and `g` must point to `n` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ghjb_estimate_exit_functional(
    family: *const GhjbFamily,
    kernel_index: usize,
    f: *const f64,
    g: *const f64,
    n: usize,
    boundary: *const GhjbBoundary,
    x0: usize,
    samples: usize,
    seed: u64,
    max_steps: usize,
    out: *mut GhjbMcEstimate,
) -> GhjbStatus {
    guard(|| {
        let family = &handle(family, "family")?.0;
        let boundary = &handle(boundary, "boundary")?.0;
        let kernel = kernel_of(family, kernel_index)?;
        let (f, g) = (
            function(f, n, family.n(), "f")?,
            function(g, n, family.n(), "g")?,
        );
        if out.is_null() {
            return Err(null("out"));
        }
        let e = stochastic::estimate_exit_functional(
            kernel, &f, &g, boundary, x0, samples, seed, max_steps,
        )?;
        *out = GhjbMcEstimate {
            mean: e.mean,
            std_error: e.stderr,
            samples: e.samples,
            censored: e.censored,
        };
        Ok(())
    })
}

/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ghjb_report_status(report: *const GhjbReport) -> GhjbSolveStatus {
    match report.as_ref().map(|r| r.report.status) {
        Some(Status::Converged) => GhjbSolveStatus::Converged,
        Some(Status::MaxIter) => GhjbSolveStatus::MaxIter,
        Some(Status::Singular) => GhjbSolveStatus::Singular,
        Some(Status::Infeasible) | None => GhjbSolveStatus::Infeasible,
    }
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ghjb_report_iterations(report: *const GhjbReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.iterations)
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ghjb_report_residual(report: *const GhjbReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.report.residual)
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ghjb_report_bound(report: *const GhjbReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.bound)
}

/// Number of solution values (0 for an infeasible certificate).
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ghjb_report_len(report: *const GhjbReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.solution.len())
}

/// # Safety
/// `report` must be live and `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn ghjb_report_solution(
    report: *const GhjbReport,
    out: *mut f64,
    len: usize,
) -> GhjbStatus {
    guard(|| copy_out(&handle(report, "report")?.report.solution, out, len))
}

/// Kernel index chosen at each vertex by policy iteration.
///
/// # Safety
/// `report` must be live and `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn ghjb_report_policy(
    report: *const GhjbReport,
    out: *mut usize,
    len: usize,
) -> GhjbStatus {
    guard(|| {
        let policy = &handle(report, "report")?.policy;
        if policy.is_empty() {
            return Err(Failure(
                GhjbStatus::Validation,
                "report carries no policy".into(),
            ));
        }
        if len != policy.len() {
            return Err(Failure(
                GhjbStatus::Validation,
                format!("buffer holds {len} values, expected {}", policy.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(policy.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghjb_report_free(report: *mut GhjbReport) {
    release(report)
}

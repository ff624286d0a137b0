//! Batch command-line front end.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 infeasible,
//! non-converged or failed check, 4 internal error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    path_distance, BoundarySet, Graph, GraphFunction, KernelFamily, Policy, TransitionKernel,
};
use crate::io::{self, nums, Num};
use crate::operators::{Form, HamiltonianSpec, MonotoneProfile, Operator, Side};
use crate::solvers::{self, SolveReport, Status};
use crate::stochastic::{self, McEstimate};
use crate::verification::{self, CheckReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_SOLVED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "graph-hjb",
    version,
    about = "Hamilton-Jacobi-Bellman equations on finite weighted graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Path distance to the boundary (sum of w^-q along the best path)
    Distance(DistanceArgs),
    /// Solve a boundary-value problem
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Randomized structural checks
    #[command(subcommand)]
    Check(CheckCommand),
    /// Monte Carlo estimate of the expected running cost plus exit value
    Simulate(SimulateArgs),
    /// Monte Carlo estimate of the Dynkin-formula defect
    Dynkin(DynkinArgs),
    /// Certify that every control exits in finite expected time
    Certify(CertifyArgs),
}

#[derive(Subcommand, Debug)]
enum SolveCommand {
    /// L(u) = -f with a single kernel
    Linear(LinearArgs),
    /// min_i L_i(u) = -f over a kernel family
    Bellman(BellmanArgs),
    /// Eikonal equation (f > 0)
    Eikonal(EikonalArgs),
    /// p-eikonal equation (f > 0)
    Peikonal(PeikonalArgs),
    /// Monotone Perron sweeps for I(u) = f with any comparison-property operator
    Perron(PerronArgs),
}

#[derive(Subcommand, Debug)]
enum CheckCommand {
    /// Global comparison property
    Gcp(OperatorCheckArgs),
    /// Monotonicity under subtraction of constants
    Constant(OperatorCheckArgs),
    /// Differences monotonicity of a Hamiltonian
    Differences(OperatorCheckArgs),
    /// Gradient, support and sup-of-affine checks for the p-eikonal operator
    Convex(ConvexArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FormArg {
    H,
    I,
}

impl From<FormArg> for Form {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::H => Form::H,
            FormArg::I => Form::I,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Value,
    Policy,
}

#[derive(Args, Debug)]
struct Output {
    /// Output format
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
}

#[derive(Args, Debug)]
struct Data {
    /// Boundary vertices: inline JSON array or file
    #[arg(long)]
    boundary: String,
    /// Right-hand side: ones, zeros, inline JSON array, or a JSON/CSV file
    #[arg(long)]
    f: String,
    /// Boundary values (entries off the boundary are ignored); same syntax as --f
    #[arg(long)]
    g: String,
}

#[derive(Args, Debug)]
struct Iteration {
    /// Convergence tolerance
    #[arg(long, default_value_t = solvers::DEFAULT_TOL)]
    tol: f64,
    /// Iteration cap
    #[arg(long = "max-iter", default_value_t = solvers::DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct Sampling {
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of sample paths
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Steps after which a path is censored
    #[arg(long = "max-steps", default_value_t = stochastic::DEFAULT_MAX_STEPS)]
    max_steps: usize,
}

#[derive(Args, Debug)]
struct DistanceArgs {
    /// Graph file
    #[arg(long)]
    graph: PathBuf,
    /// Boundary vertices: inline JSON array or file
    #[arg(long)]
    boundary: String,
    /// Edge costs are w^-exponent
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct LinearArgs {
    /// Kernel file (one n×n matrix)
    #[arg(long)]
    kernel: PathBuf,
    /// Rescale kernel rows to sum to one
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    data: Data,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct BellmanArgs {
    /// Kernel family file
    #[arg(long)]
    family: PathBuf,
    /// Rescale kernel rows to sum to one
    #[arg(long)]
    normalize: bool,
    /// Value iteration or policy iteration
    #[arg(long, value_enum, default_value_t = Method::Value)]
    method: Method,
    #[command(flatten)]
    data: Data,
    #[command(flatten)]
    iter: Iteration,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct EikonalArgs {
    /// Graph file
    #[arg(long)]
    graph: PathBuf,
    /// Sign convention
    #[arg(long, value_enum, default_value_t = FormArg::I)]
    form: FormArg,
    #[command(flatten)]
    data: Data,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct PeikonalArgs {
    /// Graph file
    #[arg(long)]
    graph: PathBuf,
    /// Exponent p >= 1
    #[arg(long)]
    p: f64,
    /// Sign convention
    #[arg(long, value_enum, default_value_t = FormArg::I)]
    form: FormArg,
    #[command(flatten)]
    data: Data,
    #[command(flatten)]
    iter: Iteration,
    #[command(flatten)]
    out: Output,
}

/// Operator selection shared by `solve perron` and the checks. Flags fill
/// in fields missing from the `--operator` JSON.
#[derive(Args, Debug)]
struct OperatorArgs {
    /// Operator spec: inline JSON or file, e.g. {"kind": "eikonal", "graph": "g.json"}
    #[arg(long)]
    operator: String,
    /// Graph file
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Kernel file
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Kernel family file
    #[arg(long)]
    family: Option<PathBuf>,
    /// p-eikonal exponent
    #[arg(long)]
    p: Option<f64>,
    /// Lower ellipticity bound
    #[arg(long)]
    lambda: Option<f64>,
    /// Upper ellipticity bound
    #[arg(long = "Lambda")]
    big_lambda: Option<f64>,
    /// Sign convention for eikonal-type operators [default: i]
    #[arg(long, value_enum)]
    form: Option<FormArg>,
    /// Rescale kernel rows to sum to one
    #[arg(long)]
    normalize: bool,
}

#[derive(Args, Debug)]
struct PerronArgs {
    #[command(flatten)]
    op: OperatorArgs,
    #[command(flatten)]
    data: Data,
    /// Starting subsolution; built automatically for linear, bellman,
    /// extremal and I-form eikonal-type operators
    #[arg(long)]
    start: Option<String>,
    #[command(flatten)]
    iter: Iteration,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct OperatorCheckArgs {
    #[command(flatten)]
    op: OperatorArgs,
    /// Number of random trials
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct ConvexArgs {
    /// Graph file
    #[arg(long)]
    graph: PathBuf,
    /// Exponent p > 1
    #[arg(long)]
    p: f64,
    /// Number of random trials
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sup-norm radius of the sampling ball
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Kernel file
    #[arg(long, conflicts_with = "family")]
    kernel: Option<PathBuf>,
    /// Kernel family file (requires --policy)
    #[arg(long, requires = "policy")]
    family: Option<PathBuf>,
    /// Kernel index per vertex: inline JSON array or file
    #[arg(long)]
    policy: Option<String>,
    /// Rescale kernel rows to sum to one
    #[arg(long)]
    normalize: bool,
    /// Start vertex
    #[arg(long)]
    x0: usize,
    #[command(flatten)]
    data: Data,
    #[command(flatten)]
    rng: Sampling,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct DynkinArgs {
    /// Kernel file
    #[arg(long)]
    kernel: PathBuf,
    /// Rescale kernel rows to sum to one
    #[arg(long)]
    normalize: bool,
    /// Test function; same syntax as --f
    #[arg(long)]
    w: String,
    /// Boundary vertices: inline JSON array or file
    #[arg(long)]
    boundary: String,
    /// Start vertex
    #[arg(long)]
    x0: usize,
    #[command(flatten)]
    rng: Sampling,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Kernel family file
    #[arg(long)]
    family: PathBuf,
    /// Rescale kernel rows to sum to one
    #[arg(long)]
    normalize: bool,
    /// Boundary vertices: inline JSON array or file
    #[arg(long)]
    boundary: String,
    #[command(flatten)]
    iter: Iteration,
    #[command(flatten)]
    out: Output,
}

/// Parses `args` (program name first) and runs the command, writing results
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_INVALID
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Validation(_) | Error::Parse { .. } | Error::Io { .. } => EXIT_INVALID,
                Error::Evaluation(_) | Error::Internal(_) => EXIT_INTERNAL,
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Distance(a) => distance(a, out),
        Command::Solve(SolveCommand::Linear(a)) => solve_linear(a, out, err),
        Command::Solve(SolveCommand::Bellman(a)) => solve_bellman(a, out, err),
        Command::Solve(SolveCommand::Eikonal(a)) => solve_eikonal(a, out, err),
        Command::Solve(SolveCommand::Peikonal(a)) => solve_peikonal(a, out, err),
        Command::Solve(SolveCommand::Perron(a)) => solve_perron(a, out, err),
        Command::Check(c) => check(c, out),
        Command::Simulate(a) => simulate(a, out, err),
        Command::Dynkin(a) => dynkin(a, out, err),
        Command::Certify(a) => certify(a, out, err),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Internal(format!("cannot write output: {e}")))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    emit(out, &format!("{}\n", io::to_json(value)))
}

fn is_inline(arg: &str) -> bool {
    let t = arg.trim_start();
    t.starts_with('[') || t.starts_with('{')
}

fn inline_or_file(arg: &str, what: &str) -> Result<(String, String)> {
    if is_inline(arg) {
        Ok((arg.to_string(), format!("--{what}")))
    } else {
        let path = Path::new(arg);
        Ok((io::read_source(path)?, path.display().to_string()))
    }
}

fn boundary_arg(arg: &str, n: usize) -> Result<BoundarySet> {
    let (text, source) = inline_or_file(arg, "boundary")?;
    io::parse_boundary(&text, &source, n)
}

fn function_arg(arg: &str, n: usize, what: &str) -> Result<GraphFunction> {
    match arg {
        "ones" => Ok(GraphFunction::constant(n, 1.0)),
        "zeros" => Ok(GraphFunction::zeros(n)),
        _ => {
            let (text, source) = inline_or_file(arg, what)?;
            io::parse_function(&text, &source, n)
        }
    }
}

fn load_data(data: &Data, n: usize) -> Result<(GraphFunction, GraphFunction, BoundarySet)> {
    let boundary = boundary_arg(&data.boundary, n)?;
    let f = function_arg(&data.f, n, "f")?;
    let g = function_arg(&data.g, n, "g")?;
    Ok((f, g, boundary))
}

fn load_family(path: &Path, normalize: bool) -> Result<KernelFamily> {
    io::parse_family(
        &io::read_source(path)?,
        &path.display().to_string(),
        normalize,
    )
}

fn load_kernel(path: &Path, normalize: bool) -> Result<TransitionKernel> {
    io::parse_kernel(
        &io::read_source(path)?,
        &path.display().to_string(),
        normalize,
    )
}

fn status_code(status: Status) -> i32 {
    if status == Status::Converged {
        EXIT_OK
    } else {
        EXIT_NOT_SOLVED
    }
}

#[derive(Serialize)]
struct ReportOut {
    status: &'static str,
    iterations: usize,
    residual: Num,
    solution: Vec<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<Vec<usize>>,
}

fn write_report(
    report: &SolveReport,
    policy: Option<&Policy>,
    format: OutputFormat,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    match format {
        OutputFormat::Json => emit_json(
            out,
            &ReportOut {
                status: report.status.as_str(),
                iterations: report.iterations,
                residual: Num(report.residual),
                solution: nums(&report.solution),
                policy: policy.map(|p| p.choice().to_vec()),
            },
        )?,
        OutputFormat::Csv => emit(out, &io::function_csv(&report.solution))?,
    }
    if report.status != Status::Converged || format == OutputFormat::Csv {
        let _ = writeln!(
            err,
            "status={} iterations={} residual={}",
            report.status.as_str(),
            report.iterations,
            report.residual
        );
    }
    Ok(status_code(report.status))
}

fn distance(a: DistanceArgs, out: &mut dyn Write) -> Result<i32> {
    let graph = io::load_graph(&a.graph)?;
    let boundary = boundary_arg(&a.boundary, graph.n())?;
    let d = path_distance(&graph, &boundary, a.exponent)?;
    match a.out.output {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct DistanceOut<'a> {
                labels: &'a [String],
                distance: Vec<Num>,
            }
            emit_json(
                out,
                &DistanceOut {
                    labels: graph.labels(),
                    distance: nums(d.values()),
                },
            )?
        }
        OutputFormat::Csv => emit(out, &io::function_csv(d.values()))?,
    }
    Ok(EXIT_OK)
}

fn solve_linear(a: LinearArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let kernel = load_kernel(&a.kernel, a.normalize)?;
    let (f, g, boundary) = load_data(&a.data, kernel.n())?;
    let report = solvers::solve_linear_exit(&kernel, &f, &g, &boundary)?;
    write_report(&report, None, a.out.output, out, err)
}

fn solve_bellman(a: BellmanArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let family = load_family(&a.family, a.normalize)?;
    let (f, g, boundary) = load_data(&a.data, family.n())?;
    match a.method {
        Method::Value => {
            let report = solvers::value_iteration_bellman(
                &family,
                &f,
                &g,
                &boundary,
                a.iter.tol,
                a.iter.max_iter,
            )?;
            write_report(&report, None, a.out.output, out, err)
        }
        Method::Policy => {
            let (report, policy) = solvers::policy_iteration_bellman(
                &family,
                &f,
                &g,
                &boundary,
                a.iter.tol,
                a.iter.max_iter,
            )?;
            write_report(&report, Some(&policy), a.out.output, out, err)
        }
    }
}

fn solve_eikonal(a: EikonalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let graph = io::load_graph(&a.graph)?;
    let (f, g, boundary) = load_data(&a.data, graph.n())?;
    let report = solvers::solve_eikonal(&graph, &f, &g, &boundary, a.form.into())?;
    write_report(&report, None, a.out.output, out, err)
}

fn solve_peikonal(a: PeikonalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let graph = io::load_graph(&a.graph)?;
    let (f, g, boundary) = load_data(&a.data, graph.n())?;
    let report = solvers::solve_peikonal(
        &graph,
        a.p,
        &f,
        &g,
        &boundary,
        a.form.into(),
        a.iter.tol,
        a.iter.max_iter,
    )?;
    write_report(&report, None, a.out.output, out, err)
}

fn solve_perron(a: PerronArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let op = build_operator(&a.op)?;
    let n = op.n();
    let (f, g, boundary) = load_data(&a.data, n)?;
    let start = match &a.start {
        Some(s) => function_arg(s, n, "start")?,
        None => solvers::default_subsolution(&op, &f, &g, &boundary, a.iter.tol, a.iter.max_iter)?,
    };
    let report =
        solvers::perron_gauss_seidel(&op, &f, &g, &boundary, &start, a.iter.tol, a.iter.max_iter)?;
    write_report(&report, None, a.out.output, out, err)
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct OperatorSpec {
    kind: String,
    form: Option<String>,
    p: Option<f64>,
    lambda: Option<f64>,
    #[serde(rename = "Lambda")]
    big_lambda: Option<f64>,
    graph: Option<PathBuf>,
    kernel: Option<PathBuf>,
    family: Option<PathBuf>,
    /// `identity` or `cubic`, for kind `j`.
    profile: Option<String>,
    /// `eikonal`, `peikonal` or `linear`, for kind `hamiltonian`.
    hamiltonian: Option<String>,
}

fn missing(field: &str, kind: &str) -> Error {
    Error::Validation(format!(
        "operator '{kind}' needs \"{field}\" (in the operator spec or as --{field})"
    ))
}

struct OperatorInputs {
    spec: OperatorSpec,
    graph: Option<PathBuf>,
    kernel: Option<PathBuf>,
    family: Option<PathBuf>,
    normalize: bool,
}

fn operator_inputs(a: &OperatorArgs) -> Result<OperatorInputs> {
    let (text, source) = inline_or_file(&a.operator, "operator")?;
    let spec: OperatorSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: source.clone(),
        message: e.to_string(),
    })?;
    let base = if is_inline(&a.operator) {
        PathBuf::new()
    } else {
        Path::new(&a.operator)
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    };
    let resolve = |p: &Option<PathBuf>| p.as_ref().map(|p| base.join(p));
    let graph = resolve(&spec.graph).or_else(|| a.graph.clone());
    let kernel = resolve(&spec.kernel).or_else(|| a.kernel.clone());
    let family = resolve(&spec.family).or_else(|| a.family.clone());
    let mut spec = spec;
    spec.p = spec.p.or(a.p);
    spec.lambda = spec.lambda.or(a.lambda);
    spec.big_lambda = spec.big_lambda.or(a.big_lambda);
    if spec.form.is_none() {
        spec.form = a.form.map(|f| {
            if f == FormArg::H {
                "h".into()
            } else {
                "i".into()
            }
        });
    }
    Ok(OperatorInputs {
        spec,
        graph,
        kernel,
        family,
        normalize: a.normalize,
    })
}

impl OperatorInputs {
    fn form(&self) -> Result<Form> {
        self.spec.form.as_deref().unwrap_or("i").parse()
    }

    fn graph(&self) -> Result<Graph> {
        io::load_graph(
            self.graph
                .as_ref()
                .ok_or_else(|| missing("graph", &self.spec.kind))?,
        )
    }

    fn kernel(&self) -> Result<TransitionKernel> {
        load_kernel(
            self.kernel
                .as_ref()
                .ok_or_else(|| missing("kernel", &self.spec.kind))?,
            self.normalize,
        )
    }

    fn family(&self) -> Result<KernelFamily> {
        load_family(
            self.family
                .as_ref()
                .ok_or_else(|| missing("family", &self.spec.kind))?,
            self.normalize,
        )
    }

    fn p(&self) -> Result<f64> {
        self.spec.p.ok_or_else(|| missing("p", &self.spec.kind))
    }

    fn hamiltonian(&self) -> Result<HamiltonianSpec> {
        match self.spec.hamiltonian.as_deref() {
            Some("eikonal") => Ok(HamiltonianSpec::eikonal(&self.graph()?)),
            Some("peikonal") => {
                let p = self.p()?;
                if !(p >= 1.0 && p.is_finite()) {
                    return Err(Error::Validation(format!(
                        "p-eikonal exponent must be >= 1, got {p}"
                    )));
                }
                Ok(HamiltonianSpec::peikonal(&self.graph()?, p))
            }
            Some("linear") => {
                let k = self.kernel()?;
                let coefficients = (0..k.n()).flat_map(|x| k.row(x).to_vec()).collect();
                HamiltonianSpec::linear(k.n(), coefficients)
            }
            Some(other) => Err(Error::Validation(format!(
                "unknown hamiltonian '{other}', expected eikonal, peikonal or linear"
            ))),
            None => Err(missing("hamiltonian", &self.spec.kind)),
        }
    }

    fn build(&self) -> Result<Operator> {
        let kind = self.spec.kind.as_str();
        match kind {
            "linear" => Ok(Operator::Linear(self.kernel()?)),
            "bellman" => Ok(Operator::BellmanInf(self.family()?)),
            "extremal-minus" => Ok(Operator::Extremal(self.family()?, Side::Minus)),
            "extremal-plus" => Ok(Operator::Extremal(self.family()?, Side::Plus)),
            "eikonal" => Ok(Operator::Eikonal(self.graph()?, self.form()?)),
            "peikonal" => Operator::peikonal(self.graph()?, self.p()?, self.form()?),
            "j" => {
                let profile = match self.spec.profile.as_deref().unwrap_or("identity") {
                    "identity" => MonotoneProfile::identity(),
                    "cubic" => MonotoneProfile::cubic(),
                    other => {
                        return Err(Error::Validation(format!(
                            "unknown profile '{other}', expected identity or cubic"
                        )))
                    }
                };
                Ok(Operator::J {
                    graph: self.graph()?,
                    profile,
                })
            }
            "pucci-j" => Operator::pucci_j_minus(
                self.graph()?,
                self.spec.lambda.ok_or_else(|| missing("lambda", kind))?,
                self.spec
                    .big_lambda
                    .ok_or_else(|| missing("Lambda", kind))?,
            ),
            "hamiltonian" => Ok(Operator::wrap_hamiltonian(self.hamiltonian()?)),
            other => Err(Error::Validation(format!(
                "unknown operator kind '{other}', expected one of linear, bellman, extremal-minus, \
                 extremal-plus, eikonal, peikonal, j, pucci-j, hamiltonian"
            ))),
        }
    }
}

fn build_operator(a: &OperatorArgs) -> Result<Operator> {
    operator_inputs(a)?.build()
}

fn write_check(report: &CheckReport, format: OutputFormat, out: &mut dyn Write) -> Result<i32> {
    match format {
        OutputFormat::Json => emit_json(out, report)?,
        OutputFormat::Csv => emit(
            out,
            &format!(
                "passed,trials,worst_violation\n{},{},{}\n",
                report.passed, report.trials, report.worst_violation
            ),
        )?,
    }
    Ok(if report.passed {
        EXIT_OK
    } else {
        EXIT_NOT_SOLVED
    })
}

fn check(c: CheckCommand, out: &mut dyn Write) -> Result<i32> {
    match c {
        CheckCommand::Gcp(a) => {
            let op = build_operator(&a.op)?;
            write_check(
                &verification::check_gcp(&op, a.trials, a.seed)?,
                a.out.output,
                out,
            )
        }
        CheckCommand::Constant(a) => {
            let op = build_operator(&a.op)?;
            write_check(
                &verification::check_constant_monotonicity(&op, a.trials, a.seed)?,
                a.out.output,
                out,
            )
        }
        CheckCommand::Differences(a) => {
            let inputs = operator_inputs(&a.op)?;
            if inputs.spec.kind != "hamiltonian" {
                return Err(Error::Validation(format!(
                    "differences monotonicity applies to kind \"hamiltonian\", got \"{}\"",
                    inputs.spec.kind
                )));
            }
            let spec = inputs.hamiltonian()?;
            write_check(
                &verification::check_differences_monotone(&spec, a.trials, a.seed)?,
                a.out.output,
                out,
            )
        }
        CheckCommand::Convex(a) => {
            let graph = io::load_graph(&a.graph)?;
            let report =
                verification::check_convex_representation(&graph, a.p, a.trials, a.seed, a.radius)?;
            match a.out.output {
                OutputFormat::Json => {
                    emit_json(out, &report)?;
                    Ok(if report.report.passed {
                        EXIT_OK
                    } else {
                        EXIT_NOT_SOLVED
                    })
                }
                OutputFormat::Csv => write_check(&report.report, OutputFormat::Csv, out),
            }
        }
    }
}

#[derive(Serialize)]
struct EstimateOut {
    mean: Num,
    stderr: Num,
    samples: usize,
    censored: usize,
}

fn write_estimate(
    e: &McEstimate,
    format: OutputFormat,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    match format {
        OutputFormat::Json => emit_json(
            out,
            &EstimateOut {
                mean: Num(e.mean),
                stderr: Num(e.stderr),
                samples: e.samples,
                censored: e.censored,
            },
        )?,
        OutputFormat::Csv => emit(
            out,
            &format!(
                "mean,stderr,samples,censored\n{},{},{},{}\n",
                e.mean, e.stderr, e.samples, e.censored
            ),
        )?,
    }
    if e.censoring_warning() {
        let _ = writeln!(
            err,
            "warning: {} of {} samples censored; the estimate is biased",
            e.censored, e.samples
        );
    }
    Ok(EXIT_OK)
}

fn simulate(a: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let kernel = match (&a.kernel, &a.family) {
        (Some(k), None) => load_kernel(k, a.normalize)?,
        (None, Some(fam)) => {
            let family = load_family(fam, a.normalize)?;
            let (text, source) = inline_or_file(a.policy.as_deref().unwrap_or_default(), "policy")?;
            let choice: Vec<usize> = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: source,
                message: format!("expected a JSON array of indices: {e}"),
            })?;
            family.compose(&Policy::new(choice, &family)?)?
        }
        _ => {
            return Err(Error::Validation(
                "simulate needs --kernel or --family with --policy".into(),
            ))
        }
    };
    let (f, g, boundary) = load_data(&a.data, kernel.n())?;
    let e = stochastic::estimate_exit_functional(
        &kernel,
        &f,
        &g,
        &boundary,
        a.x0,
        a.rng.samples,
        a.rng.seed,
        a.rng.max_steps,
    )?;
    write_estimate(&e, a.out.output, out, err)
}

fn dynkin(a: DynkinArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let kernel = load_kernel(&a.kernel, a.normalize)?;
    let n = kernel.n();
    let w = function_arg(&a.w, n, "w")?;
    let boundary = boundary_arg(&a.boundary, n)?;
    let e = stochastic::verify_dynkin(
        &kernel,
        &w,
        &boundary,
        a.x0,
        a.rng.samples,
        a.rng.seed,
        a.rng.max_steps,
    )?;
    write_estimate(&e, a.out.output, out, err)
}

fn certify(a: CertifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let family = load_family(&a.family, a.normalize)?;
    let boundary = boundary_arg(&a.boundary, family.n())?;
    let c = solvers::certify_exit_time(&family, &boundary, a.iter.tol, a.iter.max_iter)?;
    match a.out.output {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct CertificateOut<'a> {
                status: &'static str,
                iterations: usize,
                bound: Num,
                phi: Vec<Num>,
                worst_expected_exit: Vec<Num>,
                trapped: &'a [usize],
            }
            emit_json(
                out,
                &CertificateOut {
                    status: c.status.as_str(),
                    iterations: c.iterations,
                    bound: Num(c.bound),
                    phi: nums(&c.phi),
                    worst_expected_exit: nums(&c.worst_expected_exit),
                    trapped: &c.trapped,
                },
            )?
        }
        OutputFormat::Csv => emit(out, &io::function_csv(&c.worst_expected_exit))?,
    }
    if c.status != Status::Converged {
        let _ = writeln!(err, "status={} trapped={:?}", c.status.as_str(), c.trapped);
    }
    Ok(status_code(c.status))
}

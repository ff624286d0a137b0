//! Hamilton-Jacobi-Bellman equations on finite weighted graphs.
//!
//! The crate covers the graph primitives, the nonlocal operators, the
//! deterministic solvers, Monte Carlo estimators of the matching stochastic
//! representations, and randomized property checks for the structural
//! conditions (global comparison, constant monotonicity, convexity).

pub mod cli;
pub mod error;
pub mod graph;
pub mod io;
pub mod operators;
pub mod solvers;
pub mod stochastic;
pub mod verification;

pub use error::{Error, Result};
pub use graph::{
    bump, discrete_gradient, path_distance, sup_norm, BoundarySet, ExtendedDistance, Graph,
    GraphFunction, KernelFamily, Policy, TransitionKernel,
};
pub use operators::{Form, Hamiltonian, HamiltonianSpec, MonotoneProfile, Operator, Side};
pub use solvers::{ExitCertificate, SolveReport, Status};

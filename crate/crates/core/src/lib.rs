//! BFGS with an Armijo-Wolfe log-bisection line search, plus tooling to check
//! recorded runs against non-asymptotic convergence bounds.

// `!(x >= y)` is used on purpose so NaN counts as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bfgs;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod linesearch;
pub mod objective;

pub use bfgs::{BfgsState, Form, InitScheme, InitialMatrix, Probe};
pub use driver::{
    run, IterRecord, Method, RunAbort, RunResult, RunStatus, RunTrace, SolverConfig, StepRecord,
};
pub use error::{Error, Result};
pub use linesearch::{
    backtracking, log_bisection, LineSearchResult, Trial, TrialOutcome, WolfeParams,
};
pub use objective::{Objective, Point, Problem, ProblemKind, Reference};

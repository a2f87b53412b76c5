//! Solver loops for BFGS with the log-bisection search and for the gradient-descent baseline.

use std::fmt;

use nalgebra::DMatrix;

use crate::bfgs::{BfgsState, Form, InitScheme, InitialMatrix};
use crate::error::{Error, Result};
use crate::linesearch::{backtracking, log_bisection, Trial, WolfeParams};
use crate::objective::{Objective, Point, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Bfgs,
    Gd,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Self::Bfgs => "bfgs",
            Self::Gd => "gd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bfgs" => Some(Self::Bfgs),
            "gd" => Some(Self::Gd),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub init: InitScheme,
    pub form: Form,
    pub wolfe: WolfeParams,
    pub max_iters: usize,
    /// Stop once `|g_t| <= grad_tol`.
    pub grad_tol: f64,
    /// Stop once `(f_t - f*) / (f_0 - f*) <= gap_tol`.
    pub gap_tol: f64,
    pub seed: u64,
    /// Keep `B_t` every `snapshot_stride` iterations; 0 disables snapshots.
    pub snapshot_stride: usize,
    /// Keep `x_t, g_t, d_t, s_t, y_t` on every step record.
    pub record_vectors: bool,
    pub x0: Option<Point>,
    /// Armijo parameter for the gradient-descent baseline.
    pub gd_alpha: f64,
    pub gd_shrink: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Bfgs,
            init: InitScheme::Identity,
            form: Form::Inverse,
            wolfe: WolfeParams::default(),
            max_iters: 1000,
            grad_tol: 1e-12,
            gap_tol: 1e-12,
            seed: 0,
            snapshot_stride: 0,
            record_vectors: true,
            x0: None,
            gd_alpha: 0.1,
            gd_shrink: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0 && self.gap_tol > 0.0) {
            return Err(Error::Config("stopping tolerances must be positive".into()));
        }
        if self.method == Method::Bfgs {
            self.wolfe.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    ConvergedGrad,
    ConvergedGap,
    MaxIters,
    Aborted,
}

impl RunStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::ConvergedGrad => "converged_grad",
            Self::ConvergedGap => "converged_gap",
            Self::MaxIters => "max_iters",
            Self::Aborted => "aborted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "converged_grad" => Some(Self::ConvergedGrad),
            "converged_gap" => Some(Self::ConvergedGap),
            "max_iters" => Some(Self::MaxIters),
            "aborted" => Some(Self::Aborted),
            _ => None,
        }
    }

    pub fn converged(self) -> bool {
        matches!(self, Self::ConvergedGrad | Self::ConvergedGap)
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepVectors {
    pub x: Point,
    pub g: Point,
    pub d: Point,
    pub s: Point,
    pub y: Point,
}

/// What happened between `x_t` and `x_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub eta: f64,
    /// Line-search loops: the log-bisection count, or trial count for backtracking.
    pub loops: usize,
    pub evals: usize,
    pub unit_step_accepted: bool,
    pub g_dot_d: f64,
    /// `eta * g_dot_d`.
    pub g_dot_s: f64,
    pub sy_dot: f64,
    pub vectors: Option<StepVectors>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    pub f: f64,
    pub f_gap: f64,
    pub grad_norm: f64,
    /// `None` on the terminal record.
    pub step: Option<StepRecord>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub config: SolverConfig,
    pub dim: usize,
    pub f_star: f64,
    /// `B_0` as resolved from the init scheme; `None` for gradient descent.
    pub initial: Option<InitialMatrix>,
    /// One record per step plus a terminal record carrying the final iterate's values.
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
    pub snapshots: Vec<(usize, DMatrix<f64>)>,
}

impl RunTrace {
    pub fn steps(&self) -> usize {
        self.records.iter().filter(|r| r.step.is_some()).count()
    }

    pub fn gap0(&self) -> f64 {
        self.records.first().map(|r| r.f_gap).unwrap_or(f64::NAN)
    }

    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("traces are never empty")
    }

    pub fn final_gap_ratio(&self) -> f64 {
        self.last().f_gap / self.gap0()
    }
}

/// A run that stopped on an error, with everything recorded up to that point.
#[derive(Debug, thiserror::Error)]
#[error("run aborted at t = {t}: {source}")]
pub struct RunAbort {
    pub t: usize,
    #[source]
    pub source: Error,
    pub partial: Box<RunTrace>,
}

pub type RunResult = std::result::Result<RunTrace, RunAbort>;

struct Loop<'a> {
    config: &'a SolverConfig,
    trace: RunTrace,
    gap0: f64,
    below_tol: f64,
}

enum Next {
    Continue,
    Stop(RunStatus),
}

impl<'a> Loop<'a> {
    fn start(problem: &'a Problem, config: &'a SolverConfig) -> Result<(Self, Point)> {
        config.validate()?;
        let x0 = config.x0.clone().unwrap_or_else(|| problem.default_start());
        problem.check_point(&x0)?;
        let f_star = problem.reference()?.f_star;
        let gap0 = problem.value(&x0) - f_star;
        Ok((
            Self {
                config,
                trace: RunTrace {
                    config: config.clone(),
                    dim: problem.dim(),
                    f_star,
                    initial: None,
                    records: Vec::new(),
                    status: RunStatus::Aborted,
                    snapshots: Vec::new(),
                },
                gap0,
                below_tol: 1e-9 * f_star.abs().max(1.0),
            },
            x0,
        ))
    }

    fn check_stop(&self, f: f64, gn: f64) -> Result<Next> {
        let gap = f - self.trace.f_star;
        if gap < -self.below_tol {
            return Err(Error::BelowReference {
                f,
                f_star: self.trace.f_star,
            });
        }
        if gn <= self.config.grad_tol {
            return Ok(Next::Stop(RunStatus::ConvergedGrad));
        }
        if gap <= self.config.gap_tol * self.gap0 {
            return Ok(Next::Stop(RunStatus::ConvergedGap));
        }
        Ok(Next::Continue)
    }

    fn finish(mut self, t: usize, f: f64, gn: f64, status: RunStatus) -> RunTrace {
        self.trace.records.push(IterRecord {
            t,
            f,
            f_gap: f - self.trace.f_star,
            grad_norm: gn,
            step: None,
        });
        self.trace.status = status;
        self.trace
    }

    fn abort(self, t: usize, f: f64, gn: f64, source: Error) -> RunAbort {
        RunAbort {
            t,
            source,
            partial: Box::new(self.finish(t, f, gn, RunStatus::Aborted)),
        }
    }
}

/// Runs the configured method.
pub fn run(problem: &Problem, config: &SolverConfig) -> RunResult {
    match config.method {
        Method::Bfgs => run_bfgs(problem, config),
        Method::Gd => run_gd(problem, config),
    }
}

fn setup_abort(problem: &Problem, config: &SolverConfig, source: Error) -> RunAbort {
    RunAbort {
        t: 0,
        source,
        partial: Box::new(RunTrace {
            config: config.clone(),
            dim: problem.dim(),
            f_star: f64::NAN,
            initial: None,
            records: Vec::new(),
            status: RunStatus::Aborted,
            snapshots: Vec::new(),
        }),
    }
}

/// BFGS with the log-bisection Armijo-Wolfe search.
pub fn run_bfgs(problem: &Problem, config: &SolverConfig) -> RunResult {
    let (mut lp, mut x) =
        Loop::start(problem, config).map_err(|e| setup_abort(problem, config, e))?;
    let (mut state, init) =
        match BfgsState::initialize(problem, &config.init, config.form, &x, config.seed) {
            Ok(v) => v,
            Err(e) => return Err(setup_abort(problem, config, e)),
        };
    lp.trace.initial = Some(init);
    let (mut f, mut g) = problem.value_and_gradient(&x);

    for t in 0..config.max_iters {
        let gn = g.norm();
        match lp.check_stop(f, gn) {
            Ok(Next::Stop(status)) => return Ok(lp.finish(t, f, gn, status)),
            Ok(Next::Continue) => {}
            Err(e) => return Err(lp.abort(t, f, gn, e)),
        }
        if config.snapshot_stride > 0 && t % config.snapshot_stride == 0 {
            match state.b_matrix() {
                Ok(b) => lp.trace.snapshots.push((t, b)),
                Err(e) => return Err(lp.abort(t, f, gn, e)),
            }
        }
        let d = match state.direction(&g) {
            Ok(d) => d,
            Err(e) => return Err(lp.abort(t, f, gn, e)),
        };
        let gd = g.dot(&d);
        let ls = match log_bisection(problem, &x, &d, f, gd, &config.wolfe) {
            Ok(ls) => ls,
            Err(e) => return Err(lp.abort(t, f, gn, e)),
        };
        let s = &d * ls.eta;
        let x_next = &x + &s;
        let y = &ls.gradient - &g;
        let sy = s.dot(&y);
        if let Err(e) = state.update(&s, &y) {
            return Err(lp.abort(t, f, gn, e));
        }
        let vectors = config.record_vectors.then(|| StepVectors {
            x: x.clone(),
            g: g.clone(),
            d: d.clone(),
            s: s.clone(),
            y: y.clone(),
        });
        lp.trace.records.push(IterRecord {
            t,
            f,
            f_gap: f - lp.trace.f_star,
            grad_norm: gn,
            step: Some(StepRecord {
                eta: ls.eta,
                loops: ls.loops,
                evals: ls.evals,
                unit_step_accepted: ls.unit_step_accepted,
                g_dot_d: gd,
                g_dot_s: ls.eta * gd,
                sy_dot: sy,
                vectors,
            }),
        });
        x = x_next;
        f = ls.value;
        g = ls.gradient;
    }
    let gn = g.norm();
    match lp.check_stop(f, gn) {
        Ok(Next::Stop(status)) => Ok(lp.finish(config.max_iters, f, gn, status)),
        Ok(Next::Continue) => Ok(lp.finish(config.max_iters, f, gn, RunStatus::MaxIters)),
        Err(e) => Err(lp.abort(config.max_iters, f, gn, e)),
    }
}

/// Gradient descent with backtracking on the Armijo condition.
pub fn run_gd(problem: &Problem, config: &SolverConfig) -> RunResult {
    let (mut lp, mut x) =
        Loop::start(problem, config).map_err(|e| setup_abort(problem, config, e))?;
    let (mut f, mut g) = problem.value_and_gradient(&x);
    for t in 0..config.max_iters {
        let gn = g.norm();
        match lp.check_stop(f, gn) {
            Ok(Next::Stop(status)) => return Ok(lp.finish(t, f, gn, status)),
            Ok(Next::Continue) => {}
            Err(e) => return Err(lp.abort(t, f, gn, e)),
        }
        let d = -&g;
        let gd = -gn * gn;
        let bt = match backtracking(problem, &x, &d, f, gd, config.gd_alpha, config.gd_shrink) {
            Ok(bt) => bt,
            Err(e) => return Err(lp.abort(t, f, gn, e)),
        };
        let s = &d * bt.eta;
        let x_next = &x + &s;
        let g_next = problem.gradient(&x_next);
        let y = &g_next - &g;
        let vectors = config.record_vectors.then(|| StepVectors {
            x: x.clone(),
            g: g.clone(),
            d: d.clone(),
            s: s.clone(),
            y: y.clone(),
        });
        lp.trace.records.push(IterRecord {
            t,
            f,
            f_gap: f - lp.trace.f_star,
            grad_norm: gn,
            step: Some(StepRecord {
                eta: bt.eta,
                loops: bt.evals,
                evals: bt.evals + 1,
                unit_step_accepted: bt.eta == 1.0,
                g_dot_d: gd,
                g_dot_s: bt.eta * gd,
                sy_dot: s.dot(&y),
                vectors,
            }),
        });
        x = x_next;
        f = bt.value;
        g = g_next;
    }
    let gn = g.norm();
    match lp.check_stop(f, gn) {
        Ok(Next::Stop(status)) => Ok(lp.finish(config.max_iters, f, gn, status)),
        Ok(Next::Continue) => Ok(lp.finish(config.max_iters, f, gn, RunStatus::MaxIters)),
        Err(e) => Err(lp.abort(config.max_iters, f, gn, e)),
    }
}

/// The trial history of a failed line search, if that is why the run stopped.
pub fn failed_trials(abort: &RunAbort) -> Option<&[Trial]> {
    match &abort.source {
        Error::Bracketing { trials } => Some(trials),
        _ => None,
    }
}

//! Flat `section.key = value` experiment configuration.

use std::path::{Path, PathBuf};

use wolfebfgs::{Form, InitScheme, Method, Point, Problem, SolverConfig, WolfeParams};

use crate::CliError;

pub const DEFAULT_GD_MAX_ITERS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKindSpec {
    Cubic,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartSpec {
    Default,
    Values(Vec<f64>),
    /// Entries uniform in `[-scale, scale]`, drawn from the run seed.
    Random(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ProblemKindSpec,
    pub dims: Vec<usize>,
    pub kappas: Vec<f64>,
    pub delta: f64,
    pub beta_f: f64,
    pub eigs: Vec<f64>,
    pub x0: StartSpec,

    pub methods: Vec<Method>,
    pub inits: Vec<InitScheme>,
    pub form: Form,
    pub alpha: f64,
    pub beta: f64,
    pub max_loops: usize,
    pub max_iters: usize,
    pub gd_max_iters: usize,
    pub grad_tol: f64,
    pub gap_tol: f64,
    pub gd_alpha: f64,
    pub seed: u64,

    pub outdir: PathBuf,
    pub csv: bool,
    pub snapshot_stride: usize,
    pub report: bool,
    /// Extended in-memory checks in the per-run report.
    pub extended: bool,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ProblemKindSpec::Cubic,
            dims: vec![100],
            kappas: vec![100.0],
            delta: 1.0,
            beta_f: 1.0,
            eigs: Vec::new(),
            x0: StartSpec::Default,
            methods: vec![Method::Bfgs],
            inits: vec![InitScheme::MuIdentity],
            form: Form::Inverse,
            alpha: 0.1,
            beta: 0.9,
            max_loops: wolfebfgs::linesearch::DEFAULT_MAX_LOOPS,
            max_iters: 10_000,
            gd_max_iters: DEFAULT_GD_MAX_ITERS,
            grad_tol: 1e-12,
            gap_tol: 1e-12,
            gd_alpha: 0.1,
            seed: 0,
            outdir: PathBuf::from("out"),
            csv: true,
            snapshot_stride: 0,
            report: true,
            extended: false,
            workers: None,
        }
    }
}

/// One `(problem, method, init)` cell of an experiment.
#[derive(Debug, Clone)]
pub struct Job {
    pub runid: String,
    pub dim: usize,
    pub kappa: Option<f64>,
    pub method: Method,
    pub init: InitScheme,
}

fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| CliError::Config(format!("`{key}`: cannot parse `{s}`"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!(
            "`{key}`: expected a boolean, got `{v}`"
        ))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `section.key = value`", n + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    /// Apply one setting; also used for command-line overrides.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "problem.kind" => {
                self.kind = match v {
                    "cubic" => ProblemKindSpec::Cubic,
                    "quadratic" => ProblemKindSpec::Quadratic,
                    _ => return Err(CliError::Config(format!("unknown problem kind `{v}`"))),
                }
            }
            "problem.d" => self.dims = parse_list(key, v, |s| s.parse().ok())?,
            "problem.kappa" => self.kappas = parse_list(key, v, |s| s.parse().ok())?,
            "problem.delta" => self.delta = parse_one(key, v)?,
            "problem.beta_f" => self.beta_f = parse_one(key, v)?,
            "problem.eigs" => self.eigs = parse_list(key, v, |s| s.parse().ok())?,
            "problem.x0" => {
                self.x0 = if v == "default" {
                    StartSpec::Default
                } else if let Some(scale) = v.strip_prefix("random:") {
                    StartSpec::Random(parse_one(key, scale)?)
                } else {
                    StartSpec::Values(parse_list(key, v, |s| s.parse().ok())?)
                }
            }
            "solver.method" => self.methods = parse_list(key, v, Method::parse)?,
            "solver.init" => self.inits = parse_list(key, v, InitScheme::parse)?,
            "solver.form" => {
                self.form = match v {
                    "direct" => Form::Direct,
                    "inverse" => Form::Inverse,
                    _ => return Err(CliError::Config(format!("unknown form `{v}`"))),
                }
            }
            "solver.alpha" => self.alpha = parse_one(key, v)?,
            "solver.beta" => self.beta = parse_one(key, v)?,
            "solver.max_loops" => self.max_loops = parse_one(key, v)?,
            "solver.max_iters" => self.max_iters = parse_one(key, v)?,
            "solver.gd_max_iters" => self.gd_max_iters = parse_one(key, v)?,
            "solver.grad_tol" => self.grad_tol = parse_one(key, v)?,
            "solver.gap_tol" => self.gap_tol = parse_one(key, v)?,
            "solver.gd_alpha" => self.gd_alpha = parse_one(key, v)?,
            "solver.seed" => self.seed = parse_one(key, v)?,
            "output.dir" => self.outdir = PathBuf::from(v),
            "output.csv" => self.csv = parse_bool(key, v)?,
            "output.snapshot_stride" => self.snapshot_stride = parse_one(key, v)?,
            "output.report" => {
                self.report = match v {
                    "text" => true,
                    "none" => false,
                    _ => return Err(CliError::Config(format!("`{key}`: expected text or none"))),
                }
            }
            "output.extended" => self.extended = parse_bool(key, v)?,
            "output.workers" => self.workers = Some(parse_one(key, v)?),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let empty = |what: &str| CliError::Config(format!("empty grid: no {what}"));
        if self.methods.is_empty() {
            return Err(empty("methods"));
        }
        if self.methods.contains(&Method::Bfgs) && self.inits.is_empty() {
            return Err(empty("init schemes"));
        }
        match self.kind {
            ProblemKindSpec::Cubic => {
                if self.dims.is_empty() {
                    return Err(empty("dimensions"));
                }
                if self.kappas.is_empty() {
                    return Err(empty("condition numbers"));
                }
            }
            ProblemKindSpec::Quadratic => {
                if self.eigs.is_empty() {
                    return Err(CliError::Config(
                        "quadratic problems need `problem.eigs`".into(),
                    ));
                }
            }
        }
        WolfeParams::new(self.alpha, self.beta).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Cartesian product of the grid, in a fixed order.
    pub fn jobs(&self) -> Vec<Job> {
        let cells: Vec<(usize, Option<f64>)> = match self.kind {
            ProblemKindSpec::Cubic => self
                .dims
                .iter()
                .flat_map(|&d| self.kappas.iter().map(move |&k| (d, Some(k))))
                .collect(),
            ProblemKindSpec::Quadratic => vec![(self.eigs.len(), None)],
        };
        let mut jobs = Vec::new();
        for (d, kappa) in cells {
            let cell = match kappa {
                Some(k) => format!("cubic_d{d}_k{k}"),
                None => format!("quadratic_d{d}"),
            };
            for &method in &self.methods {
                match method {
                    Method::Bfgs => {
                        for init in &self.inits {
                            jobs.push(Job {
                                runid: format!("{cell}_{}_bfgs", init.label()),
                                dim: d,
                                kappa,
                                method,
                                init: init.clone(),
                            });
                        }
                    }
                    Method::Gd => jobs.push(Job {
                        runid: format!("{cell}_gd"),
                        dim: d,
                        kappa,
                        method,
                        init: InitScheme::Identity,
                    }),
                }
            }
        }
        jobs
    }

    pub fn problem(&self, job: &Job) -> Result<Problem, CliError> {
        let p = match self.kind {
            ProblemKindSpec::Cubic => {
                let kappa = job.kappa.expect("cubic jobs carry kappa");
                Problem::make_cubic(job.dim, kappa, self.delta, self.beta_f)
            }
            ProblemKindSpec::Quadratic => Problem::quadratic(self.eigs.clone()),
        };
        p.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn solver(&self, job: &Job) -> Result<SolverConfig, CliError> {
        let x0 = match &self.x0 {
            StartSpec::Default => None,
            StartSpec::Values(v) if v.len() == job.dim => Some(Point::from_vec(v.clone())),
            StartSpec::Random(scale) => Some(wolfebfgs::objective::sample_point(
                job.dim, *scale, self.seed,
            )),
            StartSpec::Values(v) => {
                return Err(CliError::Config(format!(
                    "x0 has {} entries, expected {}",
                    v.len(),
                    job.dim
                )))
            }
        };
        let gd = job.method == Method::Gd;
        Ok(SolverConfig {
            method: job.method,
            init: job.init.clone(),
            form: self.form,
            wolfe: WolfeParams::new(self.alpha, self.beta)
                .map_err(|e| CliError::Config(e.to_string()))?
                .with_max_loops(self.max_loops),
            max_iters: if gd {
                self.gd_max_iters
            } else {
                self.max_iters
            },
            grad_tol: self.grad_tol,
            gap_tol: self.gap_tol,
            seed: self.seed,
            snapshot_stride: if gd { 0 } else { self.snapshot_stride },
            // gradient-descent diagnostics use scalars only
            record_vectors: !gd,
            x0,
            gd_alpha: self.gd_alpha,
            gd_shrink: 0.5,
        })
    }
}

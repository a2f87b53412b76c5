//! `run`, `sweep`, `verify` and `report`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use wolfebfgs::analysis::bounds::{complexity_report, ComplexityScheme};
use wolfebfgs::analysis::{verify_table, BoundReport, CheckStatus, TraceTable};
use wolfebfgs::Method;

use crate::config::{ExperimentConfig, Job};
use crate::csvio::{self, ManifestRow};
use crate::runner::{execute, unit_onset, RunOutcome};
use crate::{CliError, EXIT_ABORT, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "wolfebfgs",
    version,
    about = "BFGS experiments and convergence-bound verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and write its trace, meta and report.
    Run(RunArgs),
    /// Run the Cartesian grid of a config and write `sweep_index.csv`.
    Sweep(SweepArgs),
    /// Re-check traces from disk, or solve a config and check in memory.
    Verify(VerifyArgs),
    /// Summarize a sweep manifest or a single trace.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub eigs: Option<String>,
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub outdir: Option<String>,
    #[arg(long)]
    pub snapshot_stride: Option<String>,
    /// Add the in-memory checks to the report.
    #[arg(long)]
    pub extended: bool,
    /// Any `section.key=value` setting.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        let pairs = [
            ("problem.kind", &self.problem),
            ("problem.d", &self.d),
            ("problem.kappa", &self.kappa),
            ("problem.delta", &self.delta),
            ("problem.eigs", &self.eigs),
            ("solver.init", &self.init),
            ("solver.method", &self.method),
            ("solver.alpha", &self.alpha),
            ("solver.beta", &self.beta),
            ("solver.max_iters", &self.max_iters),
            ("solver.seed", &self.seed),
            ("output.dir", &self.outdir),
            ("output.snapshot_stride", &self.snapshot_stride),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if self.extended {
            cfg.extended = true;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    fn is_empty(&self) -> bool {
        self.problem.is_none() && self.eigs.is_none()
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Trace CSV files; each needs its `<runid>_meta.txt` alongside.
    pub traces: Vec<PathBuf>,
    /// Meta file, when a single trace is given and the meta is elsewhere.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Solve this config instead and verify in memory, extended checks included.
    #[arg(long, conflicts_with = "traces")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `sweep_index.csv` or a trace CSV.
    pub path: PathBuf,
    /// Target accuracy for the complexity estimates.
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
}

fn load_config(path: Option<&Path>, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    ov.apply(&mut cfg)?;
    if ov.eigs.is_some() && ov.problem.is_none() {
        cfg.set("problem.kind", "quadratic")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_failure(report: &BoundReport) {
    if let Some(c) = report.first_failure() {
        let (t, m) = c.first_failure.unwrap_or((0, f64::NAN));
        eprintln!(
            "{}: check {} failed at t = {t}, margin {m:.3e}",
            report.runid, c.name
        );
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    if args.config.is_none() && args.overrides.is_empty() {
        return Err(CliError::Config(
            "run needs --config or --problem (see `wolfebfgs run --help`)".into(),
        ));
    }
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let jobs = cfg.jobs();
    let [job] = jobs.as_slice() else {
        return Err(CliError::Config(format!(
            "run expects exactly one (d, kappa, method, init) cell, the config has {}; use sweep",
            jobs.len()
        )));
    };
    let out = execute(&cfg, job)?;
    println!(
        "{}: {} after {} steps, gap ratio {:.3e}",
        job.runid,
        out.trace.status,
        out.trace.steps(),
        out.trace.final_gap_ratio()
    );
    if let Some(msg) = &out.abort {
        eprintln!("{}: solver aborted at {msg}", job.runid);
        return Ok(EXIT_ABORT);
    }
    Ok(EXIT_OK)
}

pub type SweepResults = Vec<(Job, Result<RunOutcome, CliError>)>;

pub fn run_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResults, CliError> {
    let jobs = cfg.jobs();
    if jobs.is_empty() {
        return Err(CliError::Config("empty grid".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers.or(cfg.workers) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|job| (job.clone(), execute(cfg, job)))
            .collect()
    }))
}

fn failed_row(job: &Job, status: &str) -> ManifestRow {
    ManifestRow {
        runid: job.runid.clone(),
        d: job.dim,
        kappa: job.kappa,
        init: job.init.label().to_string(),
        method: job.method.label().to_string(),
        iters: 0,
        final_gap_ratio: f64::NAN,
        t_unit: None,
        max_lambda_t: None,
        mean_lambda_t: None,
        status: status.to_string(),
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let cfg = load_config(Some(&args.config), &args.overrides)?;
    let results = run_sweep(&cfg, args.workers)?;
    let mut rows = Vec::with_capacity(results.len());
    let mut ok = 0;
    for (job, res) in &results {
        match res {
            Ok(out) => {
                if out.abort.is_none() {
                    ok += 1;
                } else {
                    eprintln!(
                        "{}: aborted at {}",
                        job.runid,
                        out.abort.as_deref().unwrap_or("")
                    );
                }
                rows.push(out.manifest_row());
            }
            Err(e) => {
                eprintln!("{}: {e}", job.runid);
                rows.push(failed_row(job, "error"));
            }
        }
    }
    std::fs::create_dir_all(&cfg.outdir).map_err(|e| CliError::Io(e.to_string()))?;
    let manifest = cfg.outdir.join("sweep_index.csv");
    csvio::write_manifest(&manifest, &rows)?;
    println!(
        "{} of {} runs completed; manifest {}",
        ok,
        rows.len(),
        manifest.display()
    );
    Ok(if ok > 0 { EXIT_OK } else { EXIT_ABORT })
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    if let Some(path) = &args.config {
        let mut cfg = load_config(Some(path), &args.overrides)?;
        cfg.report = true;
        cfg.extended = true;
        let mut code = EXIT_OK;
        for job in cfg.jobs() {
            let out = execute(&cfg, &job)?;
            let report = out.report.as_ref().expect("report enabled");
            print!("{}", report.to_text());
            if out.abort.is_some() {
                code = code.max(EXIT_ABORT);
            } else if !report.passed() {
                report_failure(report);
                code = code.max(EXIT_CHECK_FAILED);
            }
        }
        return Ok(code);
    }
    if args.traces.is_empty() {
        return Err(CliError::Config(
            "verify needs trace files or --config".into(),
        ));
    }
    if args.meta.is_some() && args.traces.len() > 1 {
        return Err(CliError::Config("--meta applies to a single trace".into()));
    }
    let mut code = EXIT_OK;
    for trace in &args.traces {
        let table = csvio::read_table(trace, args.meta.as_deref())?;
        let report = verify_table(&table).map_err(|e| CliError::Csv(e.to_string()))?;
        print!("{}", report.to_text());
        if !report.passed() {
            report_failure(&report);
            code = EXIT_CHECK_FAILED;
        }
    }
    Ok(code)
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

fn report_manifest(rows: &[ManifestRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<34} {:>6} {:>8} {:>10} {:>8} {:>8} {:>8}  {}\n",
        "runid", "d", "iters", "final_gap", "T_unit", "max_lam", "mean_lam", "status"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<34} {:>6} {:>8} {:>10.2e} {:>8} {:>8} {:>8}  {}\n",
            r.runid,
            r.d,
            r.iters,
            r.final_gap_ratio,
            fmt_opt(r.t_unit),
            fmt_opt(r.max_lambda_t),
            r.mean_lambda_t
                .map(|m| format!("{m:.2}"))
                .unwrap_or_else(|| "-".into()),
            r.status
        ));
    }
    out
}

fn report_trace(table: &TraceTable, epsilon: f64) -> Result<String, CliError> {
    let m = &table.meta;
    let mut out = format!(
        "{}: {} {} init={} d={} kappa={:.4e} steps={} status={}\n",
        m.runid, m.problem, m.method, m.init, m.dim, m.kappa, m.steps, m.status
    );
    let last = table.rows.last().expect("tables are non-empty");
    out.push_str(&format!("final gap ratio {:.3e}\n", last.f_gap_ratio));
    out.push_str(&format!(
        "unit-step onset {}\n",
        fmt_opt(unit_onset(&table.rows))
    ));
    let lambdas: Vec<usize> = table.rows.iter().filter_map(|r| r.lambda_t).collect();
    if !lambdas.is_empty() {
        let mean = lambdas.iter().sum::<usize>() as f64 / lambdas.len() as f64;
        out.push_str(&format!(
            "line-search loops: max {} mean {mean:.3}\n",
            lambdas.iter().max().expect("non-empty")
        ));
    }
    if m.method == Method::Bfgs {
        let scheme = match (m.init.as_str(), m.init_scale) {
            ("LI", _) => Some(ComplexityScheme::L),
            ("muI", _) => Some(ComplexityScheme::Mu),
            (_, Some(c)) if c >= m.mu && c <= m.l_bound => Some(ComplexityScheme::C(c)),
            _ => None,
        };
        if let Some(s) = scheme {
            let r = complexity_report(m.dim, m.kappa, m.c0, epsilon, s, m.mu)
                .map_err(|e| CliError::Config(e.to_string()))?;
            out.push_str(&format!(
                "complexity at eps {epsilon:.0e}: linear {:.4e}, condition-free {:.4e}, superlinear {:.4e} (smallest: {})\n",
                r.branches[0],
                r.branches[1],
                r.branches[2],
                r.label()
            ));
        }
    }
    let report = verify_table(table).map_err(|e| CliError::Csv(e.to_string()))?;
    let fails: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| c.status == CheckStatus::Fail)
        .map(|c| c.name.as_str())
        .collect();
    out.push_str(&format!(
        "checks: {} pass, {} fail{}\n",
        report
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Pass)
            .count(),
        fails.len(),
        if fails.is_empty() {
            String::new()
        } else {
            format!(" ({})", fails.join(", "))
        }
    ));
    Ok(out)
}

pub fn cmd_report(args: &ReportArgs) -> Result<i32, CliError> {
    let is_manifest = args
        .path
        .file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| !n.ends_with("_trace.csv"));
    if is_manifest {
        print!("{}", report_manifest(&csvio::read_manifest(&args.path)?));
    } else {
        print!(
            "{}",
            report_trace(&csvio::read_table(&args.path, None)?, args.epsilon)?
        );
    }
    Ok(EXIT_OK)
}

/// Dispatch and map errors to exit codes.
pub fn dispatch(cli: &Cli) -> i32 {
    let res = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Report(a) => cmd_report(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == EXIT_INPUT {
                eprintln!("usage: wolfebfgs <run|sweep|verify|report> --help");
            }
            e.exit_code()
        }
    }
}

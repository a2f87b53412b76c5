//! Executes one job end to end: solve, diagnose, verify, write files.

use wolfebfgs::analysis::{
    analyze, verify_extended, verify_table, BoundReport, TraceRow, TraceTable,
};
use wolfebfgs::{run, Method, RunTrace};

use crate::config::{ExperimentConfig, Job};
use crate::csvio::{self, ManifestRow};
use crate::CliError;

/// Consecutive unit steps that mark the start of the superlinear phase.
pub const UNIT_RUN: usize = 10;

/// First `t` that starts `UNIT_RUN` consecutive accepted unit steps.
pub fn unit_onset(rows: &[TraceRow]) -> Option<usize> {
    let steps: Vec<&TraceRow> = rows.iter().filter(|r| r.unit_step.is_some()).collect();
    steps
        .windows(UNIT_RUN)
        .find(|w| w.iter().all(|r| r.unit_step == Some(true)))
        .map(|w| w[0].t)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub job: Job,
    pub trace: RunTrace,
    pub table: TraceTable,
    pub report: Option<BoundReport>,
    /// Solver error message when the run aborted.
    pub abort: Option<String>,
}

impl RunOutcome {
    pub fn manifest_row(&self) -> ManifestRow {
        let rows = &self.table.rows;
        let lambdas: Vec<usize> = rows.iter().filter_map(|r| r.lambda_t).collect();
        ManifestRow {
            runid: self.job.runid.clone(),
            d: self.job.dim,
            kappa: self.job.kappa,
            init: match self.job.method {
                Method::Bfgs => self.job.init.label().to_string(),
                Method::Gd => "-".into(),
            },
            method: self.job.method.label().to_string(),
            iters: self.trace.steps(),
            final_gap_ratio: self.trace.final_gap_ratio(),
            t_unit: unit_onset(rows),
            max_lambda_t: lambdas.iter().copied().max(),
            mean_lambda_t: (!lambdas.is_empty())
                .then(|| lambdas.iter().sum::<usize>() as f64 / lambdas.len() as f64),
            status: self.trace.status.label().to_string(),
        }
    }
}

pub fn execute(cfg: &ExperimentConfig, job: &Job) -> Result<RunOutcome, CliError> {
    let problem = cfg.problem(job)?;
    let solver = cfg.solver(job)?;
    let (trace, abort) = match run(&problem, &solver) {
        Ok(t) => (t, None),
        Err(a) => (*a.partial, Some(format!("t = {}: {}", a.t, a.source))),
    };
    let analysis =
        analyze(&trace, &problem, &job.runid).map_err(|e| CliError::Solver(e.to_string()))?;
    let table = analysis.table(&trace);
    let report = if cfg.report {
        let mut r = verify_table(&table).map_err(|e| CliError::Solver(e.to_string()))?;
        if cfg.extended {
            r.extend(
                verify_extended(&trace, &problem, &analysis)
                    .map_err(|e| CliError::Solver(e.to_string()))?,
            );
        }
        Some(r)
    } else {
        None
    };
    if cfg.csv || report.is_some() {
        std::fs::create_dir_all(&cfg.outdir)
            .map_err(|e| CliError::Io(format!("{}: {e}", cfg.outdir.display())))?;
    }
    if cfg.csv {
        csvio::write_trace(&csvio::trace_path(&cfg.outdir, &job.runid), &table.rows)?;
        csvio::write_meta(&csvio::meta_path(&cfg.outdir, &job.runid), &table.meta)?;
    }
    if let Some(r) = &report {
        std::fs::write(csvio::report_path(&cfg.outdir, &job.runid), r.to_text())
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(RunOutcome {
        job: job.clone(),
        trace,
        table,
        report,
        abort,
    })
}

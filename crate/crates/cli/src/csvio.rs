//! Trace CSV and sweep manifest serialization.

use std::path::{Path, PathBuf};

use wolfebfgs::analysis::table::fmt_f64;
use wolfebfgs::analysis::{RunMeta, TraceRow, TraceTable};

use crate::CliError;

pub const TRACE_COLUMNS: [&str; 17] = [
    "t",
    "f",
    "f_gap_ratio",
    "grad_norm",
    "eta",
    "lambda_t",
    "evals",
    "unit_step",
    "p_hat",
    "q_hat",
    "m_hat",
    "n_hat",
    "cos_theta",
    "C_t",
    "rho_t",
    "psi_Bbar",
    "psi_Btilde",
];

pub const MANIFEST_COLUMNS: [&str; 11] = [
    "runid",
    "d",
    "kappa",
    "init",
    "method",
    "iters",
    "final_gap_ratio",
    "T_unit",
    "max_lambda_t",
    "mean_lambda_t",
    "status",
];

pub fn trace_path(dir: &Path, runid: &str) -> PathBuf {
    dir.join(format!("{runid}_trace.csv"))
}

pub fn meta_path(dir: &Path, runid: &str) -> PathBuf {
    dir.join(format!("{runid}_meta.txt"))
}

pub fn report_path(dir: &Path, runid: &str) -> PathBuf {
    dir.join(format!("{runid}_report.txt"))
}

/// `<runid>_meta.txt` next to a `<runid>_trace.csv`.
pub fn meta_for_trace(trace: &Path) -> Option<PathBuf> {
    let name = trace.file_name()?.to_str()?;
    let runid = name.strip_suffix("_trace.csv")?;
    Some(trace.with_file_name(format!("{runid}_meta.txt")))
}

fn opt_f(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn opt_u(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn row_fields(r: &TraceRow) -> [String; 17] {
    [
        r.t.to_string(),
        fmt_f64(r.f),
        fmt_f64(r.f_gap_ratio),
        fmt_f64(r.grad_norm),
        opt_f(r.eta),
        opt_u(r.lambda_t),
        opt_u(r.evals),
        r.unit_step
            .map(|b| u8::from(b).to_string())
            .unwrap_or_default(),
        opt_f(r.p_hat),
        opt_f(r.q_hat),
        opt_f(r.m_hat),
        opt_f(r.n_hat),
        opt_f(r.cos_theta),
        opt_f(r.c_t),
        opt_f(r.rho_t),
        opt_f(r.psi_bbar),
        opt_f(r.psi_btilde),
    ]
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(TRACE_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record(row_fields(r)).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    line: usize,
) -> Result<Option<T>, CliError> {
    let s = rec.get(i).unwrap_or("");
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| {
        CliError::Csv(format!(
            "line {line}: column `{}` has bad value `{s}`",
            TRACE_COLUMNS[i]
        ))
    })
}

fn required<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    line: usize,
) -> Result<T, CliError> {
    field(rec, i, line)?.ok_or_else(|| {
        CliError::Csv(format!(
            "line {line}: column `{}` is empty",
            TRACE_COLUMNS[i]
        ))
    })
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let mut rd = csv::Reader::from_path(path)
        .map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    let header = rd
        .headers()
        .map_err(|e| CliError::Csv(e.to_string()))?
        .clone();
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(CliError::Csv(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| CliError::Csv(format!("line {line}: {e}")))?;
        if rec.len() != TRACE_COLUMNS.len() {
            return Err(CliError::Csv(format!(
                "line {line}: expected {} fields",
                TRACE_COLUMNS.len()
            )));
        }
        let unit = match rec.get(7).unwrap_or("") {
            "" => None,
            "1" => Some(true),
            "0" => Some(false),
            s => return Err(CliError::Csv(format!("line {line}: bad unit_step `{s}`"))),
        };
        rows.push(TraceRow {
            t: required(&rec, 0, line)?,
            f: required(&rec, 1, line)?,
            f_gap_ratio: required(&rec, 2, line)?,
            grad_norm: required(&rec, 3, line)?,
            eta: field(&rec, 4, line)?,
            lambda_t: field(&rec, 5, line)?,
            evals: field(&rec, 6, line)?,
            unit_step: unit,
            p_hat: field(&rec, 8, line)?,
            q_hat: field(&rec, 9, line)?,
            m_hat: field(&rec, 10, line)?,
            n_hat: field(&rec, 11, line)?,
            cos_theta: field(&rec, 12, line)?,
            c_t: field(&rec, 13, line)?,
            rho_t: field(&rec, 14, line)?,
            psi_bbar: field(&rec, 15, line)?,
            psi_btilde: field(&rec, 16, line)?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Csv(format!("{}: no rows", path.display())));
    }
    Ok(rows)
}

pub fn write_meta(path: &Path, meta: &RunMeta) -> Result<(), CliError> {
    std::fs::write(path, meta.to_text())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_meta(path: &Path) -> Result<RunMeta, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    RunMeta::from_text(&text).map_err(|e| CliError::Csv(e.to_string()))
}

pub fn read_table(trace: &Path, meta: Option<&Path>) -> Result<TraceTable, CliError> {
    let meta_file = match meta {
        Some(p) => p.to_path_buf(),
        None => meta_for_trace(trace).ok_or_else(|| {
            CliError::Csv(format!("{}: cannot locate the meta file", trace.display()))
        })?,
    };
    Ok(TraceTable {
        meta: read_meta(&meta_file)?,
        rows: read_trace(trace)?,
    })
}

/// One line of `sweep_index.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub runid: String,
    pub d: usize,
    pub kappa: Option<f64>,
    pub init: String,
    pub method: String,
    pub iters: usize,
    pub final_gap_ratio: f64,
    pub t_unit: Option<usize>,
    pub max_lambda_t: Option<usize>,
    pub mean_lambda_t: Option<f64>,
    pub status: String,
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(MANIFEST_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            r.runid.clone(),
            r.d.to_string(),
            opt_f(r.kappa),
            r.init.clone(),
            r.method.clone(),
            r.iters.to_string(),
            fmt_f64(r.final_gap_ratio),
            opt_u(r.t_unit),
            opt_u(r.max_lambda_t),
            opt_f(r.mean_lambda_t),
            r.status.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let mut rd = csv::Reader::from_path(path)
        .map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    let header = rd
        .headers()
        .map_err(|e| CliError::Csv(e.to_string()))?
        .clone();
    if header.iter().ne(MANIFEST_COLUMNS) {
        return Err(CliError::Csv(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let bad = |line: usize, col: &str| CliError::Csv(format!("manifest line {line}: bad `{col}`"));
    let mut out = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| CliError::Csv(format!("manifest line {line}: {e}")))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let opt_num = |i: usize| -> Result<Option<f64>, CliError> {
            if get(i).is_empty() {
                Ok(None)
            } else {
                get(i)
                    .parse()
                    .map(Some)
                    .map_err(|_| bad(line, MANIFEST_COLUMNS[i]))
            }
        };
        let opt_int = |i: usize| -> Result<Option<usize>, CliError> {
            if get(i).is_empty() {
                Ok(None)
            } else {
                get(i)
                    .parse()
                    .map(Some)
                    .map_err(|_| bad(line, MANIFEST_COLUMNS[i]))
            }
        };
        out.push(ManifestRow {
            runid: get(0).to_string(),
            d: get(1).parse().map_err(|_| bad(line, "d"))?,
            kappa: opt_num(2)?,
            init: get(3).to_string(),
            method: get(4).to_string(),
            iters: get(5).parse().map_err(|_| bad(line, "iters"))?,
            final_gap_ratio: get(6).parse().map_err(|_| bad(line, "final_gap_ratio"))?,
            t_unit: opt_int(7)?,
            max_lambda_t: opt_int(8)?,
            mean_lambda_t: opt_num(9)?,
            status: get(10).to_string(),
        });
    }
    Ok(out)
}

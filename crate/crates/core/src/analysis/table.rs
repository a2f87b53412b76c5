//! Flat per-iteration rows and run constants, the form in which traces are persisted.

use std::collections::BTreeMap;

use crate::driver::{Method, RunStatus};
use crate::error::{Error, Result};

/// One row of the trace table. Step columns are empty on the terminal row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub f: f64,
    pub f_gap_ratio: f64,
    pub grad_norm: f64,
    pub eta: Option<f64>,
    pub lambda_t: Option<usize>,
    pub evals: Option<usize>,
    pub unit_step: Option<bool>,
    pub p_hat: Option<f64>,
    pub q_hat: Option<f64>,
    pub m_hat: Option<f64>,
    pub n_hat: Option<f64>,
    pub cos_theta: Option<f64>,
    pub c_t: Option<f64>,
    pub rho_t: Option<f64>,
    pub psi_bbar: Option<f64>,
    pub psi_btilde: Option<f64>,
}

/// Constants of a run needed to re-verify it from its table alone.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub runid: String,
    pub problem: String,
    pub dim: usize,
    pub delta: Option<f64>,
    pub kappa: f64,
    pub mu: f64,
    pub l_bound: f64,
    pub m_bound: f64,
    pub f_star: f64,
    pub gap0: f64,
    pub method: Method,
    pub init: String,
    pub init_scale: Option<f64>,
    /// Armijo parameter actually used (the backtracking one for gradient descent).
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub psi_bbar0: Option<f64>,
    pub psi_btilde0: Option<f64>,
    pub c0: f64,
    pub status: RunStatus,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub meta: RunMeta,
    pub rows: Vec<TraceRow>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl RunMeta {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("runid", self.runid.clone());
        put("problem", self.problem.clone());
        put("d", self.dim.to_string());
        put("delta", fmt_opt(self.delta));
        put("kappa", fmt_f64(self.kappa));
        put("mu", fmt_f64(self.mu));
        put("L", fmt_f64(self.l_bound));
        put("M", fmt_f64(self.m_bound));
        put("f_star", fmt_f64(self.f_star));
        put("gap0", fmt_f64(self.gap0));
        put("method", self.method.label().to_string());
        put("init", self.init.clone());
        put("init_scale", fmt_opt(self.init_scale));
        put("alpha", fmt_f64(self.alpha));
        put("beta", fmt_f64(self.beta));
        put("seed", self.seed.to_string());
        put("psi_Bbar0", fmt_opt(self.psi_bbar0));
        put("psi_Btilde0", fmt_opt(self.psi_btilde0));
        put("C0", fmt_f64(self.c0));
        put("status", self.status.label().to_string());
        put("steps", self.steps.to_string());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("meta line {}: expected key=value", n + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&str> {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::InvalidInput(format!("meta is missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("meta `{k}` is not a number")))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            let v = get(k)?;
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::InvalidInput(format!("meta `{k}` is not a number")))
            }
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse::<u64>()
                .map_err(|_| Error::InvalidInput(format!("meta `{k}` is not an integer")))
        };
        Ok(Self {
            runid: get("runid")?.to_string(),
            problem: get("problem")?.to_string(),
            dim: int("d")? as usize,
            delta: opt("delta")?,
            kappa: num("kappa")?,
            mu: num("mu")?,
            l_bound: num("L")?,
            m_bound: num("M")?,
            f_star: num("f_star")?,
            gap0: num("gap0")?,
            method: Method::parse(get("method")?)
                .ok_or_else(|| Error::InvalidInput("meta `method` is unknown".into()))?,
            init: get("init")?.to_string(),
            init_scale: opt("init_scale")?,
            alpha: num("alpha")?,
            beta: num("beta")?,
            seed: int("seed")?,
            psi_bbar0: opt("psi_Bbar0")?,
            psi_btilde0: opt("psi_Btilde0")?,
            c0: num("C0")?,
            status: RunStatus::parse(get("status")?)
                .ok_or_else(|| Error::InvalidInput("meta `status` is unknown".into()))?,
            steps: int("steps")? as usize,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_text_round_trip() {
        let meta = RunMeta {
            runid: "r".into(),
            problem: "cubic".into(),
            dim: 3,
            delta: Some(1.0),
            kappa: 100.0,
            mu: 1.0,
            l_bound: 100.0,
            m_bound: 198.0,
            f_star: -0.1 / 3.0,
            gap0: 0.1 / 3.0,
            method: Method::Bfgs,
            init: "LI".into(),
            init_scale: Some(100.0),
            alpha: 0.1,
            beta: 0.9,
            seed: 7,
            psi_bbar0: Some(0.0),
            psi_btilde0: None,
            c0: 1.0 / 7.0,
            status: RunStatus::ConvergedGap,
            steps: 12,
        };
        assert_eq!(RunMeta::from_text(&meta.to_text()).unwrap(), meta);
    }
}

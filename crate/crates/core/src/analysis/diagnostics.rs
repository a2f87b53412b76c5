use nalgebra::DMatrix;

use crate::analysis::table::{RunMeta, TraceRow, TraceTable};
use crate::analysis::weights::WeightScheme;
use crate::bfgs::InitialMatrix;
use crate::driver::{Method, RunTrace};
use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::objective::{Objective, Point, Problem, ProblemKind};

/// `C_t = M / mu^{3/2} * sqrt(2 (f_t - f*))`.
pub fn compute_ct(f_t: f64, f_star: f64, mu: f64, m_bound: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput("mu must be positive".into()));
    }
    let gap = f_t - f_star;
    if gap < -1e-12 * f_star.abs().max(1.0) {
        return Err(Error::BelowReference { f: f_t, f_star });
    }
    Ok(m_bound / mu.powf(1.5) * (2.0 * gap.max(0.0)).sqrt())
}

/// `rho = -g'd / (d' H* d)`.
pub fn compute_rho(g: &Point, d: &Point, h_star: &DMatrix<f64>) -> Result<f64> {
    let curv = quad_form(h_star, d, d);
    if !(curv > 0.0) {
        return Err(Error::Stationary("zero search direction"));
    }
    Ok(-g.dot(d) / curv)
}

/// Ratios of one step measured in the `P`-weighted geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weighted {
    pub p_hat: f64,
    pub q_hat: f64,
    pub m_hat: f64,
    pub n_hat: f64,
    pub cos_theta: f64,
    /// `|y^|^2 / y^'s^`.
    pub y_ratio: f64,
    /// `|g^|^2`.
    pub g_sq: f64,
    /// `g^'s^` formed from the weighted vectors.
    pub gs_weighted: f64,
    /// `y^'s^` formed from the weighted vectors.
    pub ys_weighted: f64,
}

impl Weighted {
    /// `p^ q^ n^ cos^2 / m^`, so that `gap_{t+1} = (1 - factor) gap_t`.
    pub fn factor(&self) -> f64 {
        self.p_hat * self.q_hat * self.n_hat * self.cos_theta * self.cos_theta / self.m_hat
    }
}

/// Step inputs for [`weighted_quantities`]; `g_dot_s` and `sy` are the unweighted scalars.
pub struct StepInput<'a> {
    pub g: &'a Point,
    pub s: &'a Point,
    pub y: &'a Point,
    pub g_dot_s: f64,
    pub sy: f64,
    pub f_t: f64,
    pub f_next: f64,
}

pub fn weighted_quantities(
    step: &StepInput<'_>,
    f_star: f64,
    weight: &WeightScheme,
) -> Result<Weighted> {
    let gap = step.f_t - f_star;
    if !(gap > 0.0) {
        return Err(Error::Stationary("zero optimality gap"));
    }
    if !(step.g_dot_s < 0.0) {
        return Err(Error::Stationary("zero step"));
    }
    let gh = weight.lower(step.g);
    let sh = weight.lift(step.s);
    let yh = weight.lower(step.y);
    let g_sq = gh.norm_squared();
    let s_sq = sh.norm_squared();
    let y_sq = yh.norm_squared();
    if !(g_sq > 0.0 && s_sq > 0.0 && step.sy > 0.0) {
        return Err(Error::Stationary("degenerate weighted step"));
    }
    let neg_gs = -step.g_dot_s;
    Ok(Weighted {
        p_hat: (step.f_t - step.f_next) / neg_gs,
        q_hat: g_sq / gap,
        m_hat: step.sy / s_sq,
        n_hat: step.sy / neg_gs,
        cos_theta: neg_gs / (g_sq.sqrt() * s_sq.sqrt()),
        y_ratio: y_sq / step.sy,
        g_sq,
        gs_weighted: gh.dot(&sh),
        ys_weighted: yh.dot(&sh),
    })
}

/// Per-record diagnostics under one weight.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsRow {
    pub t: usize,
    pub c_t: Option<f64>,
    pub rho_t: Option<f64>,
    pub weighted: Option<Weighted>,
    /// `Psi(B^_t)`, propagated from `B_0` through the exact update identity.
    pub psi: Option<f64>,
    /// Lemma-1 ratio from scalars alone; available on every step, including gradient descent.
    pub p_hat_scalar: Option<f64>,
}

fn initial_psi(init: &InitialMatrix, weight: &WeightScheme) -> Result<f64> {
    match init {
        InitialMatrix::Scaled(c) => weight.psi_of_scaled(*c),
        InitialMatrix::Custom(b) => weight.psi_of(b),
    }
}

/// Diagnostics for every record of `trace` under `weight`.
///
/// `Psi(B^_{t+1})` follows from `Psi(B^_t)` because `B_t s_t = -eta_t g_t`:
/// the trace drops by `eta |g^|^2 / (-g's)`, gains `|y^|^2 / s'y`, and the log-determinant
/// moves by `log(s'y / (-eta g's))`.
pub fn diagnose(
    trace: &RunTrace,
    problem: &Problem,
    weight: &WeightScheme,
    h_star: &DMatrix<f64>,
) -> Result<Vec<DiagnosticsRow>> {
    let f_star = trace.f_star;
    let mut psi = match (&trace.initial, trace.config.method) {
        (Some(init), Method::Bfgs) => Some(initial_psi(init, weight)?),
        _ => None,
    };
    let mut rows = Vec::with_capacity(trace.records.len());
    for (k, rec) in trace.records.iter().enumerate() {
        let mut row = DiagnosticsRow {
            t: rec.t,
            c_t: Some(compute_ct(rec.f, f_star, problem.mu(), problem.m_bound())?),
            psi,
            ..Default::default()
        };
        let next = trace.records.get(k + 1);
        if let (Some(step), Some(next)) = (&rec.step, next) {
            row.p_hat_scalar = Some((rec.f - next.f) / (-step.g_dot_s));
            match (&step.vectors, trace.config.method) {
                (Some(v), Method::Bfgs) => {
                    let input = StepInput {
                        g: &v.g,
                        s: &v.s,
                        y: &v.y,
                        g_dot_s: step.g_dot_s,
                        sy: step.sy_dot,
                        f_t: rec.f,
                        f_next: next.f,
                    };
                    row.weighted = weighted_quantities(&input, f_star, weight).ok();
                    row.rho_t = compute_rho(&v.g, &v.d, h_star).ok();
                    psi = match (psi, row.weighted) {
                        (Some(p), Some(w)) => {
                            let neg_gs = -step.g_dot_s;
                            Some(
                                p - step.eta * w.g_sq / neg_gs + w.y_ratio
                                    - (step.sy_dot / (step.eta * neg_gs)).ln(),
                            )
                        }
                        _ => None,
                    };
                }
                _ => psi = None,
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Both weightings of a run plus the constants the verifiers need.
#[derive(Debug, Clone)]
pub struct RunAnalysis {
    pub meta: RunMeta,
    /// Diagnostics with `P = hessian(x*)`.
    pub star: Vec<DiagnosticsRow>,
    /// Diagnostics with `P = L I`.
    pub scaled: Vec<DiagnosticsRow>,
    pub h_star: DMatrix<f64>,
}

pub fn analyze(trace: &RunTrace, problem: &Problem, runid: &str) -> Result<RunAnalysis> {
    if trace.records.is_empty() {
        return Err(Error::InvalidInput("trace has no records".into()));
    }
    let star_w = WeightScheme::hessian_at_star(problem)?;
    let scaled_w = WeightScheme::scaled_identity_l(problem);
    let h_star = star_w.matrix();
    let star = diagnose(trace, problem, &star_w, &h_star)?;
    let scaled = diagnose(trace, problem, &scaled_w, &h_star)?;
    let gap0 = trace.gap0();
    let (kind, delta) = match problem.kind() {
        ProblemKind::CubicChain { delta, .. } => ("cubic", Some(*delta)),
        ProblemKind::Quadratic { .. } => ("quadratic", None),
    };
    let meta = RunMeta {
        runid: runid.to_string(),
        problem: kind.to_string(),
        dim: problem.dim(),
        delta,
        kappa: problem.kappa(),
        mu: problem.mu(),
        l_bound: problem.l_bound(),
        m_bound: problem.m_bound(),
        f_star: trace.f_star,
        gap0,
        method: trace.config.method,
        init: trace.config.init.label().to_string(),
        init_scale: trace.initial.as_ref().and_then(|i| i.scale()),
        alpha: if trace.config.method == Method::Bfgs {
            trace.config.wolfe.alpha
        } else {
            trace.config.gd_alpha
        },
        beta: trace.config.wolfe.beta,
        seed: trace.config.seed,
        psi_bbar0: scaled.first().and_then(|r| r.psi),
        psi_btilde0: star.first().and_then(|r| r.psi),
        c0: star[0].c_t.unwrap_or(f64::NAN),
        status: trace.status,
        steps: trace.steps(),
    };
    Ok(RunAnalysis {
        meta,
        star,
        scaled,
        h_star,
    })
}

impl RunAnalysis {
    /// The rows written to the trace CSV.
    pub fn table(&self, trace: &RunTrace) -> TraceTable {
        let gap0 = self.meta.gap0;
        let rows = trace
            .records
            .iter()
            .zip(self.star.iter().zip(&self.scaled))
            .map(|(rec, (st, sc))| {
                let w = st.weighted;
                TraceRow {
                    t: rec.t,
                    f: rec.f,
                    f_gap_ratio: rec.f_gap / gap0,
                    grad_norm: rec.grad_norm,
                    eta: rec.step.as_ref().map(|s| s.eta),
                    lambda_t: rec.step.as_ref().map(|s| s.loops),
                    evals: rec.step.as_ref().map(|s| s.evals),
                    unit_step: rec.step.as_ref().map(|s| s.unit_step_accepted),
                    p_hat: w.map(|w| w.p_hat).or(st.p_hat_scalar),
                    q_hat: w.map(|w| w.q_hat),
                    m_hat: w.map(|w| w.m_hat),
                    n_hat: w.map(|w| w.n_hat),
                    cos_theta: w.map(|w| w.cos_theta),
                    c_t: st.c_t,
                    rho_t: st.rho_t,
                    psi_bbar: sc.psi,
                    psi_btilde: st.psi,
                }
            })
            .collect();
        TraceTable {
            meta: self.meta.clone(),
            rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ct_examples() {
        assert_eq!(compute_ct(1.0, 1.0, 1.0, 5.0).unwrap(), 0.0);
        assert_eq!(compute_ct(3.0, 1.0, 2.0, 0.0).unwrap(), 0.0);
        assert!((compute_ct(0.5, 0.0, 1.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(compute_ct(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rho_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let g = Point::from_vec(vec![1.0, 1.0]);
        let newton = Point::from_vec(vec![-1.0, -0.25]);
        assert!((compute_rho(&g, &newton, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((compute_rho(&g, &(&newton * 0.5), &a).unwrap() - 2.0).abs() < 1e-15);
        assert!((compute_rho(&g, &(-&g), &a).unwrap() - 0.4).abs() < 1e-15);
        assert!(compute_rho(&g, &Point::zeros(2), &a).is_err());
    }

    #[test]
    fn newton_step_on_unit_quadratic() {
        let p = Problem::quadratic(vec![1.0]).unwrap();
        let w = WeightScheme::scaled_identity_l(&p);
        let g = Point::from_vec(vec![1.0]);
        let s = Point::from_vec(vec![-1.0]);
        let y = Point::from_vec(vec![-1.0]);
        let q = weighted_quantities(
            &StepInput {
                g: &g,
                s: &s,
                y: &y,
                g_dot_s: -1.0,
                sy: 1.0,
                f_t: 0.5,
                f_next: 0.0,
            },
            0.0,
            &w,
        )
        .unwrap();
        assert_eq!(
            (q.p_hat, q.q_hat, q.m_hat, q.n_hat, q.cos_theta),
            (0.5, 2.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(q.factor(), 1.0);
    }
}

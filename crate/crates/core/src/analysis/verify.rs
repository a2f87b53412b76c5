//! Per-iteration checks of the identities and inequalities satisfied by BFGS traces.

use std::fmt::Write as _;

use crate::analysis::bounds::{
    bad_set_bound, bound_linesearch_lambda, bound_prop_second, bound_thm1, bound_thm2, bound_thm3,
    loop_bound, sigma, thm2_threshold, Envelope,
};
use crate::analysis::deltas::DeltaConstants;
use crate::analysis::diagnostics::{DiagnosticsRow, RunAnalysis};
use crate::analysis::potential::omega;
use crate::analysis::table::{fmt_f64, TraceTable};
use crate::analysis::weights::WeightScheme;
use crate::driver::{Method, RunTrace};
use crate::error::Result;
use crate::linalg::sym_eigenvalues;
use crate::objective::Problem;

pub const LEMMA1_TOL: f64 = 1e-12;
pub const IDENTITY_TOL: f64 = 1e-8;
pub const IDENTITY_FLOOR: f64 = 1e-14;
pub const ENVELOPE_TOL: f64 = 1e-9;
pub const RATIO_TOL: f64 = 1e-8;
pub const LOOP_SLACK: f64 = 1.0;
pub const AVERAGE_LOOP_SLACK: f64 = 0.5;
/// Largest number of iterates at which the Hessian sandwich is evaluated.
pub const SANDWICH_SAMPLES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
    NotEvaluated,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::NotApplicable => "not_applicable",
            Self::NotEvaluated => "not_evaluated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// Iterations at which the inequality was evaluated with a non-vacuous right-hand side.
    pub checked: usize,
    /// Iterations where the envelope exceeded one.
    pub vacuous: usize,
    pub t_range: Option<(usize, usize)>,
    /// Smallest slack `allowed - observed` seen; negative means a violation.
    pub margin: Option<f64>,
    pub violations: usize,
    /// `(t, slack)` of the first violation.
    pub first_failure: Option<(usize, f64)>,
    pub note: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }

    fn skipped(name: &str, status: CheckStatus, note: &str) -> Self {
        Self {
            name: name.to_string(),
            status,
            checked: 0,
            vacuous: 0,
            t_range: None,
            margin: None,
            violations: 0,
            first_failure: None,
            note: note.to_string(),
        }
    }
}

struct Check {
    name: &'static str,
    checked: usize,
    vacuous: usize,
    t_range: Option<(usize, usize)>,
    margin: Option<f64>,
    violations: usize,
    first_failure: Option<(usize, f64)>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            vacuous: 0,
            t_range: None,
            margin: None,
            violations: 0,
            first_failure: None,
        }
    }

    fn touch(&mut self, t: usize) {
        self.t_range = Some(match self.t_range {
            None => (t, t),
            Some((a, b)) => (a.min(t), b.max(t)),
        });
    }

    fn observe(&mut self, t: usize, slack: f64) {
        self.touch(t);
        self.checked += 1;
        self.margin = Some(match self.margin {
            None => slack,
            Some(m) if slack.is_nan() => m.min(f64::NEG_INFINITY),
            Some(m) => m.min(slack),
        });
        if !(slack >= 0.0) {
            self.violations += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some((t, slack));
            }
        }
    }

    fn envelope(&mut self, t: usize, env: Envelope, observed: f64, tol: f64) {
        match env {
            Envelope::NotApplicable { .. } => {}
            e if e.is_vacuous() => {
                self.touch(t);
                self.vacuous += 1;
            }
            Envelope::Bound(v) => self.observe(t, v + tol - observed),
        }
    }

    fn finish(self, note: impl Into<String>) -> CheckResult {
        let status = if self.violations > 0 {
            CheckStatus::Fail
        } else if self.checked == 0 {
            // nothing evaluated, or every bound was >= 1
            CheckStatus::NotApplicable
        } else {
            CheckStatus::Pass
        };
        CheckResult {
            name: self.name.to_string(),
            status,
            checked: self.checked,
            vacuous: self.vacuous,
            t_range: self.t_range,
            margin: self.margin,
            violations: self.violations,
            first_failure: self.first_failure,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub runid: String,
    pub checks: Vec<CheckResult>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.status == CheckStatus::Fail)
    }

    pub fn extend(&mut self, other: BoundReport) {
        self.checks.extend(other.checks);
    }

    /// Human-readable table followed by one `check=... pass=... margin=...` line per check.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run {}", self.runid);
        for c in &self.checks {
            let range = c
                .t_range
                .map(|(a, b)| format!("t={a}..{b}"))
                .unwrap_or_else(|| "t=-".into());
            let margin = c
                .margin
                .map(|m| format!("{m:.3e}"))
                .unwrap_or_else(|| "-".into());
            let _ = write!(
                out,
                "  {:<30} {:<14} {:<14} checked={:<6} vacuous={:<6} margin={}",
                c.name,
                c.status.label(),
                range,
                c.checked,
                c.vacuous,
                margin
            );
            if let Some((t, s)) = c.first_failure {
                let _ = write!(out, " first_failure=t{t}:{s:.3e}");
            }
            if !c.note.is_empty() {
                let _ = write!(out, "  ({})", c.note);
            }
            out.push('\n');
        }
        out.push_str("# machine-readable\n");
        for c in &self.checks {
            let margin = c.margin.map(fmt_f64).unwrap_or_else(|| "nan".into());
            let _ = writeln!(
                out,
                "check={} pass={} margin={} status={}",
                c.name,
                c.passed(),
                margin,
                c.status.label()
            );
        }
        out
    }
}

/// Checks that need only the persisted table and run constants.
pub fn verify_table(table: &TraceTable) -> Result<BoundReport> {
    let meta = &table.meta;
    let rows = &table.rows;
    let bfgs = meta.method == Method::Bfgs;
    let (alpha, beta, kappa) = (meta.alpha, meta.beta, meta.kappa);
    let gap0 = meta.gap0;
    let gap = |k: usize| rows[k].f - meta.f_star;
    let steps: Vec<usize> = (0..rows.len().saturating_sub(1))
        .filter(|&k| rows[k].eta.is_some())
        .collect();
    let mut checks = Vec::new();

    let mut c = Check::new("monotonicity");
    for &k in &steps {
        c.observe(rows[k].t, rows[k].f - rows[k + 1].f);
    }
    checks.push(c.finish(""));

    let mut c = Check::new("lemma1_armijo");
    for &k in &steps {
        if let Some(p) = rows[k].p_hat {
            c.observe(rows[k].t, p - alpha + LEMMA1_TOL);
        }
    }
    checks.push(c.finish(format!("p_hat >= {alpha}")));

    if !bfgs {
        for name in [
            "lemma1_curvature",
            "one_step_identity",
            "q_lower_bound",
            "potential_recursion_capped",
            "omega_sum",
            "unit_step_sufficiency",
            "unit_step_ratios",
            "theorem1",
            "second_linear_rate",
            "theorem2",
            "theorem3",
            "bad_set_size",
            "loop_bound",
            "theorem4_average_loops",
        ] {
            checks.push(CheckResult::skipped(
                name,
                CheckStatus::NotApplicable,
                "quasi-Newton check on a gradient-descent trace",
            ));
        }
        return Ok(BoundReport {
            runid: meta.runid.clone(),
            checks,
        });
    }

    let deltas = DeltaConstants::new(alpha, beta)?;

    let mut c = Check::new("lemma1_curvature");
    for &k in &steps {
        if let Some(n) = rows[k].n_hat {
            c.observe(rows[k].t, n - (1.0 - beta) + LEMMA1_TOL);
        }
    }
    checks.push(c.finish(format!("n_hat >= {}", 1.0 - beta)));

    let mut c = Check::new("one_step_identity");
    let mut floor_skipped = 0;
    for &k in &steps {
        let r = &rows[k];
        let (Some(p), Some(q), Some(m), Some(n), Some(cos)) =
            (r.p_hat, r.q_hat, r.m_hat, r.n_hat, r.cos_theta)
        else {
            continue;
        };
        let g = gap(k);
        if !(g >= IDENTITY_FLOOR * gap0) || g <= 0.0 {
            floor_skipped += 1;
            continue;
        }
        let factor = p * q * n * cos * cos / m;
        let residual = (gap(k + 1) - (1.0 - factor) * g).abs() / g;
        c.observe(r.t, IDENTITY_TOL - residual);
    }
    checks.push(c.finish(format!("{floor_skipped} rows below the gap floor skipped")));

    let mut c = Check::new("q_lower_bound");
    for &k in &steps {
        if let (Some(q), Some(ct)) = (rows[k].q_hat, rows[k].c_t) {
            c.observe(rows[k].t, q - 2.0 / (1.0 + ct).powi(2) + RATIO_TOL);
        }
    }
    checks.push(c.finish("P = hessian(x*)"));

    let mut c = Check::new("potential_recursion_capped");
    for &k in &steps {
        let (r, nx) = (&rows[k], &rows[k + 1]);
        if let (Some(p0), Some(p1), Some(cos), Some(m), Some(ct)) =
            (r.psi_btilde, nx.psi_btilde, r.cos_theta, r.m_hat, r.c_t)
        {
            let allowed = p0 + ct + (cos * cos / m).ln() + RATIO_TOL * (1.0 + p0.abs());
            c.observe(r.t, allowed - p1);
        }
    }
    checks.push(c.finish("|y^|^2/y^'s^ replaced by its cap 1 + C_t"));

    let mut c = Check::new("omega_sum");
    match meta.psi_btilde0 {
        Some(psi0) => {
            let (mut lhs, mut sum_c) = (0.0, 0.0);
            for &k in &steps {
                let (Some(rho), Some(ct)) = (rows[k].rho_t, rows[k].c_t) else {
                    break;
                };
                lhs += omega(rho - 1.0)?;
                sum_c += ct;
                c.observe(rows[k].t, psi0 + 2.0 * sum_c + RATIO_TOL - lhs);
            }
            checks.push(c.finish(""));
        }
        None => checks.push(CheckResult::skipped(
            "omega_sum",
            CheckStatus::NotEvaluated,
            "no initial potential",
        )),
    }

    let mut c = Check::new("unit_step_sufficiency");
    for &k in &steps {
        let r = &rows[k];
        if let (Some(ct), Some(rho), Some(unit)) = (r.c_t, r.rho_t, r.unit_step) {
            if ct <= deltas.d1 && rho >= deltas.d2 && rho <= deltas.d3 {
                c.observe(r.t, if unit { 0.0 } else { -1.0 });
            }
        }
    }
    checks.push(c.finish("C_t <= delta1 and rho_t in [delta2, delta3] imply a unit step"));

    let mut c = Check::new("unit_step_ratios");
    for &k in &steps {
        let r = &rows[k];
        if r.unit_step != Some(true) {
            continue;
        }
        if let (Some(p), Some(n), Some(ct), Some(rho)) = (r.p_hat, r.n_hat, r.c_t, r.rho_t) {
            let sp = p - (1.0 - (1.0 + ct) / (2.0 * rho)) + RATIO_TOL;
            let sn = n - 1.0 / ((1.0 + ct) * rho) + RATIO_TOL;
            c.observe(r.t, sp.min(sn));
        }
    }
    checks.push(c.finish(""));

    let psi_bar = meta.psi_bbar0;
    let psi_tilde = meta.psi_btilde0;
    let c0 = meta.c0;

    let mut c = Check::new("theorem1");
    if let Some(pb) = psi_bar {
        for r in rows.iter().filter(|r| r.t >= 1) {
            c.envelope(
                r.t,
                bound_thm1(r.t, pb, kappa, alpha, beta)?,
                r.f_gap_ratio,
                ENVELOPE_TOL,
            );
        }
    }
    checks.push(c.finish(""));

    let mut c = Check::new("second_linear_rate");
    if let Some(pt) = psi_tilde {
        let mut sum_c = 0.0;
        let mut complete = true;
        for (k, r) in rows.iter().enumerate() {
            if r.t >= 1 && complete {
                c.envelope(
                    r.t,
                    bound_prop_second(r.t, pt, sum_c, alpha, beta)?,
                    r.f_gap_ratio,
                    ENVELOPE_TOL,
                );
            }
            match rows[k].c_t {
                Some(ct) => sum_c += ct,
                None => complete = false,
            }
        }
    }
    checks.push(c.finish(""));

    let mut c = Check::new("theorem2");
    let mut note = String::new();
    if let (Some(pt), Some(pb)) = (psi_tilde, psi_bar) {
        note = format!(
            "threshold {:.1}",
            thm2_threshold(pt, pb, c0, kappa, alpha, beta)
        );
        for r in rows.iter().filter(|r| r.t >= 1) {
            c.envelope(
                r.t,
                bound_thm2(r.t, pt, pb, c0, kappa, alpha, beta)?,
                r.f_gap_ratio,
                ENVELOPE_TOL,
            );
        }
    }
    checks.push(c.finish(note));

    let mut c = Check::new("theorem3");
    if let (Some(pt), Some(pb)) = (psi_tilde, psi_bar) {
        for r in rows.iter().filter(|r| r.t >= 1) {
            c.envelope(
                r.t,
                bound_thm3(r.t, pt, pb, c0, kappa, alpha, beta)?,
                r.f_gap_ratio,
                ENVELOPE_TOL,
            );
        }
    }
    checks.push(c.finish(""));

    let mut c = Check::new("bad_set_size");
    if let (Some(pt), Some(pb)) = (psi_tilde, psi_bar) {
        let rhos: Vec<f64> = steps.iter().filter_map(|&k| rows[k].rho_t).collect();
        if !rhos.is_empty() {
            let bad = rhos
                .iter()
                .filter(|r| **r < deltas.d2 || **r > deltas.d3)
                .count();
            let bound = bad_set_bound(pt, pb, c0, kappa, alpha, beta)?;
            c.observe(rows[steps[0]].t, bound - bad as f64);
            c.touch(rows[*steps.last().expect("non-empty")].t);
        }
    }
    checks.push(c.finish("finite-run count against the whole-run bound"));

    let mut c = Check::new("loop_bound");
    for &k in &steps {
        let r = &rows[k];
        if let (Some(l), Some(ct), Some(rho)) = (r.lambda_t, r.c_t, r.rho_t) {
            c.observe(
                r.t,
                loop_bound(ct, rho, alpha, beta) + LOOP_SLACK - l as f64,
            );
        }
    }
    checks.push(c.finish(format!("slack {LOOP_SLACK}")));

    let mut c = Check::new("theorem4_average_loops");
    if let (Some(pt), Some(pb)) = (psi_tilde, psi_bar) {
        let sg = sigma(pb, kappa, c0, alpha, beta);
        let mut total = 0usize;
        for (i, &k) in steps.iter().enumerate() {
            let Some(l) = rows[k].lambda_t else { break };
            total += l;
            let t = i + 1;
            let avg = total as f64 / t as f64;
            c.observe(
                rows[k].t,
                bound_linesearch_lambda(t, sg, pt, alpha, beta)? + AVERAGE_LOOP_SLACK - avg,
            );
        }
    }
    checks.push(c.finish(format!("slack {AVERAGE_LOOP_SLACK}")));

    Ok(BoundReport {
        runid: meta.runid.clone(),
        checks,
    })
}

fn recursion_check(
    name: &'static str,
    rows: &[DiagnosticsRow],
    exact: &[(usize, f64)],
) -> CheckResult {
    let mut c = Check::new(name);
    for pair in exact.windows(2) {
        let ((t0, p0), (t1, p1)) = (pair[0], pair[1]);
        if t1 != t0 + 1 {
            continue;
        }
        let Some(w) = rows.iter().find(|r| r.t == t0).and_then(|r| r.weighted) else {
            continue;
        };
        let allowed = p0 + w.y_ratio - 1.0 + (w.cos_theta * w.cos_theta / w.m_hat).ln();
        c.observe(t0, allowed + RATIO_TOL * (1.0 + p0.abs()) - p1);
    }
    c.finish("exact potentials from matrix snapshots")
}

/// Checks that need the in-memory trace: vectors, snapshots and the Hessian oracle.
pub fn verify_extended(
    trace: &RunTrace,
    problem: &Problem,
    analysis: &RunAnalysis,
) -> Result<BoundReport> {
    let runid = analysis.meta.runid.clone();
    let names = [
        "potential_recursion_star",
        "potential_recursion_l",
        "psi_snapshot_consistency",
        "y_ratio_cap_l",
        "y_ratio_cap_star",
        "q_lower_bound_l",
        "one_step_identity_l",
        "weighted_invariance",
        "hessian_sandwich",
    ];
    if trace.config.method != Method::Bfgs {
        return Ok(BoundReport {
            runid,
            checks: names
                .iter()
                .map(|n| {
                    CheckResult::skipped(
                        n,
                        CheckStatus::NotApplicable,
                        "quasi-Newton check on a gradient-descent trace",
                    )
                })
                .collect(),
        });
    }
    let mut checks = Vec::new();
    let star_w = WeightScheme::hessian_at_star(problem)?;
    let l_w = WeightScheme::scaled_identity_l(problem);

    if trace.snapshots.is_empty() {
        for n in &names[..3] {
            checks.push(CheckResult::skipped(
                n,
                CheckStatus::NotEvaluated,
                "matrix snapshots disabled",
            ));
        }
    } else {
        let mut exact_star = Vec::new();
        let mut exact_l = Vec::new();
        for (t, b) in &trace.snapshots {
            exact_star.push((*t, star_w.psi_of(b)?));
            exact_l.push((*t, l_w.psi_of(b)?));
        }
        checks.push(recursion_check(
            "potential_recursion_star",
            &analysis.star,
            &exact_star,
        ));
        checks.push(recursion_check(
            "potential_recursion_l",
            &analysis.scaled,
            &exact_l,
        ));
        let mut c = Check::new("psi_snapshot_consistency");
        for ((t, ps), (_, pl)) in exact_star.iter().zip(&exact_l) {
            let tracked_s = analysis.star.iter().find(|r| r.t == *t).and_then(|r| r.psi);
            let tracked_l = analysis
                .scaled
                .iter()
                .find(|r| r.t == *t)
                .and_then(|r| r.psi);
            if let (Some(a), Some(b)) = (tracked_s, tracked_l) {
                let err =
                    ((a - ps).abs() / (1.0 + ps.abs())).max((b - pl).abs() / (1.0 + pl.abs()));
                c.observe(*t, 1e-6 - err);
            }
        }
        checks.push(c.finish("update identity against Cholesky-evaluated potentials"));
    }

    let mut c = Check::new("y_ratio_cap_l");
    for r in &analysis.scaled {
        if let Some(w) = r.weighted {
            c.observe(r.t, 1.0 + 1e-10 - w.y_ratio);
        }
    }
    checks.push(c.finish("|y^|^2/y^'s^ <= 1 with P = L I"));

    let mut c = Check::new("y_ratio_cap_star");
    for r in &analysis.star {
        if let (Some(w), Some(ct)) = (r.weighted, r.c_t) {
            c.observe(r.t, 1.0 + ct + RATIO_TOL - w.y_ratio);
        }
    }
    checks.push(c.finish("|y^|^2/y^'s^ <= 1 + C_t with P = hessian(x*)"));

    let mut c = Check::new("q_lower_bound_l");
    let kappa = problem.kappa();
    for r in &analysis.scaled {
        if let Some(w) = r.weighted {
            c.observe(r.t, w.q_hat - 2.0 / kappa + 1e-10);
        }
    }
    checks.push(c.finish("P = L I"));

    let mut c = Check::new("one_step_identity_l");
    let gap0 = trace.gap0();
    for (k, r) in analysis.scaled.iter().enumerate() {
        let (Some(w), Some(next)) = (r.weighted, trace.records.get(k + 1)) else {
            continue;
        };
        let g = trace.records[k].f_gap;
        if g > 0.0 && g >= IDENTITY_FLOOR * gap0 {
            let residual = (next.f_gap - (1.0 - w.factor()) * g).abs() / g;
            c.observe(r.t, IDENTITY_TOL - residual);
        }
    }
    checks.push(c.finish("P = L I"));

    let mut c = Check::new("weighted_invariance");
    for (rec, r) in trace.records.iter().zip(&analysis.star) {
        if let (Some(step), Some(w)) = (&rec.step, r.weighted) {
            let scale = step.g_dot_s.abs().max(step.sy_dot.abs());
            let err = (w.gs_weighted - step.g_dot_s)
                .abs()
                .max((w.ys_weighted - step.sy_dot).abs())
                / scale;
            c.observe(r.t, 1e-10 - err);
        }
    }
    checks.push(c.finish("weighted inner products against unweighted ones"));

    let mut c = Check::new("hessian_sandwich");
    let with_x: Vec<_> = trace
        .records
        .iter()
        .zip(&analysis.star)
        .filter_map(|(rec, r)| {
            let v = rec.step.as_ref()?.vectors.as_ref()?;
            Some((rec.t, &v.x, r.c_t?))
        })
        .collect();
    let stride = with_x.len().div_ceil(SANDWICH_SAMPLES).max(1);
    let x_star = &problem.reference()?.x_star;
    let h_star = problem.hessian(x_star);
    let (_, inv_sqrt) = crate::linalg::sym_sqrt_pair(&h_star)?;
    for (i, (t, x, ct)) in with_x.iter().enumerate() {
        if i % stride != 0 && i + 1 != with_x.len() {
            continue;
        }
        let m = &inv_sqrt * problem.hessian(x) * &inv_sqrt;
        let ev = sym_eigenvalues(&m);
        let lo = ev[0] - (1.0 / (1.0 + ct) - RATIO_TOL);
        let hi = (1.0 + ct + RATIO_TOL) - ev[ev.len() - 1];
        c.observe(*t, lo.min(hi));
    }
    checks.push(c.finish(format!("every {stride}-th iterate")));

    Ok(BoundReport { runid, checks })
}

/// Table checks followed by the in-memory extended checks.
pub fn verify_run(
    trace: &RunTrace,
    problem: &Problem,
    analysis: &RunAnalysis,
) -> Result<BoundReport> {
    let mut report = verify_table(&analysis.table(trace))?;
    report.extend(verify_extended(trace, problem, analysis)?);
    Ok(report)
}

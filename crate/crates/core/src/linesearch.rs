//! Armijo-Wolfe predicates, the log-bisection step search and plain backtracking.

use crate::error::{Error, Result};
use crate::objective::{Objective, Point};

pub const DEFAULT_MAX_LOOPS: usize = 100;
pub const ETA_MIN_CLAMP: f64 = 1e-16;
pub const ETA_MAX_CLAMP: f64 = 1e16;
pub const MAX_HALVINGS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub alpha: f64,
    pub beta: f64,
    pub max_loops: usize,
}

impl WolfeParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            max_loops: DEFAULT_MAX_LOOPS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_max_loops(mut self, max_loops: usize) -> Self {
        self.max_loops = max_loops;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1/2), got {}",
                self.alpha
            )));
        }
        if !(self.beta > self.alpha && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (alpha, 1), got {}",
                self.beta
            )));
        }
        if self.max_loops == 0 {
            return Err(Error::Config("max_loops must be positive".into()));
        }
        Ok(())
    }

    /// `alpha (1 - beta)`, the product that governs every rate bound.
    pub fn ab(&self) -> f64 {
        self.alpha * (1.0 - self.beta)
    }
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.9,
            max_loops: DEFAULT_MAX_LOOPS,
        }
    }
}

fn require_descent(gd0: f64) -> Result<()> {
    if gd0 < 0.0 {
        Ok(())
    } else {
        Err(Error::NonDescent { gd: gd0 })
    }
}

/// Sufficient decrease `f(x + eta d) <= f(x) + alpha eta g'd`.
///
/// Evaluated as `f_eta - f0 <= alpha eta gd0`, so nearby values are compared without
/// first rounding `f0 + alpha eta gd0`.
pub fn armijo_holds(f0: f64, gd0: f64, f_eta: f64, eta: f64, alpha: f64) -> Result<bool> {
    require_descent(gd0)?;
    Ok(f_eta - f0 <= alpha * eta * gd0)
}

/// Curvature condition `g(x + eta d)'d >= beta g'd`.
pub fn curvature_holds(gd_eta: f64, gd0: f64, beta: f64) -> Result<bool> {
    require_descent(gd0)?;
    Ok(gd_eta >= beta * gd0)
}

/// Armijo plus `|g(x + eta d)'d| <= beta |g'd|`.
pub fn strong_wolfe_holds(
    f0: f64,
    gd0: f64,
    f_eta: f64,
    gd_eta: f64,
    eta: f64,
    params: &WolfeParams,
) -> Result<bool> {
    params.validate()?;
    Ok(armijo_holds(f0, gd0, f_eta, eta, params.alpha)? && gd_eta.abs() <= params.beta * gd0.abs())
}

/// `-c1 eta g'd <= f0 - f_eta <= -c2 eta g'd` with `0 < c1 <= c2 < 1`.
pub fn armijo_goldstein_holds(
    f0: f64,
    gd0: f64,
    f_eta: f64,
    eta: f64,
    c1: f64,
    c2: f64,
) -> Result<bool> {
    if !(c1 > 0.0 && c1 <= c2 && c2 < 1.0) {
        return Err(Error::Config(format!(
            "Armijo-Goldstein needs 0 < c1 <= c2 < 1, got c1 = {c1}, c2 = {c2}"
        )));
    }
    require_descent(gd0)?;
    let decrease = f0 - f_eta;
    Ok(-c1 * eta * gd0 <= decrease && decrease <= -c2 * eta * gd0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    ArmijoFailed,
    CurvatureFailed,
    Accepted,
}

/// One loop of the log-bisection search.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub eta: f64,
    pub value: f64,
    /// `g(x + eta d)'d`; absent when Armijo failed and no gradient was queried.
    pub slope: Option<f64>,
    pub outcome: TrialOutcome,
    /// `(eta_min, eta_max)` in force when this trial was proposed.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub eta: f64,
    pub loops: usize,
    pub evals: usize,
    pub unit_step_accepted: bool,
    pub bracket_final: (f64, f64),
    pub value: f64,
    pub gradient: Point,
    pub trials: Vec<Trial>,
}

fn next_trial(scale: f64, i: usize, eta_min: f64, eta_max: f64) -> f64 {
    if eta_min > 0.0 && eta_max.is_finite() {
        (eta_min * eta_max).sqrt()
    } else {
        let e = (1u64 << (i + 1).min(62)) - 1;
        scale.powf(e as f64)
    }
}

/// Log-bisection search for a step satisfying the Armijo-Wolfe conditions.
///
/// `f0` and `gd0` are the caller's cached `f(x)` and `g(x)'d`; only trial points are queried.
pub fn log_bisection<O: Objective + ?Sized>(
    objective: &O,
    x: &Point,
    d: &Point,
    f0: f64,
    gd0: f64,
    params: &WolfeParams,
) -> Result<LineSearchResult> {
    params.validate()?;
    require_descent(gd0)?;
    if x.len() != objective.dim() || d.len() != objective.dim() {
        return Err(Error::InvalidInput("line search dimension mismatch".into()));
    }
    let mut eta = 1.0_f64;
    let mut eta_min = 0.0_f64;
    let mut eta_max = f64::INFINITY;
    let mut evals = 0;
    let mut trials = Vec::new();
    let mut at_clamp = false;

    for i in 0..params.max_loops {
        let xt = x + d * eta;
        let f_eta = objective.value(&xt);
        evals += 1;
        let bracket = (eta_min, eta_max);
        let proposed;
        if !armijo_holds(f0, gd0, f_eta, eta, params.alpha)? {
            trials.push(Trial {
                eta,
                value: f_eta,
                slope: None,
                outcome: TrialOutcome::ArmijoFailed,
                bracket,
            });
            eta_max = eta;
            proposed = next_trial(0.5, i, eta_min, eta_max);
        } else {
            let g_eta = objective.gradient(&xt);
            evals += 1;
            let gd_eta = g_eta.dot(d);
            if curvature_holds(gd_eta, gd0, params.beta)? {
                trials.push(Trial {
                    eta,
                    value: f_eta,
                    slope: Some(gd_eta),
                    outcome: TrialOutcome::Accepted,
                    bracket,
                });
                return Ok(LineSearchResult {
                    eta,
                    loops: i + 1,
                    evals,
                    unit_step_accepted: i == 0,
                    bracket_final: (eta_min, eta_max),
                    value: f_eta,
                    gradient: g_eta,
                    trials,
                });
            }
            trials.push(Trial {
                eta,
                value: f_eta,
                slope: Some(gd_eta),
                outcome: TrialOutcome::CurvatureFailed,
                bracket,
            });
            eta_min = eta;
            proposed = next_trial(2.0, i, eta_min, eta_max);
        }
        if (ETA_MIN_CLAMP..=ETA_MAX_CLAMP).contains(&proposed) {
            eta = proposed;
        } else if at_clamp || proposed.is_nan() {
            return Err(Error::Bracketing { trials });
        } else {
            at_clamp = true;
            eta = proposed.clamp(ETA_MIN_CLAMP, ETA_MAX_CLAMP);
            if eta == trials.last().map(|t| t.eta).unwrap_or(f64::NAN) {
                return Err(Error::Bracketing { trials });
            }
        }
    }
    Err(Error::Bracketing { trials })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktrackResult {
    pub eta: f64,
    pub halvings: usize,
    pub evals: usize,
    pub value: f64,
}

/// Largest `eta` in `{shrink^k}` satisfying the Armijo condition.
pub fn backtracking<O: Objective + ?Sized>(
    objective: &O,
    x: &Point,
    d: &Point,
    f0: f64,
    gd0: f64,
    alpha: f64,
    shrink: f64,
) -> Result<BacktrackResult> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::Config(format!(
            "shrink must lie in (0, 1), got {shrink}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    require_descent(gd0)?;
    let mut eta = 1.0;
    for k in 0..=MAX_HALVINGS {
        let f_eta = objective.value(&(x + d * eta));
        if armijo_holds(f0, gd0, f_eta, eta, alpha)? {
            return Ok(BacktrackResult {
                eta,
                halvings: k,
                evals: k + 1,
                value: f_eta,
            });
        }
        eta *= shrink;
    }
    Err(Error::Backtracking {
        halvings: MAX_HALVINGS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Problem;

    fn p(x: f64) -> Point {
        Point::from_vec(vec![x])
    }

    fn params() -> WolfeParams {
        WolfeParams::new(0.25, 0.75).unwrap()
    }

    fn search(eig: f64, x: f64, d: f64) -> LineSearchResult {
        let prob = Problem::quadratic(vec![eig]).unwrap();
        let (f0, g0) = prob.value_and_gradient(&p(x));
        log_bisection(&prob, &p(x), &p(d), f0, g0[0] * d, &params()).unwrap()
    }

    #[test]
    fn predicate_examples() {
        assert!(armijo_holds(0.5, -1.0, 0.0, 1.0, 0.25).unwrap());
        assert!(!armijo_holds(2.0, -16.0, 18.0, 1.0, 0.25).unwrap());
        assert!(curvature_holds(0.0, -1.0, 0.75).unwrap());
        assert!(!curvature_holds(-1.0, -1.0, 0.75).unwrap());
        assert!(!curvature_holds(-0.9, -1.0, 0.75).unwrap());
        assert!(matches!(
            armijo_holds(0.5, 0.0, 0.0, 1.0, 0.25),
            Err(Error::NonDescent { .. })
        ));
    }

    #[test]
    fn weak_but_not_strong_wolfe_witness() {
        // f = x^2/2 at x = 1, d = -1, eta = 1.5
        let f_eta = 0.125;
        let gd_eta = 0.5;
        let loose = WolfeParams::new(0.25, 0.3).unwrap();
        assert!(armijo_holds(0.5, -1.0, f_eta, 1.5, 0.25).unwrap());
        assert!(curvature_holds(gd_eta, -1.0, 0.3).unwrap());
        assert!(!strong_wolfe_holds(0.5, -1.0, f_eta, gd_eta, 1.5, &loose).unwrap());
    }

    #[test]
    fn unit_step_accepted_on_exact_newton_step() {
        let r = search(1.0, 1.0, -1.0);
        assert_eq!((r.eta, r.loops), (1.0, 1));
        assert!(r.unit_step_accepted);
        assert!(r.evals <= 2);
    }

    #[test]
    fn halving_schedule_on_steep_quadratic() {
        let r = search(4.0, 1.0, -4.0);
        let etas: Vec<f64> = r.trials.iter().map(|t| t.eta).collect();
        assert_eq!(etas, vec![1.0, 0.5, 0.125]);
        assert_eq!(r.loops, 3);
        assert_eq!(r.trials[0].outcome, TrialOutcome::ArmijoFailed);
        assert_eq!(r.trials[1].outcome, TrialOutcome::ArmijoFailed);
    }

    #[test]
    fn doubling_schedule_on_short_direction() {
        let r = search(1.0, 1.0, -0.1);
        let etas: Vec<f64> = r.trials.iter().map(|t| t.eta).collect();
        assert_eq!(etas, vec![1.0, 2.0, 8.0]);
        assert_eq!(r.eta, 8.0);
        assert!(!r.unit_step_accepted);
    }

    #[test]
    fn geometric_mean_once_bracketed() {
        // Short direction with steep curvature forces doubling, then an Armijo failure.
        let r = search(1.0, 1.0, -0.01);
        for t in &r.trials {
            let (lo, hi) = t.bracket;
            if lo > 0.0 && hi.is_finite() {
                assert_eq!(t.eta, (lo * hi).sqrt());
                assert!(lo < t.eta && t.eta < hi);
            }
        }
    }

    #[test]
    fn backtracking_examples() {
        let prob = Problem::quadratic(vec![1.0]).unwrap();
        let r = backtracking(&prob, &p(1.0), &p(-1.0), 0.5, -1.0, 0.25, 0.5).unwrap();
        assert_eq!(r.eta, 1.0);
        let prob = Problem::quadratic(vec![4.0]).unwrap();
        let r = backtracking(&prob, &p(1.0), &p(-4.0), 2.0, -16.0, 0.25, 0.5).unwrap();
        assert_eq!(r.eta, 0.25);
        assert_eq!(r.halvings, 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(WolfeParams::new(0.5, 0.9).is_err());
        assert!(WolfeParams::new(0.3, 0.2).is_err());
        assert!(WolfeParams::new(0.1, 1.0).is_err());
        assert!(armijo_goldstein_holds(1.0, -1.0, 0.5, 1.0, 0.6, 0.4).is_err());
    }
}

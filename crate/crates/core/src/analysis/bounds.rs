//! Closed-form convergence envelopes, thresholds and complexity estimates.

use crate::analysis::deltas::DeltaConstants;
use crate::error::{Error, Result};

/// Right-hand side of a rate bound at a given iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// The iteration lies below the result's validity threshold.
    NotApplicable {
        threshold: f64,
    },
    Bound(f64),
}

impl Envelope {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Bound(v) => Some(*v),
            Self::NotApplicable { .. } => None,
        }
    }

    /// A bound of at least one says nothing about a gap ratio.
    pub fn is_vacuous(&self) -> bool {
        matches!(self, Self::Bound(v) if *v >= 1.0 || v.is_nan())
    }
}

/// `(1 - rate)^t`, with non-positive bases mapped to 0.
fn power(base: f64, t: f64) -> f64 {
    if base <= 0.0 {
        0.0
    } else {
        base.powf(t)
    }
}

fn require_t(t: usize) -> Result<f64> {
    if t < 1 {
        return Err(Error::InvalidInput(
            "envelopes are defined for t >= 1".into(),
        ));
    }
    Ok(t as f64)
}

/// First linear rate: `(1 - exp(-Psi(B_bar_0)/t) 2 alpha (1 - beta) / kappa)^t`.
pub fn bound_thm1(t: usize, psi_bbar0: f64, kappa: f64, alpha: f64, beta: f64) -> Result<Envelope> {
    let tf = require_t(t)?;
    let rate = (-psi_bbar0 / tf).exp() * 2.0 * alpha * (1.0 - beta) / kappa;
    Ok(Envelope::Bound(power(1.0 - rate, tf)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaledInit {
    /// `B0 = L I`.
    L,
    /// `B0 = mu I`.
    Mu,
}

/// First-rate corollary for `L I` and `mu I` starts.
///
/// For `mu I` the sharper `(1 - 2 alpha (1 - beta) / (3 kappa))^t` is used once `t >= d log kappa`.
pub fn bound_cor1(
    t: usize,
    init: ScaledInit,
    d: usize,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> Result<Envelope> {
    let tf = require_t(t)?;
    let ab = alpha * (1.0 - beta);
    match init {
        ScaledInit::L => Ok(Envelope::Bound(power(1.0 - 2.0 * ab / kappa, tf))),
        ScaledInit::Mu => {
            let w = d as f64 * kappa.ln();
            if tf >= w {
                Ok(Envelope::Bound(power(1.0 - 2.0 * ab / (3.0 * kappa), tf)))
            } else {
                Ok(Envelope::Bound(power(
                    1.0 - (-w / tf).exp() * 2.0 * ab / kappa,
                    tf,
                )))
            }
        }
    }
}

/// Second linear rate with the running sum of `C_i`.
pub fn bound_prop_second(
    t: usize,
    psi_btilde0: f64,
    sum_c: f64,
    alpha: f64,
    beta: f64,
) -> Result<Envelope> {
    let tf = require_t(t)?;
    let rate = 2.0 * alpha * (1.0 - beta) * (-(psi_btilde0 + 3.0 * sum_c) / tf).exp();
    Ok(Envelope::Bound(power(1.0 - rate, tf)))
}

/// Iteration after which the condition-free linear rate holds.
pub fn thm2_threshold(
    psi_btilde0: f64,
    psi_bbar0: f64,
    c0: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> f64 {
    psi_btilde0 + 3.0 * c0 * psi_bbar0 + 9.0 * c0 * kappa / (alpha * (1.0 - beta))
}

/// `(1 - 2 alpha (1 - beta) / 3)^t` past [`thm2_threshold`].
pub fn bound_thm2(
    t: usize,
    psi_btilde0: f64,
    psi_bbar0: f64,
    c0: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> Result<Envelope> {
    let tf = require_t(t)?;
    let threshold = thm2_threshold(psi_btilde0, psi_bbar0, c0, kappa, alpha, beta);
    if tf < threshold {
        return Ok(Envelope::NotApplicable { threshold });
    }
    Ok(Envelope::Bound(power(
        1.0 - 2.0 * alpha * (1.0 - beta) / 3.0,
        tf,
    )))
}

/// Threshold of the condition-free rate for `L I` and `mu I` starts.
pub fn bound_cor2_threshold(
    init: ScaledInit,
    d: usize,
    kappa: f64,
    c0: f64,
    alpha: f64,
    beta: f64,
) -> f64 {
    let tail = 9.0 * c0 * kappa / (alpha * (1.0 - beta));
    match init {
        ScaledInit::L => d as f64 * kappa + tail,
        ScaledInit::Mu => (1.0 + 3.0 * c0) * d as f64 * kappa.ln() + tail,
    }
}

/// `log(C0 / delta1)`, clamped at zero when `C0 < delta1`.
fn log_c0_ratio(c0: f64, d: &DeltaConstants) -> f64 {
    if c0 > 0.0 {
        (c0 / d.d1).ln().max(0.0)
    } else {
        0.0
    }
}

fn kappa_tail(c0: f64, kappa: f64, ab: f64, d: &DeltaConstants) -> f64 {
    (3.0 * d.d6 / ab * log_c0_ratio(c0, d) + 3.0 * d.d8 / ab * c0) * kappa
}

/// Numerator `K` of the superlinear envelope `(K / t)^t`.
pub fn thm3_numerator(
    psi_btilde0: f64,
    psi_bbar0: f64,
    c0: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let d = DeltaConstants::new(alpha, beta)?;
    let ab = alpha * (1.0 - beta);
    Ok(d.d7 * psi_btilde0 + (d.d6 + d.d8 * c0) * psi_bbar0 + kappa_tail(c0, kappa, ab, &d))
}

/// `t0 = max{Psi(B_bar_0), 3 kappa log(C0 / delta1) / (alpha (1 - beta))}`; past it `C_t <= delta1`.
pub fn unit_step_threshold(
    psi_bbar0: f64,
    c0: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let d = DeltaConstants::new(alpha, beta)?;
    let ab = alpha * (1.0 - beta);
    Ok(psi_bbar0.max(3.0 * kappa / ab * log_c0_ratio(c0, &d)))
}

fn superlinear(k: f64, t: f64) -> f64 {
    if k <= 0.0 {
        0.0
    } else {
        (t * (k / t).ln()).exp()
    }
}

pub fn bound_thm3(
    t: usize,
    psi_btilde0: f64,
    psi_bbar0: f64,
    c0: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> Result<Envelope> {
    let tf = require_t(t)?;
    let k = thm3_numerator(psi_btilde0, psi_bbar0, c0, kappa, alpha, beta)?;
    Ok(Envelope::Bound(superlinear(k, tf)))
}

/// Numerator of the superlinear corollary for `L I` and `mu I` starts.
pub fn cor3_numerator(
    init: ScaledInit,
    d: usize,
    kappa: f64,
    c0: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let dc = DeltaConstants::new(alpha, beta)?;
    let ab = alpha * (1.0 - beta);
    let tail = kappa_tail(c0, kappa, ab, &dc);
    let df = d as f64;
    Ok(match init {
        ScaledInit::L => dc.d7 * df * kappa + tail,
        ScaledInit::Mu => (dc.d6 + dc.d7 + dc.d8 * c0) * df * kappa.ln() + tail,
    })
}

pub fn bound_cor3(
    t: usize,
    init: ScaledInit,
    d: usize,
    kappa: f64,
    c0: f64,
    alpha: f64,
    beta: f64,
) -> Result<Envelope> {
    let tf = require_t(t)?;
    Ok(Envelope::Bound(superlinear(
        cor3_numerator(init, d, kappa, c0, alpha, beta)?,
        tf,
    )))
}

/// Upper bound on the number of iterations with `rho_t` outside `[delta2, delta3]`.
pub fn bad_set_bound(
    psi_btilde0: f64,
    psi_bbar0: f64,
    c0: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let d = DeltaConstants::new(alpha, beta)?;
    let ab = alpha * (1.0 - beta);
    Ok(d.d4 * (psi_btilde0 + 2.0 * c0 * psi_bbar0 + 6.0 * c0 * kappa / ab))
}

/// Cap on the loop count of a single log-bisection search.
pub fn loop_bound(c_t: f64, rho_t: f64, alpha: f64, beta: f64) -> f64 {
    2.0 + (1.0 + (1.0 - beta) * (1.0 + 2.0 * c_t) / (beta - alpha)).log2()
        + 2.0 * (1.0 + (2.0 * (1.0 - alpha) * (1.0 + c_t)).log2() + rho_t.log2().abs()).log2()
}

/// `sigma = (Psi(B_bar_0) + 3 kappa / (alpha (1 - beta))) C0`.
pub fn sigma(psi_bbar0: f64, kappa: f64, c0: f64, alpha: f64, beta: f64) -> f64 {
    (psi_bbar0 + 3.0 * kappa / (alpha * (1.0 - beta))) * c0
}

/// Bound on the average loop count over the first `t` iterations.
pub fn bound_linesearch_lambda(
    t: usize,
    sigma: f64,
    psi_btilde0: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let tf = require_t(t)?;
    let r = (1.0 - beta) / (beta - alpha);
    Ok(2.0
        + (1.0 + r + 2.0 * r * sigma / tf).log2()
        + 2.0
            * ((16.0 * (1.0 - alpha)).log2()
                + (1.0 + sigma / tf).log2()
                + (6.0 * psi_btilde0 + 12.0 * sigma) / tf)
                .log2())
}

/// The `t -> infinity` limit of [`bound_linesearch_lambda`] with `sigma = 0` and `Psi(B~_0) = 0`.
pub fn linesearch_lambda_limit(alpha: f64, beta: f64) -> f64 {
    2.0 + (1.0 + (1.0 - beta) / (beta - alpha)).log2() + 2.0 * (16.0 * (1.0 - alpha)).log2().log2()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComplexityScheme {
    L,
    Mu,
    /// `B0 = c I` with `c` in `[mu, L]`.
    C(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    /// First linear rate, condition-free linear rate, superlinear rate.
    pub branches: [f64; 3],
    pub argmin: usize,
}

impl ComplexityReport {
    pub fn min(&self) -> f64 {
        self.branches[self.argmin]
    }

    pub fn label(&self) -> &'static str {
        ["linear", "condition_free", "superlinear"][self.argmin]
    }
}

fn superlinear_iters(log_eps: f64, omega: f64) -> f64 {
    log_eps / (0.5 + (0.25 + log_eps / omega).sqrt()).ln()
}

/// Iteration-count estimates for reaching relative accuracy `epsilon`, up to absolute constants.
pub fn complexity_report(
    d: usize,
    kappa: f64,
    c0: f64,
    epsilon: f64,
    scheme: ComplexityScheme,
    mu: f64,
) -> Result<ComplexityReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput("epsilon must lie in (0, 1)".into()));
    }
    let df = d as f64;
    let le = (1.0 / epsilon).ln();
    let branches = match scheme {
        ComplexityScheme::L => {
            let omega = df * kappa + c0 * kappa;
            [
                kappa * le,
                (df + c0) * kappa + le,
                superlinear_iters(le, omega),
            ]
        }
        ComplexityScheme::Mu => {
            let omega = c0 * (df * kappa.ln() + kappa);
            [
                df * kappa.ln() + kappa * le,
                omega + le,
                superlinear_iters(le, omega),
            ]
        }
        ComplexityScheme::C(c) => {
            let l = kappa * mu;
            if !(c >= mu * (1.0 - 1e-12) && c <= l * (1.0 + 1e-12)) {
                return Err(Error::InvalidInput(format!("c = {c} lies outside [mu, L]")));
            }
            let psi_bar = df * (c / l - 1.0 + (l / c).ln());
            let psi_tilde = df * (c / mu - 1.0 + (l / c).ln());
            let omega = psi_tilde + c0 * psi_bar + c0 * kappa;
            [
                psi_bar + kappa * le,
                omega + le,
                superlinear_iters(le, omega),
            ]
        }
    };
    let argmin = (0..3)
        .min_by(|&a, &b| branches[a].total_cmp(&branches[b]))
        .expect("three branches");
    Ok(ComplexityReport { branches, argmin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thm1_with_perfect_start_and_conditioning_is_zero() {
        let e = bound_thm1(1, 0.0, 1.0, 0.5, 0.0);
        // beta = 0 is outside the line-search range but the formula is plain arithmetic
        assert_eq!(e.unwrap(), Envelope::Bound(0.0));
    }

    #[test]
    fn thm1_reduces_to_corollary_for_l_start() {
        for t in [1, 5, 50] {
            let a = bound_thm1(t, 0.0, 100.0, 0.1, 0.9).unwrap();
            let b = bound_cor1(t, ScaledInit::L, 10, 100.0, 0.1, 0.9).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn thm2_not_applicable_early() {
        let e = bound_thm2(1, 1.0, 1.0, 1.0, 100.0, 0.1, 0.9).unwrap();
        assert!(matches!(e, Envelope::NotApplicable { .. }));
    }

    #[test]
    fn complexity_oracle_values() {
        let li = complexity_report(100, 100.0, 1.0, 1e-10, ComplexityScheme::L, 1.0).unwrap();
        let want = [2302.5850929940457, 10123.02585092994, 10134.48216073023];
        for (g, w) in li.branches.iter().zip(want) {
            assert!((g - w).abs() <= 1e-9 * w, "{g} vs {w}");
        }
        assert_eq!(li.argmin, 0);
        let mu = complexity_report(100, 100.0, 1.0, 1e-10, ComplexityScheme::Mu, 1.0).unwrap();
        let want = [2763.1021115928548, 583.5428695287496, 594.1060852670338];
        for (g, w) in mu.branches.iter().zip(want) {
            assert!((g - w).abs() <= 1e-9 * w, "{g} vs {w}");
        }
        assert_eq!(mu.argmin, 1);
    }

    #[test]
    fn cor3_mu_numerator_oracle() {
        let k = cor3_numerator(ScaledInit::Mu, 100, 100.0, 1.0, 0.25, 0.75).unwrap();
        assert!((k - 2_877_813.804_766_477_4).abs() <= 1e-9 * k);
    }

    #[test]
    fn lambda_limit_value() {
        let v = linesearch_lambda_limit(0.25, 0.75);
        assert!((v - 6.268_88).abs() < 1e-4, "{v}");
        let far = bound_linesearch_lambda(1_000_000_000, 0.0, 0.0, 0.25, 0.75).unwrap();
        assert!((far - v).abs() < 1e-6);
    }
}

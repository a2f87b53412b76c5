//! Test objectives: the regularized cubic chain and diagonal quadratics.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Point = DVector<f64>;

/// Anything the line searches and the driver can minimize.
///
/// Callers guarantee `x.len() == self.dim()`; the checked entry points live on [`Problem`].
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;

    fn value_and_gradient(&self, x: &Point) -> (f64, Point) {
        (self.value(x), self.gradient(x))
    }
}

/// Smoothed cubic `g(w)` with its first and second derivatives.
///
/// `|w|^3/3` inside `[-delta, delta]`, continued quadratically outside so `g''` is capped at `2 delta`.
pub fn cubic_g(w: f64, delta: f64) -> (f64, f64, f64) {
    let a = w.abs();
    if a <= delta {
        (a * a * a / 3.0, w * a, 2.0 * a)
    } else {
        (
            delta * w * w - delta * delta * a + delta * delta * delta / 3.0,
            2.0 * delta * w - delta * delta * w.signum(),
            2.0 * delta,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    CubicChain {
        alpha_f: f64,
        beta_f: f64,
        lambda: f64,
        delta: f64,
    },
    Quadratic {
        eigenvalues: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_star: Point,
    pub f_star: f64,
    pub grad_norm: f64,
}

/// Which derivatives [`Problem::eval`] should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Option<Point>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Objective together with its strong convexity, smoothness and Hessian-Lipschitz constants.
#[derive(Debug)]
pub struct Problem {
    dim: usize,
    kind: ProblemKind,
    mu: f64,
    l_bound: f64,
    m_bound: f64,
    reference: OnceLock<Reference>,
}

impl Clone for Problem {
    fn clone(&self) -> Self {
        let reference = OnceLock::new();
        if let Some(r) = self.reference.get() {
            let _ = reference.set(r.clone());
        }
        Self {
            dim: self.dim,
            kind: self.kind.clone(),
            mu: self.mu,
            l_bound: self.l_bound,
            m_bound: self.m_bound,
            reference,
        }
    }
}

const VALIDATION_POINTS: usize = 8;
const REFERENCE_MAX_STEPS: usize = 500;

impl Problem {
    /// Cubic chain `(alpha_f/12)(sum g(x_i - x_{i+1}) - beta_f x_1) + (lambda/2)|x|^2`.
    pub fn cubic(dim: usize, alpha_f: f64, beta_f: f64, lambda: f64, delta: f64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        for (name, v) in [("alpha_f", alpha_f), ("lambda", lambda), ("delta", delta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !beta_f.is_finite() {
            return Err(Error::InvalidInput("beta_f must be finite".into()));
        }
        let p = Self {
            dim,
            kind: ProblemKind::CubicChain {
                alpha_f,
                beta_f,
                lambda,
                delta,
            },
            mu: lambda,
            l_bound: 2.0 * alpha_f * delta / 3.0 + lambda,
            m_bound: 4.0 * alpha_f / 3.0,
            reference: OnceLock::new(),
        };
        p.validate_constants()?;
        Ok(p)
    }

    /// Cubic chain with `lambda = 1` and `alpha_f` chosen so that `L / mu = kappa`.
    pub fn make_cubic(dim: usize, kappa: f64, delta: f64, beta_f: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 1.0) {
            return Err(Error::InvalidInput(format!(
                "kappa must exceed 1, got {kappa}"
            )));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "delta must be positive, got {delta}"
            )));
        }
        let alpha_f = 3.0 * (kappa - 1.0) / (2.0 * delta);
        Self::cubic(dim, alpha_f, beta_f, 1.0, delta)
    }

    /// `f(x) = sum lambda_i x_i^2 / 2`.
    pub fn quadratic(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if eigenvalues.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(
                "quadratic eigenvalues must be positive".into(),
            ));
        }
        let mu = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let l = eigenvalues.iter().copied().fold(0.0, f64::max);
        let dim = eigenvalues.len();
        let p = Self {
            dim,
            kind: ProblemKind::Quadratic { eigenvalues },
            mu,
            l_bound: l,
            m_bound: 0.0,
            reference: OnceLock::new(),
        };
        let _ = p.reference.set(Reference {
            x_star: Point::zeros(dim),
            f_star: 0.0,
            grad_norm: 0.0,
        });
        Ok(p)
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l_bound(&self) -> f64 {
        self.l_bound
    }

    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    pub fn kappa(&self) -> f64 {
        self.l_bound / self.mu
    }

    /// Default starting point: the origin for the cubic, the all-ones vector for quadratics.
    pub fn default_start(&self) -> Point {
        match self.kind {
            ProblemKind::CubicChain { .. } => Point::zeros(self.dim),
            ProblemKind::Quadratic { .. } => Point::from_element(self.dim, 1.0),
        }
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, problem has {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("point has non-finite entries".into()));
        }
        Ok(())
    }

    /// Checked evaluation up to the requested derivative order.
    pub fn eval(&self, x: &Point, order: Order) -> Result<Evaluation> {
        self.check_point(x)?;
        let value = self.value(x);
        let gradient = (order != Order::Value).then(|| self.gradient(x));
        let hessian = (order == Order::Hessian).then(|| self.hessian(x));
        Ok(Evaluation {
            value,
            gradient,
            hessian,
        })
    }

    pub fn hessian(&self, x: &Point) -> DMatrix<f64> {
        match &self.kind {
            ProblemKind::CubicChain {
                alpha_f,
                lambda,
                delta,
                ..
            } => {
                let d = self.dim;
                let c = alpha_f / 12.0;
                let mut h = DMatrix::from_diagonal_element(d, d, *lambda);
                for i in 0..d.saturating_sub(1) {
                    let (_, _, g2) = cubic_g(x[i] - x[i + 1], *delta);
                    let w = c * g2;
                    h[(i, i)] += w;
                    h[(i + 1, i + 1)] += w;
                    h[(i, i + 1)] -= w;
                    h[(i + 1, i)] -= w;
                }
                h
            }
            ProblemKind::Quadratic { eigenvalues } => {
                DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues))
            }
        }
    }

    /// Gershgorin enclosure of `hessian(x)`.
    fn gershgorin(&self, x: &Point) -> (f64, f64) {
        let h = self.hessian(x);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let off: f64 = (0..self.dim)
                .filter(|&j| j != i)
                .map(|j| h[(i, j)].abs())
                .sum();
            lo = lo.min(h[(i, i)] - off);
            hi = hi.max(h[(i, i)] + off);
        }
        (lo, hi)
    }

    fn validate_constants(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let tol = 1e-12 * self.l_bound.max(1.0);
        let mut points = vec![Point::zeros(self.dim)];
        for k in 0..VALIDATION_POINTS {
            let scale = 10f64.powi(k as i32 - 3);
            points.push(Point::from_fn(self.dim, |_, _| {
                scale * rng.random_range(-1.0..1.0)
            }));
        }
        for x in &points {
            let (lo, hi) = self.gershgorin(x);
            if lo < self.mu - tol || hi > self.l_bound + tol {
                return Err(Error::InvalidInput(format!(
                    "Hessian spectrum enclosure [{lo}, {hi}] escapes [{}, {}]",
                    self.mu, self.l_bound
                )));
            }
        }
        Ok(())
    }

    pub fn reference_tolerance(&self) -> f64 {
        1e-12 * self.l_bound.max(1.0)
    }

    /// Minimizer and optimal value, computed once by damped Newton and cached.
    pub fn reference(&self) -> Result<&Reference> {
        if let Some(r) = self.reference.get() {
            return Ok(r);
        }
        let r = self.reference_solution(self.reference_tolerance())?;
        let _ = self.reference.set(r);
        Ok(self.reference.get().expect("reference was just set"))
    }

    /// Uncached damped Newton solve to `|grad f| <= tol`.
    pub fn reference_solution(&self, tol: f64) -> Result<Reference> {
        if let ProblemKind::Quadratic { .. } = self.kind {
            return Ok(Reference {
                x_star: Point::zeros(self.dim),
                f_star: 0.0,
                grad_norm: 0.0,
            });
        }
        let mut x = Point::zeros(self.dim);
        let (mut f, mut g) = self.value_and_gradient(&x);
        let mut gn = g.norm();
        let mut polished = false;
        for _ in 0..REFERENCE_MAX_STEPS {
            if gn <= tol {
                if polished {
                    break;
                }
                polished = true;
            }
            let p = self
                .hessian(&x)
                .cholesky()
                .ok_or_else(|| Error::Convergence("Newton system is not positive definite".into()))?
                .solve(&(-&g));
            let slope = g.dot(&p);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let xn = &x + t * &p;
                let (fnew, gnew) = self.value_and_gradient(&xn);
                let gnn = gnew.norm();
                if fnew - f <= 1e-4 * t * slope || (t == 1.0 && gnn <= 0.5 * gn) {
                    accepted = Some((xn, fnew, gnew, gnn));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((xn, fnew, gnew, gnn)) => {
                    if polished && gnn >= gn {
                        break;
                    }
                    x = xn;
                    f = fnew;
                    g = gnew;
                    gn = gnn;
                }
                None if gn <= tol => break,
                None => {
                    return Err(Error::Convergence(format!(
                        "Newton step search stalled at |grad| = {gn:e}"
                    )))
                }
            }
        }
        if gn > tol {
            return Err(Error::Convergence(format!(
                "reference solve ended at |grad| = {gn:e} > {tol:e}"
            )));
        }
        Ok(Reference {
            x_star: x,
            f_star: f,
            grad_norm: gn,
        })
    }

    /// Largest relative mismatch between central differences and the analytic gradient.
    pub fn finite_diff_grad_check(&self, x: &Point, h: f64) -> Result<f64> {
        self.check_point(x)?;
        let g = self.gradient(x);
        let mut worst = 0.0_f64;
        let mut xp = x.clone();
        for i in 0..self.dim {
            let xi = x[i];
            xp[i] = xi + h;
            let fp = self.value(&xp);
            xp[i] = xi - h;
            let fm = self.value(&xp);
            xp[i] = xi;
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
        }
        Ok(worst)
    }
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Point) -> f64 {
        match &self.kind {
            ProblemKind::CubicChain {
                alpha_f,
                beta_f,
                lambda,
                delta,
            } => {
                let chain: f64 = (0..self.dim.saturating_sub(1))
                    .map(|i| cubic_g(x[i] - x[i + 1], *delta).0)
                    .sum();
                alpha_f / 12.0 * (chain - beta_f * x[0]) + 0.5 * lambda * x.norm_squared()
            }
            ProblemKind::Quadratic { eigenvalues } => {
                0.5 * eigenvalues
                    .iter()
                    .zip(x.iter())
                    .map(|(l, v)| l * v * v)
                    .sum::<f64>()
            }
        }
    }

    fn gradient(&self, x: &Point) -> Point {
        match &self.kind {
            ProblemKind::CubicChain {
                alpha_f,
                beta_f,
                lambda,
                delta,
            } => {
                let c = alpha_f / 12.0;
                let mut g = x * *lambda;
                for i in 0..self.dim.saturating_sub(1) {
                    let (_, g1, _) = cubic_g(x[i] - x[i + 1], *delta);
                    g[i] += c * g1;
                    g[i + 1] -= c * g1;
                }
                g[0] -= c * beta_f;
                g
            }
            ProblemKind::Quadratic { eigenvalues } => Point::from_iterator(
                self.dim,
                eigenvalues.iter().zip(x.iter()).map(|(l, v)| l * v),
            ),
        }
    }
}

/// Seeded point with entries uniform in `[-scale, scale]`.
pub fn sample_point(dim: usize, scale: f64, seed: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Point::from_fn(dim, |_, _| scale * rng.random_range(-1.0..1.0))
}

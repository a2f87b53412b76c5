use nalgebra::DMatrix;

use crate::analysis::potential::psi_weighted;
use crate::error::{Error, Result};
use crate::linalg::{log_det_spd, max_abs, spd_inverse, sym_sqrt_pair};
use crate::objective::{Objective, Point, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// `P = L I`.
    ScaledIdentityL,
    /// `P = hessian(x*)`.
    HessianAtStar,
    Custom,
}

#[derive(Debug, Clone)]
enum Repr {
    Scaled(f64),
    Dense {
        p: DMatrix<f64>,
        p_inv: DMatrix<f64>,
        sqrt: DMatrix<f64>,
        inv_sqrt: DMatrix<f64>,
    },
}

/// Weight matrix `P` used to form `g^ = P^{-1/2} g`, `s^ = P^{1/2} s`, `y^ = P^{-1/2} y`.
#[derive(Debug, Clone)]
pub struct WeightScheme {
    kind: WeightKind,
    dim: usize,
    repr: Repr,
    log_det: f64,
}

impl WeightScheme {
    pub fn scaled_identity_l(problem: &Problem) -> Self {
        let l = problem.l_bound();
        Self {
            kind: WeightKind::ScaledIdentityL,
            dim: problem.dim(),
            repr: Repr::Scaled(l),
            log_det: problem.dim() as f64 * l.ln(),
        }
    }

    pub fn hessian_at_star(problem: &Problem) -> Result<Self> {
        let x_star = &problem.reference()?.x_star;
        Self::dense(problem.hessian(x_star), WeightKind::HessianAtStar)
    }

    pub fn custom(p: DMatrix<f64>) -> Result<Self> {
        Self::dense(p, WeightKind::Custom)
    }

    fn dense(p: DMatrix<f64>, kind: WeightKind) -> Result<Self> {
        let (sqrt, inv_sqrt) = sym_sqrt_pair(&p)?;
        if max_abs(&(&sqrt * &sqrt - &p)) > 1e-10 * max_abs(&p) {
            return Err(Error::Domain("weight square root is inaccurate".into()));
        }
        let log_det = log_det_spd(&p)?;
        let p_inv = spd_inverse(&p)?;
        Ok(Self {
            kind,
            dim: p.nrows(),
            repr: Repr::Dense {
                p,
                p_inv,
                sqrt,
                inv_sqrt,
            },
            log_det,
        })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Scaled(c) => DMatrix::from_diagonal_element(self.dim, self.dim, *c),
            Repr::Dense { p, .. } => p.clone(),
        }
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Scaled(c) => DMatrix::from_diagonal_element(self.dim, self.dim, 1.0 / c),
            Repr::Dense { p_inv, .. } => p_inv.clone(),
        }
    }

    /// `P^{1/2} v`.
    pub fn lift(&self, v: &Point) -> Point {
        match &self.repr {
            Repr::Scaled(c) => v * c.sqrt(),
            Repr::Dense { sqrt, .. } => sqrt * v,
        }
    }

    /// `P^{-1/2} v`.
    pub fn lower(&self, v: &Point) -> Point {
        match &self.repr {
            Repr::Scaled(c) => v / c.sqrt(),
            Repr::Dense { inv_sqrt, .. } => inv_sqrt * v,
        }
    }

    /// `Psi(P^{-1/2} B P^{-1/2})`.
    pub fn psi_of(&self, b: &DMatrix<f64>) -> Result<f64> {
        match &self.repr {
            Repr::Scaled(c) => {
                let d = self.dim as f64;
                Ok(b.trace() / c - d - log_det_spd(b)? + self.log_det)
            }
            Repr::Dense { p_inv, .. } => psi_weighted(b, p_inv, self.log_det),
        }
    }

    /// `Psi(P^{-1/2} (c I) P^{-1/2})` without forming the matrix.
    pub fn psi_of_scaled(&self, c: f64) -> Result<f64> {
        let d = self.dim as f64;
        match &self.repr {
            Repr::Scaled(l) => Ok(d * (c / l) - d - d * (c / l).ln()),
            Repr::Dense { p_inv, .. } => Ok(c * p_inv.trace() - d - d * c.ln() + self.log_det),
        }
    }
}

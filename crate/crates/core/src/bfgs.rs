//! BFGS Hessian approximations in direct or inverse form.

use std::fmt;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{is_spd, spd_inverse, symmetrize};
use crate::objective::{Objective, Point, Problem};

/// Whether the state stores `B` or `H = B^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Form {
    Direct,
    #[default]
    Inverse,
}

/// Points used to estimate `c = s'y / |s|^2` for [`InitScheme::CIdentity`].
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    /// `x1 = x0`, `x2 = x0 + u` with `u` a seeded random unit vector.
    Seeded,
    Points(Point, Point),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitScheme {
    /// `B0 = L I`.
    LIdentity,
    /// `B0 = mu I`.
    MuIdentity,
    Identity,
    /// `B0 = c I` with `c` from a secant probe.
    CIdentity(Probe),
    Custom(DMatrix<f64>),
}

impl InitScheme {
    pub fn label(&self) -> &'static str {
        match self {
            Self::LIdentity => "LI",
            Self::MuIdentity => "muI",
            Self::Identity => "I",
            Self::CIdentity(_) => "cI",
            Self::Custom(_) => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "LI" | "L" => Some(Self::LIdentity),
            "muI" | "mu" => Some(Self::MuIdentity),
            "I" | "identity" => Some(Self::Identity),
            "cI" | "c" => Some(Self::CIdentity(Probe::Seeded)),
            _ => None,
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Initial matrix after resolving a scheme against a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialMatrix {
    Scaled(f64),
    Custom(DMatrix<f64>),
}

impl InitialMatrix {
    pub fn matrix(&self, dim: usize) -> DMatrix<f64> {
        match self {
            Self::Scaled(c) => DMatrix::from_diagonal_element(dim, dim, *c),
            Self::Custom(m) => m.clone(),
        }
    }

    pub fn scale(&self) -> Option<f64> {
        match self {
            Self::Scaled(c) => Some(*c),
            Self::Custom(_) => None,
        }
    }
}

/// Seeded unit vector of dimension `dim`.
pub fn random_unit(dim: usize, seed: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let u = Point::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let n = u.norm();
        if n > 0.0 {
            return u / n;
        }
    }
}

pub fn resolve_init(
    scheme: &InitScheme,
    problem: &Problem,
    x0: &Point,
    seed: u64,
) -> Result<InitialMatrix> {
    let d = problem.dim();
    match scheme {
        InitScheme::LIdentity => Ok(InitialMatrix::Scaled(problem.l_bound())),
        InitScheme::MuIdentity => Ok(InitialMatrix::Scaled(problem.mu())),
        InitScheme::Identity => Ok(InitialMatrix::Scaled(1.0)),
        InitScheme::CIdentity(probe) => {
            let (x1, x2) = match probe {
                Probe::Seeded => (x0.clone(), x0 + random_unit(d, seed)),
                Probe::Points(a, b) => (a.clone(), b.clone()),
            };
            problem.check_point(&x1)?;
            problem.check_point(&x2)?;
            let s = &x2 - &x1;
            let ss = s.norm_squared();
            if ss == 0.0 {
                return Err(Error::Config("cI probe points coincide".into()));
            }
            let y = problem.gradient(&x2) - problem.gradient(&x1);
            let c = s.dot(&y) / ss;
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!(
                    "cI probe produced non-positive c = {c}"
                )));
            }
            Ok(InitialMatrix::Scaled(c))
        }
        InitScheme::Custom(m) => {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::Config(format!(
                    "custom B0 is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if crate::linalg::asymmetry(m) > 1e-12 * crate::linalg::max_abs(m) || !is_spd(m) {
                return Err(Error::Config(
                    "custom B0 must be symmetric positive definite".into(),
                ));
            }
            Ok(InitialMatrix::Custom(m.clone()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsState {
    form: Form,
    matrix: DMatrix<f64>,
    updates: usize,
}

impl BfgsState {
    /// State holding `b0` (or its inverse, in inverse form).
    pub fn new(b0: &DMatrix<f64>, form: Form) -> Result<Self> {
        if !b0.is_square() || !is_spd(b0) {
            return Err(Error::Config(
                "B0 must be symmetric positive definite".into(),
            ));
        }
        let matrix = match form {
            Form::Direct => b0.clone(),
            Form::Inverse => spd_inverse(b0)?,
        };
        Ok(Self {
            form,
            matrix,
            updates: 0,
        })
    }

    pub fn initialize(
        problem: &Problem,
        scheme: &InitScheme,
        form: Form,
        x0: &Point,
        seed: u64,
    ) -> Result<(Self, InitialMatrix)> {
        let init = resolve_init(scheme, problem, x0, seed)?;
        let state = match &init {
            InitialMatrix::Scaled(c) => {
                let d = problem.dim();
                let v = if form == Form::Direct { *c } else { 1.0 / c };
                Self {
                    form,
                    matrix: DMatrix::from_diagonal_element(d, d, v),
                    updates: 0,
                }
            }
            InitialMatrix::Custom(m) => Self::new(m, form)?,
        };
        Ok((state, init))
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The stored matrix: `B` in direct form, `H` in inverse form.
    pub fn stored(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn b_matrix(&self) -> Result<DMatrix<f64>> {
        match self.form {
            Form::Direct => Ok(self.matrix.clone()),
            Form::Inverse => spd_inverse(&self.matrix).map_err(|_| Error::SpdViolation {
                updates: self.updates,
            }),
        }
    }

    pub fn h_matrix(&self) -> Result<DMatrix<f64>> {
        match self.form {
            Form::Inverse => Ok(self.matrix.clone()),
            Form::Direct => spd_inverse(&self.matrix).map_err(|_| Error::SpdViolation {
                updates: self.updates,
            }),
        }
    }

    /// Quasi-Newton direction `-B^{-1} g`.
    pub fn direction(&self, g: &Point) -> Result<Point> {
        if g.len() != self.dim() {
            return Err(Error::InvalidInput("gradient dimension mismatch".into()));
        }
        match self.form {
            Form::Inverse => Ok(-(&self.matrix * g)),
            Form::Direct => {
                let chol = self.matrix.clone().cholesky().ok_or(Error::SpdViolation {
                    updates: self.updates,
                })?;
                Ok(-chol.solve(g))
            }
        }
    }

    /// Applies the BFGS update for the pair `(s, y)`; requires `s'y > 0`.
    pub fn update(&mut self, s: &Point, y: &Point) -> Result<()> {
        if s.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::InvalidInput(
                "curvature pair dimension mismatch".into(),
            ));
        }
        let sy = s.dot(y);
        if !(sy > 0.0) || !sy.is_finite() {
            return Err(Error::CurvaturePair { sy });
        }
        match self.form {
            Form::Direct => {
                let bs = &self.matrix * s;
                let sbs = s.dot(&bs);
                if !(sbs > 0.0) {
                    return Err(Error::SpdViolation {
                        updates: self.updates,
                    });
                }
                self.matrix.ger(-1.0 / sbs, &bs, &bs, 1.0);
                self.matrix.ger(1.0 / sy, y, y, 1.0);
            }
            Form::Inverse => {
                let r = 1.0 / sy;
                let hy = &self.matrix * y;
                let yhy = y.dot(&hy);
                self.matrix.ger(-r, s, &hy, 1.0);
                self.matrix.ger(-r, &hy, s, 1.0);
                self.matrix.ger(r * r * yhy + r, s, s, 1.0);
            }
        }
        symmetrize(&mut self.matrix);
        self.updates += 1;
        Ok(())
    }
}

use crate::linesearch::Trial;

/// Errors raised by the solver, its line searches and the analysis layer.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Malformed input such as a dimension mismatch or a non-finite coordinate.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Invalid configuration: bad line-search parameters, non-SPD custom matrix, etc.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An iterative sub-solver (the reference Newton solve) failed to reach its tolerance.
    #[error("failed to converge: {0}")]
    Convergence(String),

    /// Symmetric factorization of the Hessian approximation failed.
    #[error("Hessian approximation lost positive definiteness after {updates} updates")]
    SpdViolation { updates: usize },

    /// A curvature pair with non-positive `s'y` was offered to the update.
    #[error("curvature pair rejected: s'y = {sy:e} is not positive")]
    CurvaturePair { sy: f64 },

    /// The line search was handed a direction that is not a descent direction.
    #[error("not a descent direction: g'd = {gd:e}")]
    NonDescent { gd: f64 },

    /// The log-bisection search did not terminate; the full trial history is attached.
    #[error("line search failed to bracket an Armijo-Wolfe step after {} trials", trials.len())]
    Bracketing { trials: Vec<Trial> },

    /// Backtracking hit its halving cap without satisfying sufficient decrease.
    #[error("backtracking failed after {halvings} halvings")]
    Backtracking { halvings: usize },

    /// A function was evaluated outside its domain (`psi` of a non-SPD matrix, `omega(x <= -1)`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A value below the reference optimum was observed; the reference solution is inaccurate.
    #[error("objective {f:e} lies below the reference optimum {f_star:e}")]
    BelowReference { f: f64, f_star: f64 },

    /// A quantity is undefined because the iterate is stationary.
    #[error("stationary point: {0}")]
    Stationary(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared by all estimation and IO routines.

use thiserror::Error;

/// Errors produced by dataset handling, solvers and the uniqueness analyzer.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Matrices in a dataset or operation do not have compatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A single observation with unknown mean leaves zero residuals.
    #[error("insufficient data: n = 1 requires a known mean")]
    InsufficientData,

    /// Cholesky factorization failed; the matrix is not strictly positive definite.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    /// A covariance component is not symmetric.
    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(&'static str),

    /// An operation was called on data of the wrong shape.
    #[error("wrong shape: {0}")]
    WrongShape(String),

    /// X1 - X2 is numerically singular in the n = 2 analytic solution.
    #[error("X1 - X2 is numerically singular (condition number > {0:e})")]
    SingularDifference(f64),

    /// The sample size violates the necessary existence condition n > max(p/q, q/p).
    #[error("maximum likelihood estimator cannot exist: n = {n} <= max({p}/{q}, {q}/{p})")]
    ExistenceRuledOut { n: usize, p: usize, q: usize },

    /// One-diagonal model requires n > q for guaranteed existence.
    #[error("existence not guaranteed for the one-diagonal model: n = {n} <= q = {q}")]
    ExistenceNotGuaranteed { n: usize, q: usize },

    /// A Y^2 residual cell is exactly zero; the diagonal likelihood is unbounded.
    #[error("zero residual cell Y^2({i},{j}); likelihood unbounded along gamma_{i} psi_{j} -> 0")]
    ZeroResidualCell { i: usize, j: usize },

    /// The shared denominator of the V coefficients vanishes.
    #[error("degenerate denominator in V coefficients (residual rows 3 and 4 are dependent)")]
    DegenerateDenominator,

    /// A curve grid point coincides with the pole of h2 at b = -V3.
    #[error("curve grid point b = {0} lies on the pole of h2")]
    PoleOnGrid(f64),

    /// No sign change was found when bracketing the root of g - h2.
    #[error("root of g - h2 could not be bracketed on the search grid")]
    RootNotBracketed,

    /// A requested family parameter lies outside the open interval where W < 0.
    #[error("b = {0} is not strictly inside the non-uniqueness interval")]
    NotInInterval(f64),

    /// Family extraction requested for a dataset not classified as non-unique.
    #[error("dataset is not classified as non-unique")]
    NotNonUnique,

    /// Text-format parse failure.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

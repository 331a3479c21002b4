//! Maximum likelihood estimation for matrix-normal models with a Kronecker
//! product covariance structure.
//!
//! Observations are p×q matrices X_1, ..., X_n with vec(X_k) ~ N(mu, Psi ⊗ Gamma),
//! where Gamma is the p×p row covariance and Psi the q×q column covariance.
//! The crate provides:
//!
//! - the flip-flop fixed-point solver for the unrestricted model, with
//!   existence gates on (n, p, q) and the analytic solution family for n = 2
//!   square data,
//! - exact solvers for the fully diagonal model and the one-diagonal-component
//!   model (including the p = 2 simultaneous-diagonalization reduction),
//! - an analytic uniqueness diagnoser for n = 3, p = q = 2 that classifies a
//!   dataset by the discriminant of a quadratic polynomial and, in the
//!   non-unique case, enumerates the full family of maximizers,
//! - a seeded matrix-normal sampler and a plain-text dataset format with
//!   bit-exact round-trips.
//!
//! Determinants and inverses are always obtained through Cholesky
//! factorization; a failed factorization is the operational definition of
//! "not positive definite". Log-likelihoods are computed in log space only.

// positivity gates are written as !(x > 0) so that NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod dataset;
pub mod diagonal;
pub mod error;
pub mod flipflop;
pub mod io;
pub mod likelihood;
pub mod one_diag;
pub mod sign_pattern;
pub mod simulate;
pub mod stats;
pub mod uniqueness;

pub use covariance::{kron_product_close, KroneckerCovariance, DEFAULT_PRODUCT_TOL};
pub use dataset::MatrixDataset;
pub use diagonal::{diagonal_mle, diagonal_mle_with_start, diagonal_search_box, DiagonalEstimate};
pub use error::{Error, Result};
pub use flipflop::{
    analytic_family_n2, existence_gate, flip_flop, EstimateReport, ExistenceVerdict, ExistenceZone,
    FlipFlopConfig, SolveStatus,
};
pub use likelihood::{likelihood_equation_residual, log_likelihood, neg_objective};
pub use one_diag::{one_diag_mle, one_diag_mle_p2};
pub use sign_pattern::{sign_pattern_check, SignPatternCase};
pub use simulate::simulate_dataset;
pub use stats::{compute_stats, SufficientStats};
pub use uniqueness::{
    classify, compute_w, curves, diagnose, family, nonuniqueness_probability, residual_table,
    Classification, CurvePoint, ProbabilityEstimate, ResidualTable, UniquenessReport, WPolynomial,
    DEFAULT_BORDERLINE_EPS,
};

//! The Kronecker-structured covariance: a pair (Gamma, Psi) of positive
//! definite components representing Psi ⊗ Gamma.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative Frobenius tolerance for comparing Kronecker products.
pub const DEFAULT_PRODUCT_TOL: f64 = 1e-8;

/// Relative asymmetry allowed before a component is rejected as non-symmetric.
const SYMMETRY_TOL: f64 = 1e-9;

/// A pair (Gamma: p×p, Psi: q×q) of symmetric positive definite matrices.
///
/// The pair is identified only up to the scaling (c·Gamma, Psi/c); the
/// canonical representative fixes psi(1,1) = 1. Uniqueness statements always
/// refer to the product Psi ⊗ Gamma, never to the components separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KroneckerCovariance {
    gamma: DMatrix<f64>,
    psi: DMatrix<f64>,
    canonical: bool,
}

impl KroneckerCovariance {
    /// Validate symmetry and strict positive definiteness of both components.
    pub fn new(gamma: DMatrix<f64>, psi: DMatrix<f64>) -> Result<Self> {
        check_spd(&gamma, "gamma")?;
        check_spd(&psi, "psi")?;
        Ok(Self {
            gamma,
            psi,
            canonical: false,
        })
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn p(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn q(&self) -> usize {
        self.psi.nrows()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// Rescale to the canonical representative with psi(1,1) = 1.
    ///
    /// The Kronecker product is unchanged; the operation is idempotent.
    pub fn canonicalize(&self) -> Self {
        let s = self.psi[(0, 0)];
        Self {
            gamma: &self.gamma * s,
            psi: &self.psi / s,
            canonical: true,
        }
    }

    /// The dense pq×pq product Psi ⊗ Gamma.
    pub fn kron_product(&self) -> DMatrix<f64> {
        self.psi.kronecker(&self.gamma)
    }

    /// Relative Frobenius distance between the products of two pairs.
    pub fn rel_product_distance(&self, other: &Self) -> f64 {
        let a = self.kron_product();
        let b = other.kron_product();
        (&a - &b).norm() / a.norm()
    }

    /// Equivalence at the default tolerance [`DEFAULT_PRODUCT_TOL`].
    pub fn equivalent(&self, other: &Self) -> bool {
        kron_product_close(self, other, DEFAULT_PRODUCT_TOL)
    }
}

/// Equivalence-class comparison: the products agree within `tol` relative
/// Frobenius norm.
pub fn kron_product_close(a: &KroneckerCovariance, b: &KroneckerCovariance, tol: f64) -> bool {
    a.rel_product_distance(b) <= tol
}

fn check_spd(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() || m.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} must be square and non-empty, got {}x{}",
            what,
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = (m - m.transpose()).norm();
    if !asym.is_finite() || asym > SYMMETRY_TOL * (1.0 + m.norm()) {
        return Err(Error::NotSymmetric(what));
    }
    cholesky(m, what).map(|_| ())
}

/// Cholesky factorization as the positive definiteness gate.
pub(crate) fn cholesky(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite(what))
}

/// log|M| through Cholesky; fails when M is not strictly positive definite.
pub(crate) fn log_det_spd(m: &DMatrix<f64>, what: &'static str) -> Result<f64> {
    let chol = cholesky(m, what)?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>())
}

/// Force exact symmetry on a numerically symmetric update.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

//! Sign-pattern rigidity check for matrices of the form
//! `B(i,j) = gamma_i psi_j - lambda_i phi_j`.
//!
//! For strictly positive parameters, if every row and every column of B is
//! either all zero or contains both a positive and a negative entry, then B
//! is identically zero. The check below evaluates the row/column pattern;
//! randomized falsification against parameter draws with unequal Kronecker
//! products is what turns the rigidity statement into a property test.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positive parameter vectors defining `B(i,j) = gamma_i psi_j - lambda_i phi_j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignPatternCase {
    pub gamma: Vec<f64>,
    pub psi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi: Vec<f64>,
}

impl SignPatternCase {
    pub fn new(gamma: Vec<f64>, psi: Vec<f64>, lambda: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if gamma.len() != lambda.len() || psi.len() != phi.len() {
            return Err(Error::DimensionMismatch(
                "gamma/lambda and psi/phi must have matching lengths".into(),
            ));
        }
        if gamma.is_empty() || psi.is_empty() {
            return Err(Error::DimensionMismatch(
                "parameter vectors must be non-empty".into(),
            ));
        }
        for v in gamma.iter().chain(&psi).chain(&lambda).chain(&phi) {
            if !(*v > 0.0) {
                return Err(Error::DimensionMismatch(
                    "all sign-pattern parameters must be strictly positive".into(),
                ));
            }
        }
        Ok(Self {
            gamma,
            psi,
            lambda,
            phi,
        })
    }

    /// The p×q matrix with entries `gamma_i psi_j - lambda_i phi_j`.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.gamma.len(), self.psi.len(), |i, j| {
            self.gamma[i] * self.psi[j] - self.lambda[i] * self.phi[j]
        })
    }
}

/// True iff every row and every column of B is all-zero or mixed-sign.
///
/// By the rigidity of this parameterization, a `true` answer forces B ≡ 0;
/// parameter draws with unequal products must therefore return `false`.
pub fn sign_pattern_check(case: &SignPatternCase) -> bool {
    let b = case.b_matrix();
    let rows = (0..b.nrows()).all(|i| line_ok((0..b.ncols()).map(|j| b[(i, j)])));
    let cols = (0..b.ncols()).all(|j| line_ok((0..b.nrows()).map(|i| b[(i, j)])));
    rows && cols
}

fn line_ok(values: impl Iterator<Item = f64>) -> bool {
    let mut any_pos = false;
    let mut any_neg = false;
    let mut any_nonzero = false;
    for v in values {
        if v > 0.0 {
            any_pos = true;
            any_nonzero = true;
        } else if v < 0.0 {
            any_neg = true;
            any_nonzero = true;
        }
    }
    !any_nonzero || (any_pos && any_neg)
}

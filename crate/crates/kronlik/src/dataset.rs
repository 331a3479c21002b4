//! Observed data: n matrices of shape p×q with an optional known mean.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dataset of n real p×q matrices, optionally with a known mean matrix.
///
/// All observations share the same shape. When the mean is known it is used
/// directly for centering; otherwise the sample mean is estimated, which
/// requires n >= 2 for any residual information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDataset {
    observations: Vec<DMatrix<f64>>,
    known_mean: Option<DMatrix<f64>>,
}

impl MatrixDataset {
    /// Build a dataset with unknown mean.
    pub fn new(observations: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::build(observations, None)
    }

    /// Build a dataset with a known p×q mean matrix.
    pub fn with_known_mean(observations: Vec<DMatrix<f64>>, mean: DMatrix<f64>) -> Result<Self> {
        Self::build(observations, Some(mean))
    }

    fn build(observations: Vec<DMatrix<f64>>, known_mean: Option<DMatrix<f64>>) -> Result<Self> {
        let first = observations.first().ok_or_else(|| {
            Error::DimensionMismatch("dataset must contain n >= 1 matrices".into())
        })?;
        let (p, q) = (first.nrows(), first.ncols());
        if p == 0 || q == 0 {
            return Err(Error::DimensionMismatch(
                "observations must be non-empty matrices".into(),
            ));
        }
        for (k, x) in observations.iter().enumerate() {
            if x.nrows() != p || x.ncols() != q {
                return Err(Error::DimensionMismatch(format!(
                    "observation {} is {}x{}, expected {}x{}",
                    k,
                    x.nrows(),
                    x.ncols(),
                    p,
                    q
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::DimensionMismatch(format!(
                    "observation {k} contains a non-finite entry"
                )));
            }
        }
        if let Some(m) = &known_mean {
            if m.nrows() != p || m.ncols() != q {
                return Err(Error::DimensionMismatch(format!(
                    "known mean is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    p,
                    q
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::DimensionMismatch(
                    "known mean contains a non-finite entry".into(),
                ));
            }
        }
        Ok(Self {
            observations,
            known_mean,
        })
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn p(&self) -> usize {
        self.observations[0].nrows()
    }

    pub fn q(&self) -> usize {
        self.observations[0].ncols()
    }

    pub fn observations(&self) -> &[DMatrix<f64>] {
        &self.observations
    }

    pub fn known_mean(&self) -> Option<&DMatrix<f64>> {
        self.known_mean.as_ref()
    }

    /// Entrywise rescaled copy; used by scale-equivariance checks.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            observations: self.observations.iter().map(|x| x * s).collect(),
            known_mean: self.known_mean.as_ref().map(|m| m * s),
        }
    }
}

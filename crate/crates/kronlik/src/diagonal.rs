//! Exact MLE for the model with both covariance components diagonal.
//!
//! For n >= 2 (or n >= 1 with known mean) the estimator exists and is unique
//! with probability 1, so the fixed point of the alternating sweeps below is
//! the MLE regardless of the starting point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::KroneckerCovariance;
use crate::dataset::MatrixDataset;
use crate::error::{Error, Result};
use crate::flipflop::SolveStatus;
use crate::likelihood::log_likelihood;
use crate::stats::{compute_stats, SufficientStats};

/// Diagonal-model estimate.
///
/// `gamma_diag`/`psi_diag` are the canonical representative (psi_1 = 1);
/// `unit_product_gamma` records the internally used normalization with
/// `prod(gamma_i) = 1` before canonicalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEstimate {
    pub gamma_diag: Vec<f64>,
    pub psi_diag: Vec<f64>,
    pub unit_product_gamma: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Max relative residual of the two diagonal likelihood equations.
    pub residual: f64,
}

impl DiagonalEstimate {
    /// The estimate as a dense covariance pair.
    pub fn to_covariance(&self) -> KroneckerCovariance {
        let gamma = DMatrix::from_diagonal(&DVector::from_row_slice(&self.gamma_diag));
        let psi = DMatrix::from_diagonal(&DVector::from_row_slice(&self.psi_diag));
        KroneckerCovariance::new(gamma, psi)
            .expect("positive diagonal entries form a PD matrix")
            .canonicalize()
    }
}

/// Maximum likelihood estimation under the diagonal model, started from
/// gamma = (1, ..., 1).
pub fn diagonal_mle(
    data: &MatrixDataset,
    max_iterations: usize,
    tol: f64,
) -> Result<DiagonalEstimate> {
    diagonal_mle_with_start(data, &vec![1.0; data.p()], max_iterations, tol)
}

/// Same as [`diagonal_mle`] but from an explicit positive starting vector.
///
/// Uniqueness makes the result start-independent; exposing the start makes
/// that property testable.
pub fn diagonal_mle_with_start(
    data: &MatrixDataset,
    start_gamma: &[f64],
    max_iterations: usize,
    tol: f64,
) -> Result<DiagonalEstimate> {
    let stats = compute_stats(data)?;
    check_positive_cells(stats.y_squared())?;
    let sol = solve_diagonal_y2(
        stats.y_squared(),
        stats.n(),
        start_gamma,
        max_iterations,
        tol,
    )?;

    // canonicalize to psi_1 = 1
    let s = sol.psi[0];
    let gamma_diag: Vec<f64> = sol.gamma.iter().map(|g| g * s).collect();
    let psi_diag: Vec<f64> = sol.psi.iter().map(|p| p / s).collect();

    let gamma = DMatrix::from_diagonal(&DVector::from_row_slice(&gamma_diag));
    let psi = DMatrix::from_diagonal(&DVector::from_row_slice(&psi_diag));
    let cov = KroneckerCovariance::new(gamma, psi)?;
    let ll = log_likelihood(data, stats.m_hat(), &cov)?;

    Ok(DiagonalEstimate {
        gamma_diag,
        psi_diag,
        unit_product_gamma: sol.gamma,
        log_likelihood: ll,
        iterations: sol.iterations,
        status: sol.status,
        residual: sol.residual,
    })
}

pub(crate) struct DiagonalSolution {
    /// Gamma entries normalized to unit product.
    pub gamma: Vec<f64>,
    pub psi: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub residual: f64,
}

/// Alternating sweeps of the two diagonal likelihood equations on a Y^2
/// table, renormalizing gamma to unit product after every sweep.
pub(crate) fn solve_diagonal_y2(
    y2: &DMatrix<f64>,
    n: usize,
    start_gamma: &[f64],
    max_iterations: usize,
    tol: f64,
) -> Result<DiagonalSolution> {
    let (p, q) = (y2.nrows(), y2.ncols());
    if start_gamma.len() != p || start_gamma.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::DimensionMismatch(format!(
            "start gamma must be {p} positive entries"
        )));
    }
    let nf = n as f64;
    let mut gamma: Vec<f64> = start_gamma.to_vec();
    normalize_unit_product(&mut gamma);
    let mut psi: Vec<f64> = vec![1.0; q];
    update_psi(y2, nf, &gamma, &mut psi);

    let mut status = SolveStatus::MaxIterations;
    let mut iterations = max_iterations;
    for it in 1..=max_iterations {
        let old_gamma = gamma.clone();
        let old_psi = psi.clone();

        update_gamma(y2, nf, &psi, &mut gamma);
        update_psi(y2, nf, &gamma, &mut psi);
        let scale = normalize_unit_product(&mut gamma);
        for v in &mut psi {
            *v *= scale;
        }

        let mut change: f64 = 0.0;
        for (new, old) in gamma.iter().zip(&old_gamma) {
            change = change.max(((new - old) / old).abs());
        }
        for (new, old) in psi.iter().zip(&old_psi) {
            change = change.max(((new - old) / old).abs());
        }
        if change <= tol {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        }
    }

    let residual = diagonal_residual(y2, nf, &gamma, &psi);
    Ok(DiagonalSolution {
        gamma,
        psi,
        iterations,
        status,
        residual,
    })
}

fn update_gamma(y2: &DMatrix<f64>, n: f64, psi: &[f64], gamma: &mut [f64]) {
    let q = psi.len();
    for (i, g) in gamma.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, psi_j) in psi.iter().enumerate() {
            acc += y2[(i, j)] / psi_j;
        }
        *g = acc / (n * q as f64);
    }
}

fn update_psi(y2: &DMatrix<f64>, n: f64, gamma: &[f64], psi: &mut [f64]) {
    let p = gamma.len();
    for (j, ps) in psi.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, gamma_i) in gamma.iter().enumerate() {
            acc += y2[(i, j)] / gamma_i;
        }
        *ps = acc / (n * p as f64);
    }
}

/// Scale gamma to unit product; returns the applied per-entry divisor so the
/// caller can push the scale into psi and keep the Kronecker product fixed.
fn normalize_unit_product(gamma: &mut [f64]) -> f64 {
    let log_mean = gamma.iter().map(|g| g.ln()).sum::<f64>() / gamma.len() as f64;
    let scale = log_mean.exp();
    for g in gamma.iter_mut() {
        *g /= scale;
    }
    scale
}

/// Max relative residual of the diagonal likelihood equations at (gamma, psi).
pub(crate) fn diagonal_residual(y2: &DMatrix<f64>, n: f64, gamma: &[f64], psi: &[f64]) -> f64 {
    let (p, q) = (gamma.len(), psi.len());
    let mut res: f64 = 0.0;
    for (i, g) in gamma.iter().enumerate() {
        let mut acc = 0.0;
        for (j, psi_j) in psi.iter().enumerate() {
            acc += y2[(i, j)] / psi_j;
        }
        res = res.max((acc / (n * q as f64) - g).abs() / g);
    }
    for (j, ps) in psi.iter().enumerate() {
        let mut acc = 0.0;
        for (i, gamma_i) in gamma.iter().enumerate() {
            acc += y2[(i, j)] / gamma_i;
        }
        res = res.max((acc / (n * p as f64) - ps).abs() / ps);
    }
    res
}

fn check_positive_cells(y2: &DMatrix<f64>) -> Result<()> {
    for i in 0..y2.nrows() {
        for j in 0..y2.ncols() {
            if !(y2[(i, j)] > 0.0) {
                return Err(Error::ZeroResidualCell { i: i + 1, j: j + 1 });
            }
        }
    }
    Ok(())
}

/// Bounding box for the unit-product-normalized gamma minimizer.
///
/// With `L_i = (|S_i| / |S_1 + ... + S_p|)^(1/q)` and `L = min_i L_i`, the
/// normalized minimizer lies in `[L, 1/L^(p-1)]^p`. Used to bound brute-force
/// searches and to sanity-check solver output.
pub fn diagonal_search_box(stats: &SufficientStats) -> Result<(f64, f64)> {
    let y2 = stats.y_squared();
    check_positive_cells(y2)?;
    let (p, q) = (y2.nrows(), y2.ncols());
    // log-space determinant ratios of the diagonal scatters; any common
    // scaling of the S_i cancels
    let mut col_sums_log = vec![0.0; q];
    for (j, cs) in col_sums_log.iter_mut().enumerate() {
        let total: f64 = (0..p).map(|i| y2[(i, j)]).sum();
        *cs = total.ln();
    }
    let mut log_l = f64::INFINITY;
    for i in 0..p {
        let log_det_i: f64 = (0..q).map(|j| y2[(i, j)].ln()).sum();
        let log_det_sum: f64 = col_sums_log.iter().sum();
        log_l = log_l.min((log_det_i - log_det_sum) / q as f64);
    }
    let lower = log_l.exp();
    let upper = (-(p as f64 - 1.0) * log_l).exp();
    Ok((lower, upper))
}

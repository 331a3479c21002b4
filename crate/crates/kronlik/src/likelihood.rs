//! Log-likelihood, the determinant objective and likelihood-equation
//! residuals, all computed through Cholesky factorizations.

use nalgebra::DMatrix;

use crate::covariance::{cholesky, log_det_spd, symmetrize, KroneckerCovariance};
use crate::dataset::MatrixDataset;
use crate::error::{Error, Result};
use crate::stats::SufficientStats;

const LN_2PI: f64 = 1.8378770664093453;

/// Log of the matrix-normal likelihood at (mean, Psi ⊗ Gamma).
///
/// Evaluates
/// `-(pqn/2) ln 2π - (qn/2) ln|Γ| - (pn/2) ln|Ψ| - ½ Σ_k tr(Ψ⁻¹ (X_k-M)ᵀ Γ⁻¹ (X_k-M))`
/// using triangular solves only; the pq×pq product is never formed or
/// inverted. The raw likelihood underflows already for tiny problems, so only
/// the log value is exposed.
pub fn log_likelihood(
    data: &MatrixDataset,
    mean: &DMatrix<f64>,
    cov: &KroneckerCovariance,
) -> Result<f64> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    if mean.nrows() != p || mean.ncols() != q {
        return Err(Error::DimensionMismatch(format!(
            "mean is {}x{}, expected {}x{}",
            mean.nrows(),
            mean.ncols(),
            p,
            q
        )));
    }
    if cov.p() != p || cov.q() != q {
        return Err(Error::DimensionMismatch(format!(
            "covariance is ({}, {}), data needs ({}, {})",
            cov.p(),
            cov.q(),
            p,
            q
        )));
    }
    let chol_g = cholesky(cov.gamma(), "gamma")?;
    let chol_p = cholesky(cov.psi(), "psi")?;
    let log_det_g = 2.0
        * chol_g
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();
    let log_det_p = 2.0
        * chol_p
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();

    let lg = chol_g.l();
    let lp = chol_p.l();
    let mut quad = 0.0;
    for x in data.observations() {
        let r = x - mean;
        // tr(Ψ⁻¹ Rᵀ Γ⁻¹ R) = ‖L_Γ⁻¹ R L_Ψ⁻ᵀ‖_F²
        let y = lg
            .solve_lower_triangular(&r)
            .expect("cholesky factor is nonsingular");
        let w = lp
            .solve_lower_triangular(&y.transpose())
            .expect("cholesky factor is nonsingular");
        quad += w.norm_squared();
    }

    let nf = n as f64;
    Ok(-0.5 * (p * q) as f64 * nf * LN_2PI
        - 0.5 * q as f64 * nf * log_det_g
        - 0.5 * p as f64 * nf * log_det_p
        - 0.5 * quad)
}

/// The determinant objective `g(R) = -ln|R| - tr(R⁻¹ S)` with R = Psi ⊗ Gamma.
///
/// Maximizing the likelihood over positive definite Kronecker products is
/// equivalent to maximizing this function of R against the sample covariance
/// S; it differs from the log-likelihood by an affine map.
pub fn neg_objective(cov: &KroneckerCovariance, sample_cov: &DMatrix<f64>) -> Result<f64> {
    let pq = cov.p() * cov.q();
    if sample_cov.nrows() != pq || sample_cov.ncols() != pq {
        return Err(Error::DimensionMismatch(format!(
            "sample covariance is {}x{}, expected {}x{}",
            sample_cov.nrows(),
            sample_cov.ncols(),
            pq,
            pq
        )));
    }
    let asym = (sample_cov - sample_cov.transpose()).norm();
    if asym > 1e-9 * (1.0 + sample_cov.norm()) {
        return Err(Error::NotSymmetric("sample_cov"));
    }
    let chol_g = cholesky(cov.gamma(), "gamma")?;
    let chol_p = cholesky(cov.psi(), "psi")?;
    let log_det = cov.q() as f64
        * (2.0
            * chol_g
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>())
        + cov.p() as f64
            * (2.0
                * chol_p
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|d| d.ln())
                    .sum::<f64>());

    // chol(Ψ⊗Γ) = chol(Ψ) ⊗ chol(Γ); tr(R⁻¹S) = tr(L⁻¹ S L⁻ᵀ)
    let l = chol_p.l().kronecker(&chol_g.l());
    let u = l
        .solve_lower_triangular(sample_cov)
        .expect("cholesky factor is nonsingular");
    let v = l
        .solve_lower_triangular(&u.transpose())
        .expect("cholesky factor is nonsingular");
    Ok(-log_det - v.trace())
}

/// Right-hand side of the Gamma likelihood equation:
/// `(1/(nq)) Σ_k (X_k - m̂) Ψ⁻¹ (X_k - m̂)ᵀ`.
pub(crate) fn gamma_equation_rhs(
    data: &MatrixDataset,
    m_hat: &DMatrix<f64>,
    psi: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let chol = cholesky(psi, "psi")?;
    let lp = chol.l();
    let mut acc = DMatrix::zeros(data.p(), data.p());
    for x in data.observations() {
        let r = x - m_hat;
        // R Ψ⁻¹ Rᵀ = (L⁻¹Rᵀ)ᵀ (L⁻¹Rᵀ)
        let y = lp
            .solve_lower_triangular(&r.transpose())
            .expect("cholesky factor is nonsingular");
        acc += y.transpose() * y;
    }
    Ok(symmetrize(&(acc / (data.n() * data.q()) as f64)))
}

/// Right-hand side of the Psi likelihood equation:
/// `(1/(np)) Σ_k (X_k - m̂)ᵀ Γ⁻¹ (X_k - m̂)`.
pub(crate) fn psi_equation_rhs(
    data: &MatrixDataset,
    m_hat: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let chol = cholesky(gamma, "gamma")?;
    let lg = chol.l();
    let mut acc = DMatrix::zeros(data.q(), data.q());
    for x in data.observations() {
        let r = x - m_hat;
        let y = lg
            .solve_lower_triangular(&r)
            .expect("cholesky factor is nonsingular");
        acc += y.transpose() * y;
    }
    Ok(symmetrize(&(acc / (data.n() * data.p()) as f64)))
}

/// Max of the two relative Frobenius residuals of the likelihood equations.
///
/// The value is invariant under the (c·Γ, Ψ/c) scaling freedom, so it can be
/// evaluated on any representative of an equivalence class.
pub fn likelihood_equation_residual(
    stats: &SufficientStats,
    cov: &KroneckerCovariance,
    data: &MatrixDataset,
) -> Result<f64> {
    let rhs_gamma = gamma_equation_rhs(data, stats.m_hat(), cov.psi())?;
    let rhs_psi = psi_equation_rhs(data, stats.m_hat(), cov.gamma())?;
    let res_gamma = (cov.gamma() - &rhs_gamma).norm() / cov.gamma().norm();
    let res_psi = (cov.psi() - &rhs_psi).norm() / cov.psi().norm();
    Ok(res_gamma.max(res_psi))
}

/// Log-likelihood value implied by plugging a solution of the Gamma equation
/// back into the likelihood:
/// `-(pqn/2) ln 2π - (qn/2) ln|(1/(nq)) Σ_k R_k Ψ⁻¹ R_kᵀ| - (pn/2) ln|Ψ| - npq/2`.
pub fn plugin_log_likelihood_gamma(
    data: &MatrixDataset,
    stats: &SufficientStats,
    psi: &DMatrix<f64>,
) -> Result<f64> {
    let (n, p, q) = (data.n() as f64, data.p() as f64, data.q() as f64);
    let rhs = gamma_equation_rhs(data, stats.m_hat(), psi)?;
    Ok(-0.5 * p * q * n * LN_2PI
        - 0.5 * q * n * log_det_spd(&rhs, "gamma update")?
        - 0.5 * p * n * log_det_spd(psi, "psi")?
        - 0.5 * n * p * q)
}

/// Counterpart of [`plugin_log_likelihood_gamma`] for the Psi equation.
pub fn plugin_log_likelihood_psi(
    data: &MatrixDataset,
    stats: &SufficientStats,
    gamma: &DMatrix<f64>,
) -> Result<f64> {
    let (n, p, q) = (data.n() as f64, data.p() as f64, data.q() as f64);
    let rhs = psi_equation_rhs(data, stats.m_hat(), gamma)?;
    Ok(-0.5 * p * q * n * LN_2PI
        - 0.5 * p * n * log_det_spd(&rhs, "psi update")?
        - 0.5 * q * n * log_det_spd(gamma, "gamma")?
        - 0.5 * n * p * q)
}

/// Sample covariance of the vectorized, centered observations:
/// `(1/n) Σ_k vec(X_k - m̂) vec(X_k - m̂)ᵀ`.
pub fn sample_covariance(data: &MatrixDataset, m_hat: &DMatrix<f64>) -> DMatrix<f64> {
    let pq = data.p() * data.q();
    let mut s = DMatrix::zeros(pq, pq);
    for x in data.observations() {
        let r = x - m_hat;
        let v = DMatrix::from_column_slice(pq, 1, r.as_slice());
        s += &v * v.transpose();
    }
    s / data.n() as f64
}

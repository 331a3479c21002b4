//! MLE for the model with diagonal Gamma and unrestricted positive definite
//! Psi, plus the p = 2 reduction by simultaneous diagonalization.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::covariance::{cholesky, KroneckerCovariance};
use crate::dataset::MatrixDataset;
use crate::diagonal::solve_diagonal_y2;
use crate::error::{Error, Result};
use crate::flipflop::{EstimateReport, FlipFlopConfig, SolveStatus};
use crate::likelihood::{gamma_equation_rhs, log_likelihood, psi_equation_rhs};
use crate::stats::{compute_stats, SufficientStats};

const ASCENT_SLACK: f64 = 1e-9;

/// Relative residual of the one-diagonal likelihood equations: the Gamma
/// equation is the diagonal projection of the unrestricted one.
pub fn one_diag_residual(
    stats: &SufficientStats,
    data: &MatrixDataset,
    gamma_diag: &[f64],
    psi: &DMatrix<f64>,
) -> Result<f64> {
    let gamma = DMatrix::from_diagonal(&DVector::from_row_slice(gamma_diag));
    let rhs_full = gamma_equation_rhs(data, stats.m_hat(), psi)?;
    let mut res_gamma_num = 0.0;
    let mut res_gamma_den = 0.0;
    for (i, g) in gamma_diag.iter().enumerate() {
        let d = g - rhs_full[(i, i)];
        res_gamma_num += d * d;
        res_gamma_den += g * g;
    }
    let res_gamma = (res_gamma_num / res_gamma_den).sqrt();
    let rhs_psi = psi_equation_rhs(data, stats.m_hat(), &gamma)?;
    let res_psi = (psi - &rhs_psi).norm() / psi.norm();
    Ok(res_gamma.max(res_psi))
}

/// Alternating solver for diagonal Gamma and full Psi.
///
/// Requires n > q, the condition under which the estimator exists with
/// probability 1. Each Gamma half-step is the exact maximizer over diagonal
/// matrices given Psi, so the likelihood trace is monitored for monotone
/// ascent exactly as in the unrestricted flip-flop.
pub fn one_diag_mle(data: &MatrixDataset, config: &FlipFlopConfig) -> Result<EstimateReport> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    if n <= q {
        return Err(Error::ExistenceNotGuaranteed { n, q });
    }
    let stats = compute_stats(data)?;
    let psi0 = match &config.init_psi {
        Some(m) => {
            if m.nrows() != q || m.ncols() != q {
                return Err(Error::DimensionMismatch(format!(
                    "init_psi is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    q,
                    q
                )));
            }
            cholesky(m, "init_psi")?;
            m.clone()
        }
        None => DMatrix::identity(q, q),
    };

    let mut gamma_diag = vec![1.0; p];
    let mut psi = psi0;
    let mut ll_trace: Vec<f64> = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = config.max_iterations;
    let mut prev_product: Option<DMatrix<f64>> = None;

    'outer: for it in 1..=config.max_iterations {
        // Gamma step: diagonal projection of the unrestricted update
        let rhs = gamma_equation_rhs(data, stats.m_hat(), &psi)?;
        let candidate: Vec<f64> = (0..p).map(|i| rhs[(i, i)]).collect();
        if candidate.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            status = SolveStatus::DegenerateUpdate;
            iterations = it;
            break;
        }
        gamma_diag = candidate;
        let gamma = DMatrix::from_diagonal(&DVector::from_row_slice(&gamma_diag));
        if !push_ll(data, &stats, &gamma, &psi, &mut ll_trace) {
            status = SolveStatus::DegenerateUpdate;
            iterations = it;
            break;
        }

        // Psi step: unrestricted update
        let candidate = psi_equation_rhs(data, stats.m_hat(), &gamma)?;
        if Cholesky::new(candidate.clone()).is_none() {
            status = SolveStatus::DegenerateUpdate;
            iterations = it;
            break 'outer;
        }
        psi = candidate;
        if !push_ll(data, &stats, &gamma, &psi, &mut ll_trace) {
            status = SolveStatus::DegenerateUpdate;
            iterations = it;
            break;
        }

        let product = psi.kronecker(&gamma);
        let product_change = match &prev_product {
            Some(prev) => (&product - prev).norm() / prev.norm().max(f64::MIN_POSITIVE),
            None => f64::INFINITY,
        };
        prev_product = Some(product);
        let m = ll_trace.len();
        let ll_change = if m >= 3 {
            ((ll_trace[m - 1] - ll_trace[m - 3]) / ll_trace[m - 1].abs().max(1.0)).abs()
        } else {
            f64::INFINITY
        };
        if product_change <= config.product_tol
            && ll_change <= config.ll_tol
            && one_diag_residual(&stats, data, &gamma_diag, &psi)? <= config.residual_tol
        {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        }
    }

    finish_report(
        data,
        &stats,
        &gamma_diag,
        &psi,
        status,
        iterations,
        ll_trace,
    )
}

fn push_ll(
    data: &MatrixDataset,
    stats: &SufficientStats,
    gamma: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    ll_trace: &mut Vec<f64>,
) -> bool {
    let cov = match KroneckerCovariance::new(gamma.clone(), psi.clone()) {
        Ok(c) => c,
        Err(_) => return false,
    };
    let ll = match log_likelihood(data, stats.m_hat(), &cov) {
        Ok(v) if v.is_finite() => v,
        _ => return false,
    };
    if let Some(last) = ll_trace.last() {
        if ll < last - ASCENT_SLACK {
            return false;
        }
    }
    ll_trace.push(ll);
    true
}

fn finish_report(
    data: &MatrixDataset,
    stats: &SufficientStats,
    gamma_diag: &[f64],
    psi: &DMatrix<f64>,
    status: SolveStatus,
    iterations: usize,
    ll_trace: Vec<f64>,
) -> Result<EstimateReport> {
    let gamma = DMatrix::from_diagonal(&DVector::from_row_slice(gamma_diag));
    let covariance = KroneckerCovariance::new(gamma, psi.clone())?.canonicalize();
    let residual = one_diag_residual(stats, data, gamma_diag, psi)?;
    let ll = log_likelihood(data, stats.m_hat(), &covariance)?;
    Ok(EstimateReport {
        covariance,
        log_likelihood: ll,
        iterations,
        status,
        residual,
        ll_trace,
        zone: None,
    })
}

/// Direct solution for p = 2 by simultaneous diagonalization of the two row
/// scatters.
///
/// S_1 is whitened by its Cholesky factor and the whitened S_2 is
/// diagonalized by a symmetric eigendecomposition (a congruence, not a
/// similarity). The determinant objective then separates into the two-row
/// diagonal problem, whose unique solution gives gamma; Psi follows from its
/// own likelihood equation. Uniqueness for p = 2 makes this start-independent.
pub fn one_diag_mle_p2(data: &MatrixDataset) -> Result<EstimateReport> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    if p != 2 {
        return Err(Error::WrongShape(format!(
            "p = {p}, the reduction needs p = 2"
        )));
    }
    if n <= q {
        return Err(Error::ExistenceNotGuaranteed { n, q });
    }
    let stats = compute_stats(data)?;
    let s1 = &stats.row_scatter()[0];
    let s2 = &stats.row_scatter()[1];
    let chol = cholesky(s1, "row scatter S1")?;
    let l = chol.l();
    // W = L^-1 S2 L^-T, symmetric positive definite
    let a = l
        .solve_lower_triangular(s2)
        .expect("cholesky factor is nonsingular");
    let w = l
        .solve_lower_triangular(&a.transpose())
        .expect("cholesky factor is nonsingular");
    let w = (&w + w.transpose()) * 0.5;
    let eigen = SymmetricEigen::new(w);
    if eigen.eigenvalues.iter().any(|ev| !(*ev > 0.0)) {
        return Err(Error::NotPositiveDefinite("row scatter S2"));
    }

    // reduced two-row diagonal problem: row 1 = diag(I), row 2 = eigenvalues
    let q_dim = eigen.eigenvalues.len();
    let y2 = DMatrix::from_fn(
        2,
        q_dim,
        |i, j| if i == 0 { 1.0 } else { eigen.eigenvalues[j] },
    );
    let sol = solve_diagonal_y2(&y2, n, &[1.0, 1.0], 10_000, 1e-14)?;

    let gamma_diag = sol.gamma;
    let gamma = DMatrix::from_diagonal(&DVector::from_row_slice(&gamma_diag));
    let psi = psi_equation_rhs(data, stats.m_hat(), &gamma)?;
    cholesky(&psi, "psi")?;
    finish_report(
        data,
        &stats,
        &gamma_diag,
        &psi,
        sol.status,
        sol.iterations,
        Vec::new(),
    )
}

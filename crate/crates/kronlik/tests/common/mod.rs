//! Shared oracles and generators for the integration suites. Everything here
//! is deliberately independent of the solver paths it checks: dense linear
//! algebra instead of Cholesky factor tricks, grid search instead of fixed
//! points.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kronlik::{flip_flop, FlipFlopConfig, KroneckerCovariance, MatrixDataset, SolveStatus};

pub const LN_2PI: f64 = 1.8378770664093453;

pub fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() - 0.5);
    let m = &a * a.transpose() + DMatrix::identity(dim, dim) * (0.25 * dim as f64);
    (&m + m.transpose()) * 0.5
}

pub fn random_data(n: usize, p: usize, q: usize, rng: &mut ChaCha8Rng) -> MatrixDataset {
    let obs = (0..n)
        .map(|_| DMatrix::from_fn(p, q, |_, _| 2.0 * rng.random::<f64>() - 1.0))
        .collect();
    MatrixDataset::new(obs).unwrap()
}

/// The 2x2 component pair used for the n = 3 simulation experiments.
pub fn reference_pair() -> (DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_row_slice(2, 2, &[0.15, 0.24, 0.24, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.69, 0.26, 0.26, 0.15]),
    )
}

/// Dense oracle: sum of pq-variate normal log-densities with the explicitly
/// assembled Kronecker product, via LU determinant and explicit inverse.
pub fn dense_log_density(
    data: &MatrixDataset,
    mean: &DMatrix<f64>,
    cov: &KroneckerCovariance,
) -> f64 {
    let pq = (data.p() * data.q()) as f64;
    let big = cov.kron_product();
    let det = big.determinant();
    let inv = big.try_inverse().expect("oracle covariance is invertible");
    let mut ll = 0.0;
    for x in data.observations() {
        let r = x - mean;
        let v = DMatrix::from_column_slice(r.nrows() * r.ncols(), 1, r.as_slice());
        let quad = (v.transpose() * &inv * &v)[(0, 0)];
        ll += -0.5 * pq * LN_2PI - 0.5 * det.ln() - 0.5 * quad;
    }
    ll
}

/// Run the flip-flop from `starts` random PD initializations for a fixed
/// generous budget and report the maximum pairwise relative Frobenius
/// distance between the canonical products, plus how many runs formally
/// converged. Near-borderline unique datasets crawl to their single point
/// slower than any fixed product tolerance, so the spread of the final
/// iterates is the robust signal, not the convergence flag.
pub fn multi_start_spread(
    data: &MatrixDataset,
    starts: usize,
    seed: u64,
    max_iterations: usize,
) -> (f64, usize) {
    let q = data.q();
    let mut products: Vec<KroneckerCovariance> = Vec::with_capacity(starts);
    let mut converged = 0usize;
    for s in 0..starts as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s));
        let config = FlipFlopConfig {
            init_psi: Some(random_spd(q, &mut rng)),
            max_iterations,
            ..FlipFlopConfig::default()
        };
        let report = flip_flop(data, &config).expect("solver preconditions hold");
        if report.status == SolveStatus::Converged {
            converged += 1;
        }
        products.push(report.covariance);
    }
    let mut spread: f64 = 0.0;
    for i in 0..products.len() {
        for j in (i + 1)..products.len() {
            spread = spread.max(products[i].rel_product_distance(&products[j]));
        }
    }
    (spread, converged)
}

/// Brute-force minimizer of `prod_j (sum_i Y2_ij / gamma_i)` over positive
/// gammas with unit product: nested grid refinement in log space inside the
/// determinant-ratio box, then coordinate-wise parabolic interpolation on the
/// final grid. Uses objective evaluations only.
pub fn grid_oracle_gamma(y2: &DMatrix<f64>, passes: usize, points: usize) -> Vec<f64> {
    let (p, q) = (y2.nrows(), y2.ncols());
    if p == 1 {
        return vec![1.0];
    }

    // box from the determinant ratios, in log space
    let col_log_sums: Vec<f64> = (0..q)
        .map(|j| (0..p).map(|i| y2[(i, j)]).sum::<f64>().ln())
        .collect();
    let total: f64 = col_log_sums.iter().sum();
    let mut log_l = f64::INFINITY;
    for i in 0..p {
        let log_det_i: f64 = (0..q).map(|j| y2[(i, j)].ln()).sum();
        log_l = log_l.min((log_det_i - total) / q as f64);
    }
    let (lo, hi) = (log_l, -(p as f64 - 1.0) * log_l);

    // log of the objective at free coordinates x (gamma_p fixed by the
    // unit-product constraint)
    assert!(p <= 8 && points >= 2);
    let objective = |x: &[f64]| -> f64 {
        let mut inv = [0.0f64; 8];
        for (k, xi) in x.iter().enumerate() {
            inv[k] = (-xi).exp();
        }
        inv[p - 1] = x.iter().sum::<f64>().exp();
        let mut value = 0.0;
        for j in 0..q {
            let mut acc = 0.0;
            for (i, inv_i) in inv.iter().enumerate().take(p) {
                acc += y2[(i, j)] * inv_i;
            }
            value += acc.ln();
        }
        value
    };

    let free = p - 1;
    let mut center = vec![0.5 * (lo + hi); free];
    let mut half = vec![0.5 * (hi - lo); free];
    let mut best = center.clone();
    let mut spacing = 0.0;
    for _ in 0..passes {
        let mut best_value = f64::INFINITY;
        let mut idx = vec![0usize; free];
        let mut x = vec![0.0; free];
        'grid: loop {
            for k in 0..free {
                x[k] = center[k] - half[k] + 2.0 * half[k] * idx[k] as f64 / (points - 1) as f64;
            }
            let value = objective(&x);
            if value < best_value {
                best_value = value;
                best.copy_from_slice(&x);
            }
            // odometer increment over the multi-index
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < points {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == free {
                    break 'grid;
                }
            }
        }
        spacing = 2.0 * half[0] / (points - 1) as f64;
        center.copy_from_slice(&best);
        half.fill(spacing);
    }

    // parabolic vertex refinement along each coordinate; the probe spacing
    // shrinks every cycle so the quadratic fit tightens around the minimizer
    let mut x = best;
    let mut probe = spacing;
    for _ in 0..12 {
        for k in 0..free {
            let f0 = objective(&x);
            let mut xm = x.clone();
            xm[k] -= probe;
            let mut xp = x.clone();
            xp[k] += probe;
            let (fm, fp) = (objective(&xm), objective(&xp));
            let curvature = fm - 2.0 * f0 + fp;
            if curvature > 0.0 {
                let shift = 0.5 * probe * (fm - fp) / curvature;
                if shift.abs() <= probe {
                    x[k] += shift;
                }
            }
        }
        probe = (probe * 0.5).max(1e-7);
    }

    let mut gamma: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    gamma.push((-x.iter().sum::<f64>()).exp());
    gamma
}

//! Sufficient statistics: the mean matrix, entrywise squared residuals and
//! per-row scatter matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::MatrixDataset;
use crate::error::{Error, Result};

/// Sufficient statistics of a dataset.
///
/// `y_squared(i,j) = sum_k (X_k(i,j) - m_hat(i,j))^2` and `row_scatter[i]` is
/// the unnormalized q×q scatter of row i, with (j1,j2) entry
/// `sum_k (X_k(i,j1) - m_hat(i,j1)) (X_k(i,j2) - m_hat(i,j2))`. Solvers apply
/// their own 1/(np) or 1/(nq) normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    m_hat: DMatrix<f64>,
    y_squared: DMatrix<f64>,
    row_scatter: Vec<DMatrix<f64>>,
    n: usize,
}

impl SufficientStats {
    /// The sample mean, or the known mean when one was provided.
    pub fn m_hat(&self) -> &DMatrix<f64> {
        &self.m_hat
    }

    pub fn y_squared(&self) -> &DMatrix<f64> {
        &self.y_squared
    }

    /// Unnormalized per-row scatter matrices S_1, ..., S_p.
    pub fn row_scatter(&self) -> &[DMatrix<f64>] {
        &self.row_scatter
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.m_hat.nrows()
    }

    pub fn q(&self) -> usize {
        self.m_hat.ncols()
    }
}

/// Compute the mean, Y^2 table and row scatters of a dataset.
///
/// With a known mean, n = 1 is allowed; otherwise n >= 2 is required because
/// centering a single observation by itself leaves no residual information.
pub fn compute_stats(data: &MatrixDataset) -> Result<SufficientStats> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    let m_hat = match data.known_mean() {
        Some(m) => m.clone(),
        None => {
            if n < 2 {
                return Err(Error::InsufficientData);
            }
            let mut m = DMatrix::zeros(p, q);
            for x in data.observations() {
                m += x;
            }
            m / n as f64
        }
    };

    let residuals: Vec<DMatrix<f64>> = data.observations().iter().map(|x| x - &m_hat).collect();

    let mut y_squared = DMatrix::zeros(p, q);
    for r in &residuals {
        y_squared += r.component_mul(r);
    }

    let mut row_scatter = Vec::with_capacity(p);
    for i in 0..p {
        let mut s = DMatrix::zeros(q, q);
        for r in &residuals {
            let row = r.row(i);
            // rank-one accumulation row^T row
            s += row.transpose() * row;
        }
        row_scatter.push(s);
    }

    Ok(SufficientStats {
        m_hat,
        y_squared,
        row_scatter,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_pair_centers_to_zero() {
        let x1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let x2 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let stats = compute_stats(&MatrixDataset::new(vec![x1, x2]).unwrap()).unwrap();
        assert_eq!(stats.m_hat(), &DMatrix::zeros(2, 2));
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        assert_eq!(stats.y_squared(), &expected);
    }

    #[test]
    fn known_mean_allows_single_observation() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        let data = MatrixDataset::with_known_mean(vec![x.clone()], DMatrix::zeros(2, 2)).unwrap();
        let stats = compute_stats(&data).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(stats.y_squared()[(i, j)], x[(i, j)] * x[(i, j)]);
            }
        }
    }

    #[test]
    fn single_observation_without_mean_fails() {
        let data = MatrixDataset::new(vec![DMatrix::zeros(2, 2)]).unwrap();
        assert!(matches!(compute_stats(&data), Err(Error::InsufficientData)));
    }

    #[test]
    fn row_scatter_matches_double_loop_oracle() {
        // random 3x2x2 dataset with a fixed seed, checked against a direct
        // (k, j1, j2) accumulation
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let obs: Vec<DMatrix<f64>> = (0..3)
            .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5))
            .collect();
        let data = MatrixDataset::new(obs.clone()).unwrap();
        let stats = compute_stats(&data).unwrap();

        let mut m = DMatrix::zeros(2, 2);
        for x in &obs {
            m += x;
        }
        m /= 3.0;
        for i in 0..2 {
            for j1 in 0..2 {
                for j2 in 0..2 {
                    let mut acc = 0.0;
                    for x in &obs {
                        acc += (x[(i, j1)] - m[(i, j1)]) * (x[(i, j2)] - m[(i, j2)]);
                    }
                    assert_relative_eq!(stats.row_scatter()[i][(j1, j2)], acc, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn simulated_residual_cells_are_strictly_positive() {
        // continuous data: every Y^2 cell is positive with probability 1
        let gamma = DMatrix::identity(3, 3);
        let psi = DMatrix::identity(2, 2);
        for seed in 0..20 {
            let data = crate::simulate::simulate_dataset(&gamma, &psi, None, 2, seed).unwrap();
            let stats = compute_stats(&data).unwrap();
            assert!(stats.y_squared().iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn y_squared_is_scatter_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let obs: Vec<DMatrix<f64>> = (0..5)
            .map(|_| DMatrix::from_fn(3, 4, |_, _| rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let stats = compute_stats(&MatrixDataset::new(obs).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert_relative_eq!(
                    stats.y_squared()[(i, j)],
                    stats.row_scatter()[i][(j, j)],
                    epsilon = 1e-13
                );
            }
        }
    }
}

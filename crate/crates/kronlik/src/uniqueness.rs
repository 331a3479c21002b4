//! Analytic uniqueness diagnosis for n = 3, p = q = 2.
//!
//! With Gamma parameterized as [[a, b], [b, 1]] and Psi profiled out through
//! its likelihood equation, the stationary points of the profile likelihood
//! are described by three curves g, h1, h2 built from two data ratios V1, V2.
//! The sign of the discriminant of W(b) = b² + V1·b + V2 decides everything:
//! positive means a whole interval of maximizers (non-unique MLE), negative
//! means a single stationary point (unique MLE). The coefficient V3 in
//! h2(b) = -V2·b/(b + V3) equals V1; the derivative-root oracle in the tests
//! re-derives both stationarity equations numerically from determinant
//! evaluations alone and confirms the coincidence.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::KroneckerCovariance;
use crate::dataset::MatrixDataset;
use crate::error::{Error, Result};
use crate::likelihood::{log_likelihood, psi_equation_rhs};
use crate::simulate::sample_matrices;
use crate::stats::compute_stats;

/// Default relative threshold below which |disc(W)| is refused as borderline.
pub const DEFAULT_BORDERLINE_EPS: f64 = 1e-8;

/// Relative threshold on the shared V denominator.
const DENOMINATOR_EPS: f64 = 1e-12;

/// 97.5% standard normal quantile, for the 95% binomial interval.
const Z_95: f64 = 1.959963984540054;

/// Centered residual table for the 2×2, n = 3 analysis: row i holds the
/// three centered values of matrix position (1,1), (1,2), (2,1), (2,2)
/// respectively, so every row sums to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub r: [[f64; 3]; 4],
}

/// The quadratic W(b) = b² + V1·b + V2 and the h2 pole coefficient V3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WPolynomial {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    /// disc(W) = V1² - 4·V2.
    pub discriminant: f64,
}

/// Classification of a dataset by the sign of disc(W).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Unique,
    NonUnique,
    /// |disc| within the refusal band; no claim is made (the exactly-zero
    /// event has probability 0).
    Borderline,
}

/// Full uniqueness diagnosis of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub classification: Classification,
    pub w: WPolynomial,
    /// Open interval where W < 0; present iff non-unique.
    pub interval: Option<(f64, f64)>,
    /// The solution (a, b) of g = h2 with a > b²; present iff unique.
    pub unique_point: Option<(f64, f64)>,
    /// Common log-likelihood over the maximizer family (non-unique case).
    pub family_loglik: Option<f64>,
}

/// One evaluation point of the stationarity curves.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvePoint {
    pub b: f64,
    pub g: f64,
    pub h1: f64,
    pub h2: f64,
    /// Whether W(b) < 0 at this point (the region where g = h1 exactly).
    pub w_negative: bool,
}

/// Result of the non-uniqueness Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    /// Fraction of replications classified non-unique.
    pub fraction: f64,
    /// 95% binomial (Wald) interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub replications: usize,
    pub non_unique: usize,
    /// Replications refused as borderline or degenerate (counted as not
    /// non-unique in `fraction`).
    pub refused: usize,
}

/// Build the centered residual table; requires n = 3 and p = q = 2.
pub fn residual_table(data: &MatrixDataset) -> Result<ResidualTable> {
    if data.n() != 3 || data.p() != 2 || data.q() != 2 {
        return Err(Error::WrongShape(format!(
            "the analyzer needs n = 3, p = q = 2; got n = {}, p = {}, q = {}",
            data.n(),
            data.p(),
            data.q()
        )));
    }
    let obs = data.observations();
    let mut r = [[0.0; 3]; 4];
    for (row, (i, j)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
        let mean = (obs[0][(*i, *j)] + obs[1][(*i, *j)] + obs[2][(*i, *j)]) / 3.0;
        for k in 0..3 {
            r[row][k] = obs[k][(*i, *j)] - mean;
        }
    }
    Ok(ResidualTable { r })
}

/// Compute V1, V2, V3 and disc(W) from the residual table.
///
/// All three coefficients are ratios of 2×2 minors of the residual rows over
/// the shared denominator r3 x r4 (first two columns); they are invariant
/// under positive rescaling of the data.
pub fn compute_w(stats: &ResidualTable) -> Result<WPolynomial> {
    let r = &stats.r;
    let minor = |x: &[f64; 3], y: &[f64; 3]| x[0] * y[1] - x[1] * y[0];
    let den = minor(&r[2], &r[3]);
    let scale = r.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if den.abs() <= DENOMINATOR_EPS * scale * scale {
        return Err(Error::DegenerateDenominator);
    }
    let v1 = (minor(&r[1], &r[2]) - minor(&r[0], &r[3])) / den;
    let v2 = minor(&r[0], &r[1]) / den;
    let v3 = v1;
    Ok(WPolynomial {
        v1,
        v2,
        v3,
        discriminant: v1 * v1 - 4.0 * v2,
    })
}

impl WPolynomial {
    /// W(b) = b² + V1·b + V2.
    pub fn eval(&self, b: f64) -> f64 {
        b * b + self.v1 * b + self.v2
    }

    /// g(b) = b² + |W(b)|, the admissible stationary branch in a.
    pub fn g(&self, b: f64) -> f64 {
        b * b + self.eval(b).abs()
    }

    /// h1(b) = -V1·b - V2.
    pub fn h1(&self, b: f64) -> f64 {
        -self.v1 * b - self.v2
    }

    /// h2(b) = -V2·b / (b + V3); pole at b = -V3.
    pub fn h2(&self, b: f64) -> f64 {
        -self.v2 * b / (b + self.v3)
    }
}

/// Evaluate g, h1, h2 on a grid of b values, for plot-data emission.
pub fn curves(w: &WPolynomial, b_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    let pole_eps = 1e-9 * (1.0 + w.v3.abs());
    let mut out = Vec::with_capacity(b_grid.len());
    for &b in b_grid {
        if (b + w.v3).abs() <= pole_eps {
            return Err(Error::PoleOnGrid(b));
        }
        out.push(CurvePoint {
            b,
            g: w.g(b),
            h1: w.h1(b),
            h2: w.h2(b),
            w_negative: w.eval(b) < 0.0,
        });
    }
    Ok(out)
}

/// Classify by the sign of disc(W) relative to `borderline_eps`.
///
/// Non-unique: the interval between the roots of W is reported. Unique: the
/// single solution of g = h2 with a > b² is located by bracketing and
/// bisection. Borderline: within measure zero of a double root, so
/// classification is refused rather than guessed.
pub fn classify(w: &WPolynomial, borderline_eps: f64) -> Result<UniquenessReport> {
    match classification_only(w, borderline_eps) {
        Classification::NonUnique => {
            let (lo, hi) = w_roots(w);
            Ok(UniquenessReport {
                classification: Classification::NonUnique,
                w: *w,
                interval: Some((lo, hi)),
                unique_point: None,
                family_loglik: None,
            })
        }
        Classification::Unique => {
            let b = solve_g_equals_h2(w)?;
            Ok(UniquenessReport {
                classification: Classification::Unique,
                w: *w,
                interval: None,
                unique_point: Some((w.g(b), b)),
                family_loglik: None,
            })
        }
        Classification::Borderline => Ok(UniquenessReport {
            classification: Classification::Borderline,
            w: *w,
            interval: None,
            unique_point: None,
            family_loglik: None,
        }),
    }
}

fn classification_only(w: &WPolynomial, borderline_eps: f64) -> Classification {
    // eps is relative to the natural scale of the discriminant terms
    let scale = (w.v1 * w.v1 + 4.0 * w.v2.abs()).max(1.0);
    if w.discriminant > borderline_eps * scale {
        Classification::NonUnique
    } else if w.discriminant < -borderline_eps * scale {
        Classification::Unique
    } else {
        Classification::Borderline
    }
}

/// Roots of W in increasing order, with the cancellation-free formulation.
fn w_roots(w: &WPolynomial) -> (f64, f64) {
    let sqrt_d = w.discriminant.sqrt();
    if w.v1 == 0.0 {
        return (-0.5 * sqrt_d, 0.5 * sqrt_d);
    }
    let qq = -0.5 * (w.v1 + w.v1.signum() * sqrt_d);
    let (r1, r2) = (qq, w.v2 / qq);
    if r1 <= r2 {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

/// Locate the single real solution of g(b) = h2(b) by a coarse scan on both
/// sides of the pole followed by bisection.
///
/// With disc(W) < 0, W > 0 everywhere, so g - h2 = (2b + V1) W(b) / (b + V3):
/// it crosses zero exactly once, at b = -V1/2, and flips sign only there and
/// at the excluded pole. A bracket therefore exists on one side of the pole
/// unless V1 is numerically zero, which is reported rather than patched.
fn solve_g_equals_h2(w: &WPolynomial) -> Result<f64> {
    let f = |b: f64| w.g(b) - w.h2(b);
    let pole = -w.v3;
    let mut reach = 10.0 * (1.0 + w.v1.abs() + w.v2.abs() + w.v3.abs());
    for _ in 0..10 {
        let gap = 1e-10 * (1.0 + pole.abs());
        let segments = [(pole - reach, pole - gap), (pole + gap, pole + reach)];
        for (lo, hi) in segments {
            if !(lo < hi) {
                continue;
            }
            if let Some((blo, bhi)) = scan_for_sign_change(&f, lo, hi, 4096) {
                return Ok(bisect(&f, blo, bhi));
            }
        }
        reach *= 8.0;
    }
    Err(Error::RootNotBracketed)
}

fn scan_for_sign_change(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Option<(f64, f64)> {
    let mut prev_b = lo;
    let mut prev_v = f(lo);
    for k in 1..=steps {
        let b = lo + (hi - lo) * k as f64 / steps as f64;
        let v = f(b);
        if prev_v == 0.0 {
            return Some((prev_b, prev_b));
        }
        if v.is_finite() && prev_v.is_finite() && v.signum() != prev_v.signum() {
            return Some((prev_b, b));
        }
        prev_b = b;
        prev_v = v;
    }
    None
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            return mid;
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Materialize the covariance pair at a stationary point (a, b): Gamma is
/// [[a, b], [b, 1]] and Psi comes from its likelihood equation.
pub fn point_covariance(data: &MatrixDataset, a: f64, b: f64) -> Result<KroneckerCovariance> {
    if a <= b * b {
        return Err(Error::NotInInterval(b));
    }
    let stats = compute_stats(data)?;
    let gamma = DMatrix::from_row_slice(2, 2, &[a, b, b, 1.0]);
    let psi = psi_equation_rhs(data, stats.m_hat(), &gamma)?;
    Ok(KroneckerCovariance::new(gamma, psi)?.canonicalize())
}

/// Extract maximizer-family members at the given b values, all strictly
/// inside the non-uniqueness interval.
///
/// Each member has Gamma(b) = [[g(b), b], [b, 1]] with g = h1 on the
/// interval; all members solve both likelihood equations and share one
/// log-likelihood value. The endpoints are excluded: there W = 0, so
/// a = b² and Gamma degenerates.
pub fn family(
    data: &MatrixDataset,
    report: &UniquenessReport,
    b_values: &[f64],
) -> Result<Vec<KroneckerCovariance>> {
    if report.classification != Classification::NonUnique {
        return Err(Error::NotNonUnique);
    }
    let (lo, hi) = report
        .interval
        .expect("non-unique report carries its interval");
    let mut out = Vec::with_capacity(b_values.len());
    for &b in b_values {
        if !(b > lo && b < hi) {
            return Err(Error::NotInInterval(b));
        }
        let a = report.w.h1(b);
        out.push(point_covariance(data, a, b)?);
    }
    Ok(out)
}

/// Full pipeline: residuals, W, classification, and the family log-likelihood
/// at the interval midpoint in the non-unique case.
pub fn diagnose(data: &MatrixDataset, borderline_eps: f64) -> Result<UniquenessReport> {
    let stats = residual_table(data)?;
    let w = compute_w(&stats)?;
    let mut report = classify(&w, borderline_eps)?;
    if report.classification == Classification::NonUnique {
        let (lo, hi) = report
            .interval
            .expect("non-unique report carries its interval");
        let mid = 0.5 * (lo + hi);
        let member = point_covariance(data, report.w.h1(mid), mid)?;
        let s = compute_stats(data)?;
        report.family_loglik = Some(log_likelihood(data, s.m_hat(), &member)?);
    }
    Ok(report)
}

/// Monte Carlo estimate of the probability that a dataset of three
/// observations from N(0, Psi ⊗ Gamma) has a non-unique MLE.
///
/// Replication k draws from its own generator seeded with `seed ^ k`, so the
/// result is identical for any parallelism degree; the reduction is a plain
/// sum of indicator counts.
pub fn nonuniqueness_probability(
    gamma: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    replications: usize,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    if gamma.nrows() != 2 || psi.nrows() != 2 {
        return Err(Error::WrongShape(
            "the experiment is defined for 2x2 components".into(),
        ));
    }
    if replications < 100 {
        return Err(Error::WrongShape(format!(
            "replications must be >= 100, got {replications}"
        )));
    }
    // validate PD once up front
    let _ = KroneckerCovariance::new(gamma.clone(), psi.clone())?;

    let (non_unique, refused) = (0..replications as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k);
            let obs = sample_matrices(gamma, psi, None, 3, &mut rng)
                .expect("components were validated as PD");
            let data = MatrixDataset::new(obs).expect("sampled observations are well-formed");
            match residual_table(&data).and_then(|s| compute_w(&s)) {
                Ok(w) => match classification_only(&w, DEFAULT_BORDERLINE_EPS) {
                    Classification::NonUnique => (1usize, 0usize),
                    Classification::Unique => (0, 0),
                    Classification::Borderline => (0, 1),
                },
                Err(_) => (0, 1),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let fraction = non_unique as f64 / replications as f64;
    let half = Z_95 * (fraction * (1.0 - fraction) / replications as f64).sqrt();
    Ok(ProbabilityEstimate {
        fraction,
        ci_low: (fraction - half).max(0.0),
        ci_high: (fraction + half).min(1.0),
        replications,
        non_unique,
        refused,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::likelihood_equation_residual;
    use crate::simulate::simulate_dataset;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn section24_pair() -> (DMatrix<f64>, DMatrix<f64>) {
        (
            DMatrix::from_row_slice(2, 2, &[0.15, 0.24, 0.24, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.69, 0.26, 0.26, 0.15]),
        )
    }

    fn dataset(seed: u64) -> MatrixDataset {
        let (g, p) = section24_pair();
        simulate_dataset(&g, &p, None, 3, seed).unwrap()
    }

    #[test]
    fn residual_rows_are_centered() {
        let stats = residual_table(&dataset(1)).unwrap();
        for row in &stats.r {
            assert!(row.iter().sum::<f64>().abs() <= 1e-15);
        }
    }

    #[test]
    fn residuals_of_engineered_data() {
        // X_k(1,1) = k, other entries distinct constants so the denominator
        // rows stay independent
        let mk = |k: f64| DMatrix::from_row_slice(2, 2, &[k, 0.0, 0.0, 0.0]);
        let data = MatrixDataset::new(vec![mk(1.0), mk(2.0), mk(3.0)]).unwrap();
        let stats = residual_table(&data).unwrap();
        assert_eq!(stats.r[0], [-1.0, 0.0, 1.0]);
        assert_eq!(stats.r[1], [0.0; 3]);
        assert_eq!(stats.r[2], [0.0; 3]);
        assert_eq!(stats.r[3], [0.0; 3]);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let data = MatrixDataset::new(vec![DMatrix::zeros(3, 3); 3]).unwrap();
        assert!(matches!(residual_table(&data), Err(Error::WrongShape(_))));
        let data = MatrixDataset::new(vec![DMatrix::zeros(2, 2); 4]).unwrap();
        assert!(matches!(residual_table(&data), Err(Error::WrongShape(_))));
    }

    #[test]
    fn v_coefficients_are_scale_invariant() {
        let data = dataset(2);
        let w = compute_w(&residual_table(&data).unwrap()).unwrap();
        let w5 = compute_w(&residual_table(&data.scaled(5.0)).unwrap()).unwrap();
        assert_relative_eq!(w.v1, w5.v1, max_relative = 1e-12);
        assert_relative_eq!(w.v2, w5.v2, max_relative = 1e-12);
        assert_relative_eq!(w.discriminant, w5.discriminant, max_relative = 1e-12);
    }

    #[test]
    fn dependent_denominator_rows_are_degenerate() {
        // second matrix row identical across the position pair (2,1)/(2,2)
        // makes residual rows 3 and 4 proportional
        let mk = |a: f64, b: f64, c: f64| DMatrix::from_row_slice(2, 2, &[a, b, c, c]);
        let data = MatrixDataset::new(vec![
            mk(1.0, 0.3, 2.0),
            mk(-0.4, 1.0, -1.0),
            mk(0.2, -0.8, 0.5),
        ])
        .unwrap();
        assert!(matches!(
            compute_w(&residual_table(&data).unwrap()),
            Err(Error::DegenerateDenominator)
        ));
    }

    /// Independent derivative-root oracle: recover the denominator
    /// coefficients of the profile likelihood from determinant evaluations
    /// alone, then check the V-based curves against the quadratic roots of
    /// both stationarity equations.
    #[test]
    fn derivative_root_oracle_validates_v_formulas() {
        for trial in 0..50 {
            let data = dataset(5000 + trial);
            let stats = compute_stats(&data).unwrap();
            let w = compute_w(&residual_table(&data).unwrap()).unwrap();

            // denominator of the profile likelihood as a function of (a, b)
            let dn = |a: f64, b: f64| -> f64 {
                let qm = DMatrix::from_row_slice(2, 2, &[1.0, -b, -b, a]);
                let mut t = DMatrix::zeros(2, 2);
                for x in data.observations() {
                    let r = x - stats.m_hat();
                    t += r.transpose() * &qm * r;
                }
                t /= 6.0;
                t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)]
            };
            // Dn(a,b) = C + B1 b + A1 a + AB ab + B2 b^2 + A2 a^2, solved from
            // six evaluations
            let c = dn(0.0, 0.0);
            let d10 = dn(1.0, 0.0) - c;
            let d20 = dn(2.0, 0.0) - c;
            let a2 = (d20 - 2.0 * d10) / 2.0;
            let a1 = d10 - a2;
            let e01 = dn(0.0, 1.0) - c;
            let e02 = dn(0.0, 2.0) - c;
            let b2 = (e02 - 2.0 * e01) / 2.0;
            let b1 = e01 - b2;
            let ab = dn(1.0, 1.0) - c - a1 - a2 - b1 - b2;

            // structural identities tying the coefficients to V1, V2
            assert_relative_eq!(ab / a2, 2.0 * w.v1, max_relative = 1e-8);
            assert_relative_eq!(b1 / a2, 2.0 * w.v1 * w.v2, max_relative = 1e-8);
            assert_relative_eq!(c / a2, w.v2 * w.v2, max_relative = 1e-8);
            assert_relative_eq!(
                (a1 + b2) / a2,
                w.v1 * w.v1 + 2.0 * w.v2,
                max_relative = 1e-8
            );

            for b in [-1.7, -0.3, 0.4, 2.1] {
                // d/da = 0: A2 a^2 - 2 A2 b^2 a - (C + B1 b + (A1+B2) b^2 + AB b^3) = 0
                // has roots b^2 ± W(b); the larger one is exactly g(b)
                let rhs = c + b1 * b + (a1 + b2) * b * b + ab * b * b * b;
                let disc = (b * b) * (b * b) + rhs / a2;
                assert!(disc >= -1e-8 * (1.0 + (b * b) * (b * b) + (rhs / a2).abs()));
                let root_hi = b * b + disc.max(0.0).sqrt();
                assert_relative_eq!(root_hi, w.g(b), max_relative = 1e-7, epsilon = 1e-9);

                // d/db = 0: (AB + 2 A2 b) a^2 + (B1 + 2(A1+B2) b + AB b^2) a
                //           + (2 C b + B1 b^2) = 0 has roots {h1(b), h2(b)}
                let qa = ab + 2.0 * a2 * b;
                let qb = b1 + 2.0 * (a1 + b2) * b + ab * b * b;
                let qc = 2.0 * c * b + b1 * b * b;
                let qd = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
                let mut roots = [(-qb - qd) / (2.0 * qa), (-qb + qd) / (2.0 * qa)];
                roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let mut expected = [w.h1(b), w.h2(b)];
                expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
                for (found, want) in roots.iter().zip(&expected) {
                    assert_relative_eq!(found, want, max_relative = 1e-7, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn explicit_quadratics_classify_trivially() {
        let w = WPolynomial {
            v1: 0.0,
            v2: -1.0,
            v3: 0.0,
            discriminant: 4.0,
        };
        let report = classify(&w, DEFAULT_BORDERLINE_EPS).unwrap();
        assert_eq!(report.classification, Classification::NonUnique);
        let (lo, hi) = report.interval.unwrap();
        assert_relative_eq!(lo, -1.0);
        assert_relative_eq!(hi, 1.0);

        let w = WPolynomial {
            v1: 1.0,
            v2: 1.0,
            v3: 1.0,
            discriminant: -3.0,
        };
        let report = classify(&w, DEFAULT_BORDERLINE_EPS).unwrap();
        assert_eq!(report.classification, Classification::Unique);
        let (a, b) = report.unique_point.unwrap();
        assert!(a > b * b);
        // g - h2 factors as (2b + V1) W(b) / (b + V3), so the root is -V1/2
        // and the a value is V2
        assert_relative_eq!(b, -0.5, epsilon = 1e-10);
        assert_relative_eq!(a, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn curve_identities_on_grid() {
        for seed in [3, 4, 5, 6] {
            let data = dataset(seed);
            let w = compute_w(&residual_table(&data).unwrap()).unwrap();
            let grid: Vec<f64> = (-40..=40)
                .map(|k| k as f64 * 0.1)
                .filter(|b| (b + w.v3).abs() > 1e-6)
                .collect();
            let pts = curves(&w, &grid).unwrap();
            for pt in &pts {
                if pt.w_negative {
                    // g = h1 exactly where W < 0, and the implied Gamma is PD
                    assert_relative_eq!(pt.g, pt.h1, max_relative = 1e-12);
                    assert!(pt.g > pt.b * pt.b);
                } else {
                    assert!(pt.g >= pt.b * pt.b);
                }
            }
            // b = 0 values
            let z = curves(&w, &[0.0]).unwrap()[0];
            assert_relative_eq!(z.g, w.v2.abs());
            assert_relative_eq!(z.h1, -w.v2);
            assert_relative_eq!(z.h2, 0.0);
        }
    }

    #[test]
    fn pole_on_grid_is_an_error() {
        let w = WPolynomial {
            v1: 2.0,
            v2: 1.5,
            v3: 2.0,
            discriminant: -2.0,
        };
        assert!(matches!(curves(&w, &[-2.0]), Err(Error::PoleOnGrid(_))));
    }

    #[test]
    fn family_members_share_likelihood_and_solve_equations() {
        // scan seeds for a non-unique dataset
        let (data, report) = (0..100u64)
            .find_map(|s| {
                let d = dataset(s);
                let r = diagnose(&d, DEFAULT_BORDERLINE_EPS).ok()?;
                (r.classification == Classification::NonUnique).then_some((d, r))
            })
            .expect("a non-unique dataset exists among the seeds");
        let (lo, hi) = report.interval.unwrap();
        let bs: Vec<f64> = (1..=5).map(|k| lo + (hi - lo) * k as f64 / 6.0).collect();
        let members = family(&data, &report, &bs).unwrap();
        let stats = compute_stats(&data).unwrap();
        let mut lls = Vec::new();
        for m in &members {
            assert!(likelihood_equation_residual(&stats, m, &data).unwrap() <= 1e-8);
            lls.push(log_likelihood(&data, stats.m_hat(), m).unwrap());
        }
        let spread = lls.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - lls.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(spread <= 1e-8);
        assert_relative_eq!(lls[0], report.family_loglik.unwrap(), max_relative = 1e-6);
        // distinct members have distinct products
        assert!(members[0].rel_product_distance(&members[4]) > 1e-3);

        // endpoints are excluded
        assert!(matches!(
            family(&data, &report, &[lo]),
            Err(Error::NotInInterval(_))
        ));
        assert!(matches!(
            family(&data, &report, &[hi + 1.0]),
            Err(Error::NotInInterval(_))
        ));
    }

    #[test]
    fn family_requires_non_unique() {
        let (data, report) = (0..100u64)
            .find_map(|s| {
                let d = dataset(s);
                let r = diagnose(&d, DEFAULT_BORDERLINE_EPS).ok()?;
                (r.classification == Classification::Unique).then_some((d, r))
            })
            .expect("a unique dataset exists among the seeds");
        assert!(matches!(
            family(&data, &report, &[0.0]),
            Err(Error::NotNonUnique)
        ));
        // the unique point solves both likelihood equations
        let (a, b) = report.unique_point.unwrap();
        let member = point_covariance(&data, a, b).unwrap();
        let stats = compute_stats(&data).unwrap();
        assert!(likelihood_equation_residual(&stats, &member, &data).unwrap() <= 1e-8);
    }

    #[test]
    fn unique_point_is_the_multistart_limit() {
        use crate::flipflop::{flip_flop, FlipFlopConfig, SolveStatus};
        let mut rng = ChaCha8Rng::seed_from_u64(31337);
        let (data, report) = (0..100u64)
            .find_map(|s| {
                let d = dataset(900 + s);
                let r = diagnose(&d, DEFAULT_BORDERLINE_EPS).ok()?;
                // stay away from the borderline so the fixed point is
                // reached within the iteration budget
                (r.classification == Classification::Unique && r.w.discriminant < -0.05)
                    .then_some((d, r))
            })
            .expect("a clearly unique dataset exists among the seeds");
        let (a, b) = report.unique_point.unwrap();
        let point = point_covariance(&data, a, b).unwrap();
        for _ in 0..10 {
            let m = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5);
            let psi0 = &m * m.transpose() + DMatrix::identity(2, 2) * 0.3;
            let config = FlipFlopConfig {
                init_psi: Some((&psi0 + psi0.transpose()) * 0.5),
                max_iterations: 20_000,
                ..FlipFlopConfig::default()
            };
            let run = flip_flop(&data, &config).unwrap();
            assert_eq!(run.status, SolveStatus::Converged);
            assert!(
                run.covariance.rel_product_distance(&point) <= 1e-6,
                "flip-flop limit differs from the analytic unique point by {}",
                run.covariance.rel_product_distance(&point)
            );
        }
    }

    #[test]
    fn ci_width_matches_binomial_arithmetic() {
        let (g, p) = section24_pair();
        let est = nonuniqueness_probability(&g, &p, 100, 5).unwrap();
        let width = est.ci_high - est.ci_low;
        let expected =
            2.0 * 1.959963984540054 * (est.fraction * (1.0 - est.fraction) / 100.0).sqrt();
        assert_relative_eq!(width, expected.min(1.0), max_relative = 1e-12);
        // at a fraction near 0.8 the 95% width is about 0.16
        assert!((width - 0.16).abs() < 0.05, "width {width}");
    }

    #[test]
    fn classification_is_scale_invariant() {
        for seed in 0..20u64 {
            let data = dataset(seed);
            let a = diagnose(&data, DEFAULT_BORDERLINE_EPS)
                .unwrap()
                .classification;
            let b = diagnose(&data.scaled(5.0), DEFAULT_BORDERLINE_EPS)
                .unwrap()
                .classification;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn probability_is_deterministic_and_positive_for_identity() {
        let eye = DMatrix::identity(2, 2);
        let a = nonuniqueness_probability(&eye, &eye, 1000, 7).unwrap();
        let b = nonuniqueness_probability(&eye, &eye, 1000, 7).unwrap();
        assert_eq!(a.fraction, b.fraction);
        assert!(
            a.fraction > 0.0,
            "non-uniqueness occurs with positive probability"
        );
    }

    #[test]
    fn probability_requires_enough_replications() {
        let eye = DMatrix::identity(2, 2);
        assert!(nonuniqueness_probability(&eye, &eye, 99, 1).is_err());
    }

    #[test]
    fn probability_independent_of_parallel_split() {
        // same indicator set whether or not rayon splits the range
        let (g, p) = section24_pair();
        let par = nonuniqueness_probability(&g, &p, 400, 99).unwrap();
        let serial: usize = (0..400u64)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(99 ^ k);
                let obs = sample_matrices(&g, &p, None, 3, &mut rng).unwrap();
                let data = MatrixDataset::new(obs).unwrap();
                let w = compute_w(&residual_table(&data).unwrap()).unwrap();
                matches!(
                    classification_only(&w, DEFAULT_BORDERLINE_EPS),
                    Classification::NonUnique
                ) as usize
            })
            .sum();
        assert_eq!(par.non_unique, serial);
    }

    #[test]
    fn diagnose_matches_analytic_roots_for_v_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        for _ in 0..50 {
            let v1 = 4.0 * (rng.random::<f64>() - 0.5);
            let v2 = 2.0 * (rng.random::<f64>() - 0.5);
            let disc = v1 * v1 - 4.0 * v2;
            let w = WPolynomial {
                v1,
                v2,
                v3: v1,
                discriminant: disc,
            };
            if disc.abs() < 1e-6 || v1.abs() < 1e-3 {
                continue;
            }
            let report = classify(&w, DEFAULT_BORDERLINE_EPS).unwrap();
            if disc > 0.0 {
                let (lo, hi) = report.interval.unwrap();
                assert_relative_eq!(w.eval(lo), 0.0, epsilon = 1e-9);
                assert_relative_eq!(w.eval(hi), 0.0, epsilon = 1e-9);
                assert!(w.eval(0.5 * (lo + hi)) < 0.0);
            } else {
                let (a, b) = report.unique_point.unwrap();
                assert_relative_eq!(a, w.h2(b), max_relative = 1e-9, epsilon = 1e-12);
                assert!(a > b * b);
                // closed-form cross-check of the bracketing root
                assert_relative_eq!(b, -0.5 * v1, max_relative = 1e-9, epsilon = 1e-11);
                assert_relative_eq!(a, v2, max_relative = 1e-8, epsilon = 1e-10);
            }
        }
    }
}

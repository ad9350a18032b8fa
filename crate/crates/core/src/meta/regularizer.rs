use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::stats::{normal_cdf, normal_pdf};
use crate::{Error, Result};

/// Unweighted regularizer terms of a `T × d` embedding matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerTerms {
    /// `Σ_j Σ_t (F_j(z_tj) − Φ(z_tj))²` with midpoint-rank empirical CDFs.
    pub ks: f64,
    /// `‖I − Cov(Z)‖²_F` with the unbiased sample covariance.
    pub cov: f64,
}

/// Draws used by [`calibrate_coefficients`].
pub const CALIBRATION_DRAWS: usize = 32;

fn check_shape(z: &[f64], t: usize, d: usize) -> Result<()> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!("regularizer needs at least 2 tasks, got {t}")));
    }
    if z.len() != t * d {
        return Err(Error::Arity { expected: t * d, got: z.len() });
    }
    Ok(())
}

/// Both terms for the row-major `t × d` matrix `z`. When `grad` is given,
/// `λ_KS·∂KS/∂Z + λ_Cov·∂Cov/∂Z` (scaled by `scale`) is added to it; ranks
/// are held constant.
pub fn regularizer_terms(
    z: &[f64],
    t: usize,
    d: usize,
    grad: Option<(&mut [f64], f64, f64, f64)>,
) -> Result<RegularizerTerms> {
    check_shape(z, t, d)?;
    let mut ks = 0.0;
    let mut ks_grad = grad.as_ref().map(|_| vec![0.0; t * d]);
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(t);
    for j in 0..d {
        column.clear();
        column.extend((0..t).map(|r| (z[r * d + j], r)));
        column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (rank, &(v, row)) in column.iter().enumerate() {
            let diff = (rank as f64 + 0.5) / t as f64 - normal_cdf(v);
            ks += diff * diff;
            if let Some(g) = ks_grad.as_mut() {
                g[row * d + j] = -2.0 * diff * normal_pdf(v);
            }
        }
    }

    let zm = DMatrix::from_row_slice(t, d, z);
    let means = zm.row_mean();
    let mut zc = zm;
    for mut row in zc.row_iter_mut() {
        row -= &means;
    }
    let c = zc.transpose() * &zc / (t as f64 - 1.0);
    let resid = DMatrix::identity(d, d) - c;
    let cov = resid.norm_squared();

    if let Some((g, lambda_ks, lambda_cov, scale)) = grad {
        // ∂‖I − C‖²/∂Z = (2/(T−1))·Zc·(−2(I − C))
        let gc = &zc * &resid * (-4.0 / (t as f64 - 1.0));
        let ksg = ks_grad.unwrap();
        for r in 0..t {
            for j in 0..d {
                g[r * d + j] += scale * (lambda_ks * ksg[r * d + j] + lambda_cov * gc[(r, j)]);
            }
        }
    }
    Ok(RegularizerTerms { ks, cov })
}

/// `λ_KS·KS + λ_Cov·Cov` for the row-major `t × d` matrix `z`.
pub fn regularizer(z: &[f64], t: usize, d: usize, lambda_ks: f64, lambda_cov: f64) -> Result<f64> {
    let terms = regularizer_terms(z, t, d, None)?;
    Ok(lambda_ks * terms.ks + lambda_cov * terms.cov)
}

/// Coefficients that make each weighted term average 1/2 under the prior:
/// `λ⁻¹ = 2·E[term]` over [`CALIBRATION_DRAWS`] draws `Z ~ N(0, I)`.
pub fn calibrate_coefficients(t: usize, d: usize, seed: u64) -> Result<(f64, f64)> {
    if t < 2 || d == 0 {
        return Err(Error::InvalidArgument(format!("cannot calibrate a {t} x {d} embedding")));
    }
    let mut rng = crate::rng::Rng::seed_from_u64(seed);
    let (mut ks, mut cov) = (0.0, 0.0);
    let mut z = vec![0.0; t * d];
    for _ in 0..CALIBRATION_DRAWS {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        let terms = regularizer_terms(&z, t, d, None)?;
        ks += terms.ks;
        cov += terms.cov;
    }
    let n = CALIBRATION_DRAWS as f64;
    Ok((n / (2.0 * ks), n / (2.0 * cov)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{central_differences, max_relative_error};
    use rand::Rng as _;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn randn(t: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        (0..t * d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn rejects_single_task() {
        assert!(regularizer(&[0.0, 1.0], 1, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn whitened_matrix_has_zero_covariance_term() {
        let (t, d) = (40, 3);
        let z = DMatrix::from_row_slice(t, d, &randn(t, d, 2));
        let mean = z.row_mean();
        let mut zc = z.clone();
        for mut r in zc.row_iter_mut() {
            r -= &mean;
        }
        let c = zc.tr_mul(&zc) / (t as f64 - 1.0);
        let l = c.cholesky().unwrap().l();
        let white = zc * l.transpose().try_inverse().unwrap();
        let flat: Vec<f64> = white.transpose().iter().copied().collect();
        let terms = regularizer_terms(&flat, t, d, None).unwrap();
        assert!(terms.cov < 1e-20, "{}", terms.cov);
    }

    #[test]
    fn normal_quantile_grid_has_vanishing_ks_term() {
        let (t, d) = (64, 4);
        let n = Normal::new(0.0, 1.0).unwrap();
        let mut rng = crate::rng::Rng::seed_from_u64(3);
        let mut z = vec![0.0; t * d];
        for j in 0..d {
            let mut rows: Vec<usize> = (0..t).collect();
            for i in (1..t).rev() {
                rows.swap(i, rng.random_range(0..=i));
            }
            for (k, &r) in rows.iter().enumerate() {
                z[r * d + j] = n.inverse_cdf((k as f64 + 0.5) / t as f64);
            }
        }
        let terms = regularizer_terms(&z, t, d, None).unwrap();
        assert!(terms.ks < 1e-6 * (d * t) as f64 * 1e-6, "{}", terms.ks);
    }

    #[test]
    fn invariant_to_row_permutation() {
        let (t, d) = (7, 3);
        let z = randn(t, d, 4);
        let mut p = Vec::new();
        for r in [3, 0, 6, 1, 5, 2, 4] {
            p.extend_from_slice(&z[r * d..(r + 1) * d]);
        }
        let a = regularizer(&z, t, d, 0.7, 1.3).unwrap();
        let b = regularizer(&p, t, d, 0.7, 1.3).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (t, d, seed) in [(2, 1, 0), (3, 2, 1), (5, 4, 2), (12, 3, 3)] {
            let z = randn(t, d, seed);
            let mut g = vec![0.0; t * d];
            regularizer_terms(&z, t, d, Some((&mut g, 0.8, 1.7, 1.0))).unwrap();
            let fd = central_differences(|q| regularizer(q, t, d, 0.8, 1.7).unwrap(), &z, 1e-6);
            assert!(max_relative_error(&g, &fd, 1e-6) < 1e-5, "t={t} d={d}");
        }
    }

    #[test]
    fn calibration_is_deterministic_and_sharpens_with_more_tasks() {
        let a = calibrate_coefficients(64, 5, 11).unwrap();
        assert_eq!(a, calibrate_coefficients(64, 5, 11).unwrap());
        let b = calibrate_coefficients(128, 5, 11).unwrap();
        assert!(b.0 > a.0, "λ_KS {} vs {}", b.0, a.0);
        assert!(a.0 > 0.0 && a.1 > 0.0);
    }

    #[test]
    fn calibrated_prior_sample_is_of_order_one() {
        let (t, d) = (128, 10);
        let (lk, lc) = calibrate_coefficients(t, d, 1).unwrap();
        let mut sum = 0.0;
        for s in 0..20 {
            let r = regularizer(&randn(t, d, 100 + s), t, d, lk, lc).unwrap();
            assert!((0.3..3.0).contains(&r), "{r}");
            sum += r;
        }
        assert!((sum / 20.0 - 1.0).abs() < 0.25);
    }
}

//! Sufficient dimension reduction by cumulative slicing.
//!
//! The kernel matrix averages outer products of cumulative mean vectors
//! E[Z 1(Y <= t)] over the observed responses, where Z is the standardized
//! predictor. Its top eigenvectors estimate a basis of the index space; the
//! structural dimension is picked by a ridge-penalized ratio of consecutive
//! squared eigenvalues, which needs no tuning beyond the ridge log(n)/n.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Predictors standardized to zero mean and identity covariance.
#[derive(Clone, Debug)]
pub struct StandardizedData {
    /// Standardized rows, n x p.
    pub z: DMatrix<f64>,
    /// Column means of the original data.
    pub mean: DVector<f64>,
    /// Inverse symmetric square root of the divisor-n sample covariance.
    pub cov_root_inv: DMatrix<f64>,
}

/// Center and whiten predictor rows with the divisor-n covariance.
///
/// Errors when the sample covariance is singular, naming the deficient rank.
pub fn standardize(x: &DMatrix<f64>) -> Result<StandardizedData> {
    let n = x.nrows();
    let p = x.ncols();
    if n < 2 {
        return Err(Error::invalid("standardization needs at least two rows"));
    }
    let mean = DVector::from_fn(p, |j, _| x.column(j).mean());
    let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let cov_root_inv = linalg::sym_inv_sqrt(&cov, 1e-12, "predictor covariance")?;
    let z = centered * &cov_root_inv;
    Ok(StandardizedData { z, mean, cov_root_inv })
}

/// Cumulative slicing kernel matrix
/// (1/n) sum_j alpha(Y_j) alpha(Y_j)' with
/// alpha(t) = (1/n) sum_i Z_i 1(Y_i <= t).
///
/// Symmetric and positive semi-definite. Computed in O(n p^2 + n log n) by
/// sorting on y; tied responses share one cumulative vector.
pub fn cse_matrix(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = z.nrows();
    let p = z.ncols();
    if y.len() != n {
        return Err(Error::invalid("z rows and y length differ"));
    }
    if n == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).expect("finite responses"));

    let mut m = DMatrix::zeros(p, p);
    let mut prefix = DVector::zeros(p);
    let mut k = 0;
    while k < n {
        // Advance through the tie group, accumulating all its rows first.
        let mut j = k;
        while j < n && y[order[j]] == y[order[k]] {
            prefix += z.row(order[j]).transpose();
            j += 1;
        }
        let group = (j - k) as f64;
        m += (&prefix * prefix.transpose()) * group;
        k = j;
    }
    // alpha vectors carry 1/n, the outer average another 1/n.
    m /= (n as f64).powi(3);
    Ok(m)
}

/// Structural dimension by the ridge-penalized eigenvalue ratio
/// argmin_i (lambda_{i+1}^2 + c) / (lambda_i^2 + c) with c = log(n)/n and
/// lambda_{p+1} = 0. Ties resolve to the smallest index.
///
/// `eigenvalues` must be nonnegative and sorted in descending order.
pub fn mrer(eigenvalues: &[f64], n: usize) -> Result<usize> {
    let p = eigenvalues.len();
    if p == 0 {
        return Err(Error::invalid("empty eigenvalue list"));
    }
    if n < 2 {
        return Err(Error::invalid("ratio penalty needs n >= 2"));
    }
    for w in eigenvalues.windows(2) {
        if w[1] > w[0] + 1e-12 * w[0].abs().max(1.0) {
            return Err(Error::invalid("eigenvalues must be sorted in descending order"));
        }
    }
    if eigenvalues.iter().any(|&v| v < -1e-10) {
        return Err(Error::invalid("eigenvalues must be nonnegative"));
    }
    let c = (n as f64).ln() / n as f64;
    let sq = |i: usize| -> f64 {
        if i < p {
            let v = eigenvalues[i].max(0.0);
            v * v
        } else {
            0.0
        }
    };
    let mut best = 0usize;
    let mut best_ratio = f64::INFINITY;
    for i in 0..p {
        let ratio = (sq(i + 1) + c) / (sq(i) + c);
        if ratio < best_ratio - 1e-15 {
            best_ratio = ratio;
            best = i;
        }
    }
    Ok(best + 1)
}

/// Estimated index space.
#[derive(Clone, Debug)]
pub struct SdrResult {
    /// Selected structural dimension, between 1 and p.
    pub q_hat: usize,
    /// Original-scale directions as unit columns, p x q_hat. Projections are
    /// formed as x' basis.
    pub basis: DMatrix<f64>,
    /// Eigenvector columns in the standardized scale, p x q_hat.
    pub basis_std: DMatrix<f64>,
    /// All p kernel eigenvalues, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
}

/// Standardize, build the cumulative slicing matrix, pick the dimension and
/// return the leading directions.
///
/// When `align_to` is given, each basis column is sign-flipped so its inner
/// product with that vector is nonnegative (zero inner products fall back to
/// a deterministic canonical sign).
pub fn reduce(x: &DMatrix<f64>, y: &DVector<f64>, align_to: Option<&DVector<f64>>) -> Result<SdrResult> {
    let std = standardize(x)?;
    let m = cse_matrix(&std.z, y)?;
    let (raw_values, vectors) = linalg::sym_eigen_desc(&m);
    let eigenvalues: Vec<f64> = raw_values.iter().map(|v| v.max(0.0)).collect();
    let q_hat = mrer(&eigenvalues, x.nrows())?;

    let p = x.ncols();
    let mut basis_std = DMatrix::zeros(p, q_hat);
    let mut basis = DMatrix::zeros(p, q_hat);
    for k in 0..q_hat {
        let v = vectors.column(k).into_owned();
        let mut orig = &std.cov_root_inv * &v;
        let norm = orig.norm();
        if norm > 0.0 {
            orig /= norm;
        }
        let mut flip = 1.0;
        let inner = match align_to {
            Some(target) if target.len() == p => target.dot(&orig),
            _ => 0.0,
        };
        if inner < 0.0 {
            flip = -1.0;
        } else if inner == 0.0 {
            // Canonical sign: largest-magnitude entry positive.
            let mut arg = 0;
            for i in 0..p {
                if orig[i].abs() > orig[arg].abs() {
                    arg = i;
                }
            }
            if orig[arg] < 0.0 {
                flip = -1.0;
            }
        }
        basis.set_column(k, &(orig * flip));
        basis_std.set_column(k, &(v * flip));
    }
    Ok(SdrResult { q_hat, basis, basis_std, eigenvalues })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn standardize_single_column() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let std = standardize(&x).unwrap();
        // sd with divisor n is sqrt(2/3).
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((std.z[(0, 0)] + expect).abs() < 1e-12);
        assert!(std.z[(1, 0)].abs() < 1e-12);
        assert!((std.z[(2, 0)] - expect).abs() < 1e-12);
    }

    #[test]
    fn standardize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(40, 3, |_, _| rng.sample::<f64, _>(StandardNormal) * 3.0 + 1.0);
        let first = standardize(&x).unwrap();
        let second = standardize(&first.z).unwrap();
        assert!((&second.z - &first.z).abs().max() < 1e-8);
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let mut x = DMatrix::zeros(10, 2);
        for i in 0..10 {
            x[(i, 0)] = i as f64;
            x[(i, 1)] = 5.0;
        }
        let err = standardize(&x).unwrap_err();
        assert!(err.to_string().contains("rank"));
    }

    #[test]
    fn cse_two_point_example() {
        let z = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let y = DVector::from_column_slice(&[1.0, 2.0]);
        let m = cse_matrix(&z, &y).unwrap();
        assert!((m[(0, 0)] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn cse_constant_response_on_centered_z() {
        let z = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 2.0, -2.0]);
        let y = DVector::from_element(4, 3.0);
        let m = cse_matrix(&z, &y).unwrap();
        // Every cumulative vector is the full mean of z, which is zero.
        assert!(m.abs().max() < 1e-15);
    }

    fn cse_brute_force(z: &DMatrix<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let n = z.nrows();
        let p = z.ncols();
        let mut m = DMatrix::zeros(p, p);
        for j in 0..n {
            let mut alpha = DVector::zeros(p);
            for i in 0..n {
                if y[i] <= y[j] {
                    alpha += z.row(i).transpose();
                }
            }
            alpha /= n as f64;
            m += &alpha * alpha.transpose();
        }
        m / n as f64
    }

    #[test]
    fn cse_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [2usize, 3, 6, 11, 20] {
            let z = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let m = cse_matrix(&z, &y).unwrap();
            let b = cse_brute_force(&z, &y);
            assert!((m - b).abs().max() < 1e-12);
        }
    }

    #[test]
    fn cse_handles_ties_like_brute_force() {
        let z = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, -1.0, 0.5, -0.5]);
        let y = DVector::from_column_slice(&[1.0, 1.0, 0.0, 1.0, 2.0]);
        let m = cse_matrix(&z, &y).unwrap();
        let b = cse_brute_force(&z, &y);
        assert!((m - b).abs().max() < 1e-14);
    }

    #[test]
    fn cse_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z = DMatrix::from_fn(25, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(25, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = cse_matrix(&z, &y).unwrap();
        let (values, _) = crate::linalg::sym_eigen_desc(&m);
        assert!(values.iter().all(|&v| v > -1e-12));
    }

    #[test]
    fn mrer_spike_at_one() {
        assert_eq!(mrer(&[1.0, 0.0, 0.0], 100).unwrap(), 1);
    }

    #[test]
    fn mrer_two_close_spikes() {
        assert_eq!(mrer(&[4.0, 3.9, 0.0], 100).unwrap(), 2);
    }

    #[test]
    fn mrer_single_eigenvalue() {
        assert_eq!(mrer(&[2.5], 50).unwrap(), 1);
    }

    #[test]
    fn mrer_all_zero_prefers_smallest() {
        // All ratios tie at 1; the smallest index wins.
        assert_eq!(mrer(&[0.0, 0.0, 0.0], 100).unwrap(), 1);
    }

    #[test]
    fn mrer_invariant_to_trailing_zeros() {
        let q = mrer(&[4.0, 3.9, 0.0], 100).unwrap();
        let q2 = mrer(&[4.0, 3.9, 0.0, 0.0, 0.0], 100).unwrap();
        assert_eq!(q, q2);
    }

    #[test]
    fn mrer_rejects_unsorted() {
        assert!(mrer(&[1.0, 2.0], 100).is_err());
    }

    #[test]
    fn reduce_finds_single_index_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 400;
        let p = 5;
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = DVector::from_element(p, 1.0 / (p as f64).sqrt());
        let y = DVector::from_fn(n, |i, _| {
            x.row(i).transpose().dot(&beta) + 0.5 * rng.sample::<f64, _>(StandardNormal)
        });
        let out = reduce(&x, &y, Some(&beta)).unwrap();
        assert_eq!(out.q_hat, 1);
        let dir = out.basis.column(0).into_owned();
        assert!(dir.dot(&beta).abs() > 0.97, "direction misses truth: {}", dir.dot(&beta));
        assert!(dir.dot(&beta) > 0.0, "alignment sign flipped");
    }

    #[test]
    fn reduce_alignment_flips_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 200;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = DVector::from_column_slice(&[std::f64::consts::FRAC_1_SQRT_2; 2]);
        let y = DVector::from_fn(n, |i, _| {
            x.row(i).transpose().dot(&beta) + 0.3 * rng.sample::<f64, _>(StandardNormal)
        });
        let plus = reduce(&x, &y, Some(&beta)).unwrap();
        let minus_target = -&beta;
        let minus = reduce(&x, &y, Some(&minus_target)).unwrap();
        assert!((plus.basis.column(0) + minus.basis.column(0)).abs().max() < 1e-12);
    }

    #[test]
    fn reduce_eigenvalue_count_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let x = DMatrix::from_fn(100, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(100, |i, _| x[(i, 0)] + 0.1 * rng.sample::<f64, _>(StandardNormal));
        let out = reduce(&x, &y, None).unwrap();
        assert_eq!(out.eigenvalues.len(), 4);
        for w in out.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(out.eigenvalues.iter().all(|&v| v >= 0.0));
    }
}

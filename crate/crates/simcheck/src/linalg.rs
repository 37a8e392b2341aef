//! Small dense linear-algebra helpers used across the crate.
//!
//! Everything here wraps nalgebra decompositions with the conventions the
//! estimators need: eigenpairs sorted by descending eigenvalue, pseudo
//! inverses with relative cutoffs, and a symmetric inverse square root for
//! whitening predictor matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and eigenvectors as matching columns.
pub(crate) fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let p = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("symmetric eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(p, p);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Symmetric pseudo-inverse with a cutoff relative to the largest absolute
/// eigenvalue. Eigenvalues below the cutoff are treated as exact zeros.
pub(crate) fn sym_pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen_desc(m);
    let max_abs = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cut = rel_cutoff * max_abs;
    let p = m.nrows();
    let mut out = DMatrix::zeros(p, p);
    for k in 0..p {
        if values[k].abs() > cut {
            let v = vectors.column(k);
            out += (&v * v.transpose()) / values[k];
        }
    }
    out
}

/// Inverse symmetric square root of a positive definite matrix.
///
/// Fails with an estimation error naming the numerical rank when any
/// eigenvalue falls below `rel_cutoff` times the largest one.
pub(crate) fn sym_inv_sqrt(m: &DMatrix<f64>, rel_cutoff: f64, what: &str) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_desc(m);
    let max = values.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return Err(Error::estimation(format!("{what} has no positive eigenvalue")));
    }
    let rank = values.iter().filter(|&&v| v > rel_cutoff * max).count();
    if rank < m.nrows() {
        return Err(Error::estimation(format!(
            "{what} is rank deficient: rank {rank} < {}",
            m.nrows()
        )));
    }
    let p = m.nrows();
    let mut out = DMatrix::zeros(p, p);
    for k in 0..p {
        let v = vectors.column(k);
        out += (&v * v.transpose()) / values[k].sqrt();
    }
    Ok(out)
}

/// Smallest and largest absolute eigenvalue of a symmetric matrix.
pub(crate) fn sym_extreme_abs_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let (values, _) = sym_eigen_desc(m);
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for v in &values {
        min = min.min(v.abs());
        max = max.max(v.abs());
    }
    (min, max)
}

/// Solve a least-squares problem `argmin ||a x - b||` through the normal
/// equations, falling back to a pseudo-inverse when `a' a` is singular.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    match ata.clone().cholesky() {
        Some(ch) => ch.solve(&atb),
        None => sym_pinv(&ata, 1e-12) * atb,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let (values, vectors) = sym_eigen_desc(&m);
        assert!((values[0] - 3.0).abs() < 1e-12);
        assert!((values[1] - 1.0).abs() < 1e-12);
        assert!(vectors.column(0)[1].abs() > 0.99);
    }

    #[test]
    fn pinv_inverts_full_rank() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let inv = sym_pinv(&m, 1e-12);
        let id = &m * &inv;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn pinv_drops_null_space() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let inv = sym_pinv(&m, 1e-10);
        // Moore-Penrose inverse of the rank-one projector times 2.
        assert!((&m * &inv * &m - &m).abs().max() < 1e-12);
    }

    #[test]
    fn inv_sqrt_whitens() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let r = sym_inv_sqrt(&m, 1e-12, "test matrix").unwrap();
        let id = &r * &m * &r;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-10);
    }

    #[test]
    fn inv_sqrt_reports_rank() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = sym_inv_sqrt(&m, 1e-10, "covariance").unwrap_err();
        assert!(err.to_string().contains("rank 1"));
    }
}

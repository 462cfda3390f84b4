//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;

/// Standard circularly-symmetric complex Gaussian sample, `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. complex Gaussians, filled row by row.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let data: Vec<Complex64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    CMatrix::from_row_slice(rows, cols, &data)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `threshold(sigma_max)`.
pub fn rank_with<F: Fn(f64) -> f64>(a: &CMatrix, threshold: F) -> usize {
    let s = singular_values(a);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    let cut = threshold(top);
    s.iter().filter(|&&v| v > cut).count()
}

/// Rank with the relative criterion `sigma > tol * sigma_max`.
pub fn numerical_rank(a: &CMatrix, tol: f64) -> usize {
    rank_with(a, |top| tol * top)
}

/// Orthonormal basis of the numerical null space of `a`: right singular
/// vectors whose singular value is at most `tol * sigma_max`.
pub fn null_space(a: &CMatrix, tol: f64) -> CMatrix {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    // pad wide systems with zero rows so the SVD returns a full V
    let padded = if rows < cols {
        let mut p = CMatrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = svd.singular_values;
    let top = sigma.iter().copied().fold(0.0f64, f64::max);
    let mut idx: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] <= tol * top).collect();
    // deterministic order: smallest singular value first, ties by index
    idx.sort_by(|&x, &y| sigma[x].total_cmp(&sigma[y]).then(x.cmp(&y)));
    let mut basis = CMatrix::zeros(cols, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).adjoint());
    }
    basis
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
pub fn orthonormalize(a: &CMatrix) -> CMatrix {
    if a.ncols() == 0 {
        return a.clone();
    }
    a.clone().qr().q()
}

/// Eigenvectors of a Hermitian matrix for its `k` smallest eigenvalues.
pub fn smallest_eigenvectors(h: &CMatrix, k: usize) -> CMatrix {
    let n = h.nrows();
    if k == 0 {
        return CMatrix::zeros(n, 0);
    }
    // symmetrize against round-off before the Hermitian solver
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]).then(x.cmp(&y)));
    let mut out = CMatrix::zeros(n, k);
    for (c, &i) in idx.iter().take(k).enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

/// Squared Frobenius norm.
pub fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn null_space_of_wide_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian_matrix(&mut rng, 4, 7);
        let ns = null_space(&a, 1e-9);
        assert_eq!(ns.ncols(), 3);
        assert!((&a * &ns).norm() < 1e-10);
        let gram = ns.adjoint() * &ns;
        assert!((gram - CMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn rank_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian_matrix(&mut rng, 6, 2) * gaussian_matrix(&mut rng, 2, 5);
        assert_eq!(numerical_rank(&a, 1e-9), 2);
        assert_eq!(numerical_rank(&CMatrix::zeros(3, 3), 1e-9), 0);
        assert_eq!(numerical_rank(&CMatrix::zeros(3, 0), 1e-9), 0);
    }

    #[test]
    fn smallest_eigenvectors_of_diagonal() {
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 0)] = Complex64::new(5.0, 0.0);
        h[(1, 1)] = Complex64::new(1.0, 0.0);
        h[(2, 2)] = Complex64::new(3.0, 0.0);
        let v = smallest_eigenvectors(&h, 1);
        assert!((v[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }
}

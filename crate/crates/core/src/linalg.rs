//! Dense complex linear-algebra helpers shared across the crate.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Matrix exponential of an anti-Hermitian matrix (G^dag = -G), computed by
/// diagonalizing the Hermitian matrix iG. The result is unitary up to the
/// eigensolver's accuracy.
pub fn exp_antihermitian(g: &CMatrix) -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    let h = g.map(|z| i * z);
    debug_assert!(hermiticity_residual(&h) < 1e-10 * (1.0 + h.norm()));
    let eig = SymmetricEigen::new(h);
    // exp(G) = V exp(-i diag) V^dag
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&l| Complex64::from_polar(1.0, -l))
        .collect();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, ph) in phases.iter().enumerate() {
        for r in 0..scaled.nrows() {
            scaled[(r, j)] *= ph;
        }
    }
    scaled * v.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(f64::NAN)
}

/// Max-norm of M - M^dag.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let diff = m - m.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-norm distance between two matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Kronecker product, row-major convention: (A (x) B)[(i*p+k),(j*q+l)] = A[i,j] B[k,l].
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (m, n) = a.shape();
    let (p, q) = b.shape();
    let mut out = CMatrix::zeros(m * p, n * q);
    for i in 0..m {
        for j in 0..n {
            let aij = a[(i, j)];
            for k in 0..p {
                for l in 0..q {
                    out[(i * p + k, j * q + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_antihermitian_is_unitary() {
        let n = 12;
        let mut g = CMatrix::zeros(n, n);
        // arbitrary anti-Hermitian fill
        for i in 0..n {
            for j in 0..i {
                let z = Complex64::new(0.1 * (i as f64 - 0.3 * j as f64).sin(), 0.2 * (j as f64).cos());
                g[(i, j)] = z;
                g[(j, i)] = -z.conj();
            }
            g[(i, i)] = Complex64::new(0.0, 0.05 * i as f64);
        }
        let u = exp_antihermitian(&g);
        let id = CMatrix::identity(n, n);
        assert!(max_abs_diff(&(u.adjoint() * &u), &id) < 1e-12);
    }

    #[test]
    fn kron_shape_and_values() {
        let a = CMatrix::from_row_slice(2, 2, &[1.0.into(), 2.0.into(), 3.0.into(), 4.0.into()]);
        let b = CMatrix::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(0, 0)], 1.0.into());
        assert_eq!(k[(1, 3)], 2.0.into());
        assert_eq!(k[(2, 0)], 3.0.into());
    }
}

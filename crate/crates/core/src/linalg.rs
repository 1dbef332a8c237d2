//! Thin wrappers over `nalgebra`'s symmetric eigensolvers with the ordering
//! and phase conventions the rest of the crate relies on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted
/// ascending. Each eigenvector is rephased so that its largest-magnitude
/// component (the first, on ties) is real and positive.
pub fn hermitian_eigen(matrix: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = matrix.nrows();
    let eig = matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        // first entry of largest magnitude
        let mut pivot_row = 0;
        for row in 1..n {
            if v[row].norm_sqr() > v[pivot_row].norm_sqr() {
                pivot_row = row;
            }
        }
        let pivot = v[pivot_row];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..n {
            vectors[(row, col)] = v[row] * phase;
        }
        vectors[(pivot_row, col)] = Complex64::new(v[pivot_row].norm(), 0.0);
    }
    (values, vectors)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = matrix.nrows();
    let eig = matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// `exp(−iHt)` for Hermitian `H`, through its spectral decomposition.
pub fn expm_hermitian(matrix: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let (values, vectors) = hermitian_eigen(matrix);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (col, &e) in values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -e * t);
        for row in 0..n {
            scaled[(row, col)] *= phase;
        }
    }
    scaled * vectors.adjoint()
}

/// First entry of largest magnitude.
pub fn first_pivot(v: impl IntoIterator<Item = Complex64>) -> Complex64 {
    v.into_iter()
        .fold(None::<Complex64>, |best, c| match best {
            Some(b) if b.norm_sqr() >= c.norm_sqr() => Some(b),
            _ => Some(c),
        })
        .unwrap_or_default()
}

/// Largest absolute entry of `M − M†`.
pub fn hermiticity_defect(matrix: &DMatrix<Complex64>) -> f64 {
    let n = matrix.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_two_by_two() {
        let i = Complex64::new(0.0, 1.0);
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), -i, i, Complex64::new(1.0, 0.0)],
        );
        let (vals, vecs) = hermitian_eigen(&m);
        assert!((vals[0] - 0.0).abs() < 1e-14);
        assert!((vals[1] - 2.0).abs() < 1e-14);
        let back = &vecs * DMatrix::from_diagonal(&DVector::from_iterator(2, vals.iter().map(|&v| Complex64::new(v, 0.0)))) * vecs.adjoint();
        assert!((back - m).norm() < 1e-13);
        for col in 0..2 {
            let pivot = first_pivot(vecs.column(col).iter().copied());
            assert!(pivot.im == 0.0 && pivot.re > 0.0);
        }
    }
}

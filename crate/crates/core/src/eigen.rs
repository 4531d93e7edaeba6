//! Dense symmetric eigendecomposition for small principal submatrices.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors in
/// the columns of the returned matrix.
pub fn symmetric_eigen(s: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let p = s.nrows();
    assert_eq!(p, s.ncols(), "matrix must be square");
    let m = DMatrix::from_fn(p, p, |i, j| 0.5 * (s[[i, j]] + s[[j, i]]));
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = Array2::from_shape_fn((p, p), |(i, c)| eig.eigenvectors[(i, order[c])]);
    (values, vectors)
}

/// Leading eigenpair of a symmetric matrix.
pub fn leading_eigenpair(s: &Array2<f64>) -> (f64, Array1<f64>) {
    let (values, vectors) = symmetric_eigen(s);
    (values[0], vectors.column(0).to_owned())
}

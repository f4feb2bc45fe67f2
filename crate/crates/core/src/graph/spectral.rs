use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const ZERO_CLAMP: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
///
/// Column `k` of `eigenvectors` belongs to `eigenvalues[k]`. Each eigenvector
/// is sign-normalized so that its entry of largest magnitude (lowest index on
/// ties) is positive, which makes the decomposition reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.eigenvalues.view()
    }

    pub fn eigenvectors(&self) -> ArrayView2<'_, f64> {
        self.eigenvectors.view()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.n() - 1]
    }

    /// `U^T x`: coordinates of `x` in the eigenbasis.
    pub fn analyze(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.eigenvectors.t().dot(&x)
    }

    /// `U c`: the graph signal with spectral coefficients `c`.
    pub fn synthesize(&self, coeffs: ArrayView1<'_, f64>) -> Array1<f64> {
        self.eigenvectors.dot(&coeffs)
    }

    /// `U diag(lambda) U^T`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &self.eigenvalues.view().insert_axis(ndarray::Axis(0));
        scaled.dot(&self.eigenvectors.t())
    }
}

/// Dense symmetric eigendecomposition of a (Laplacian) matrix.
///
/// Eigenvalues with magnitude below `1e-10` are set to exactly zero so that
/// heat kernels built on top stay bounded by one.
pub fn spectral_decomposition(matrix: ArrayView2<'_, f64>) -> Result<SpectralDecomposition> {
    let (rows, cols) = matrix.dim();
    if rows != cols {
        return Err(Error::InvalidInput(format!(
            "matrix must be square, got {rows}x{cols}"
        )));
    }
    if rows == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    for i in 0..rows {
        for j in (i + 1)..rows {
            let (a, b) = (matrix[[i, j]], matrix[[j, i]]);
            if !a.is_finite() || !b.is_finite() || (a - b).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }

    let n = rows;
    let dense = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            matrix[[i, i]]
        } else {
            0.5 * (matrix[[i, j]] + matrix[[j, i]])
        }
    });
    let eig = SymmetricEigen::new(dense);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let mut eigenvalues = Array1::zeros(n);
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src];
        eigenvalues[col] = if lambda.abs() < ZERO_CLAMP { 0.0 } else { lambda };

        let v = eig.eigenvectors.column(src);
        let pivot = (0..n).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[[i, col]] = sign * v[i];
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

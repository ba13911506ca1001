//! Dense row-major matrices and the handful of kernels the rest of the crate needs.
//!
//! Products go through `matrixmultiply::dgemm`; symmetric eigenproblems through
//! `nalgebra`. Everything is `f64`.

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    /// New matrix made of the selected rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = self.rows.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `c = alpha * a * b + beta * c` on raw row-major buffers, where `a` is described
/// by `(rows, inner)` and explicit strides so transposes cost nothing.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass buffers whose extents match (m, k, n) and the strides;
    // every public entry point checks shapes before reaching here.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `a * b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_dim(a.cols, b.rows)?;
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm(
        a.rows, a.cols, b.cols, 1.0, &a.data, a.cols, 1, &b.data, b.cols, 1, 0.0, &mut c.data,
    );
    Ok(c)
}

/// `a * bᵀ`.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_dim(a.cols, b.cols)?;
    let mut c = Matrix::zeros(a.rows, b.rows);
    gemm(
        a.rows, a.cols, b.rows, 1.0, &a.data, a.cols, 1, &b.data, 1, b.cols, 0.0, &mut c.data,
    );
    Ok(c)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Returns `(eigenvalues, eigenvectors)` where row `i` of the second matrix is the
/// unit eigenvector for eigenvalue `i`. Each eigenvector's sign is fixed so that its
/// largest-magnitude component is positive, which makes the result reproducible.
pub fn symmetric_eigen(sym: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_dim(sym.rows, sym.cols)?;
    let n = sym.rows;
    let m = nalgebra::DMatrix::from_row_slice(n, n, &sym.data);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = Matrix::zeros(n, n);
    for (r, &i) in order.iter().enumerate() {
        values.push(eig.eigenvalues[i]);
        let col = eig.eigenvectors.column(i);
        let mut pivot = 0;
        for j in 1..n {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            vectors.set(r, j, sign * col[j]);
        }
    }
    Ok((values, vectors))
}

/// Sample covariance (normalised by N) of the rows of `data` about `mean`.
pub fn covariance(data: &Matrix, mean: &[f64]) -> Result<Matrix> {
    check_dim(data.cols, mean.len())?;
    if data.rows == 0 {
        return Err(Error::EmptyInput("covariance of zero rows"));
    }
    let mut centered = data.clone();
    for r in 0..centered.rows {
        for (v, m) in centered.row_mut(r).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    let n = data.cols;
    let mut cov = Matrix::zeros(n, n);
    gemm(
        n,
        data.rows,
        n,
        1.0 / data.rows as f64,
        &centered.data,
        1,
        n,
        &centered.data,
        n,
        1,
        0.0,
        &mut cov.data,
    );
    Ok(cov)
}

/// Principal axes of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Rows are principal directions, strongest first.
    pub components: Matrix,
    /// Variance along each component (population normalisation).
    pub variances: Vec<f64>,
}

pub fn pca(data: &Matrix) -> Result<Pca> {
    let mean = data.column_means();
    let cov = covariance(data, &mean)?;
    let (variances, components) = symmetric_eigen(&cov)?;
    Ok(Pca {
        mean,
        components,
        variances,
    })
}

//! Small dense matrices. Row-major storage, sized for item-level covariance
//! work (tens of rows), where allocation-free loops beat a general backend.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self { rows: n, cols: c, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute difference between `self` and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor `L` with `L·Lᵀ = Σ`.
///
/// Fails on the first non-positive pivot, naming its index.
pub fn cholesky_lower(sigma: &Matrix) -> Result<Matrix> {
    if !sigma.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", sigma.rows, sigma.cols)));
    }
    let n = sigma.rows;
    let scale = (0..n).map(|i| sigma[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    if sigma.asymmetry() > 1e-10 * scale {
        return Err(Error::InvalidParameter("Cholesky input is not symmetric".into()));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = sigma[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = sigma[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Directional derivative of the Cholesky factor: given `L = chol(Σ)` and a
/// symmetric perturbation `dΣ`, returns `dL`.
pub fn cholesky_tangent(l: &Matrix, dsigma: &Matrix) -> Matrix {
    let n = l.rows;
    let mut dl = Matrix::zeros(n, n);
    for j in 0..n {
        let mut s = dsigma[(j, j)];
        for k in 0..j {
            s -= 2.0 * dl[(j, k)] * l[(j, k)];
        }
        let ljj = l[(j, j)];
        let dljj = s / (2.0 * ljj);
        dl[(j, j)] = dljj;
        for i in (j + 1)..n {
            let mut t = dsigma[(i, j)];
            for k in 0..j {
                t -= dl[(i, k)] * l[(j, k)] + l[(i, k)] * dl[(j, k)];
            }
            dl[(i, j)] = (t - l[(i, j)] * dljj) / ljj;
        }
    }
    dl
}

/// Reverse-mode counterpart of [`cholesky_lower`].
///
/// `l_bar` holds `∂f/∂L` on and below the diagonal and is consumed as
/// scratch. Returns the symmetric `G` with `df = Σ_ij G_ij dΣ_ij` for any
/// symmetric perturbation `dΣ`.
pub fn cholesky_adjoint(l: &Matrix, l_bar: &mut Matrix) -> Matrix {
    let n = l.rows;
    let mut g = Matrix::zeros(n, n);
    for j in (0..n).rev() {
        let ljj = l[(j, j)];
        for i in (j + 1)..n {
            let s_bar = l_bar[(i, j)] / ljj;
            l_bar[(j, j)] -= s_bar * l[(i, j)];
            g[(i, j)] += s_bar;
            for k in 0..j {
                l_bar[(i, k)] -= s_bar * l[(j, k)];
                l_bar[(j, k)] -= s_bar * l[(i, k)];
            }
        }
        let p_bar = l_bar[(j, j)] / (2.0 * ljj);
        g[(j, j)] += p_bar;
        for k in 0..j {
            l_bar[(j, k)] -= 2.0 * p_bar * l[(j, k)];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let half = 0.5 * g[(i, j)];
            g[(i, j)] = half;
            g[(j, i)] = half;
        }
    }
    g
}

/// `log|det A|` by LU with partial pivoting.
pub fn log_abs_det(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension("determinant of non-square matrix".into()));
    }
    let m = nalgebra::DMatrix::from_row_slice(a.rows, a.cols, &a.data);
    Ok(m.lu().determinant().abs().ln())
}

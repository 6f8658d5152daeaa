//! Dense row-major matrices, sparse binary rows, and the handful of
//! matrix-product kernels the networks need.

use crate::error::{shape_err, Result};

/// Dense row-major `f32` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f32) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(shape_err(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Densifies a batch of sparse rows.
    pub fn from_sparse_rows(rows: &[&SparseRow], dim: usize) -> Result<Self> {
        let mut m = Matrix::zeros(rows.len(), dim);
        for (b, row) in rows.iter().enumerate() {
            if row.dim() != dim {
                return Err(shape_err(format!(
                    "sparse row of dim {} in a batch of dim {dim}",
                    row.dim()
                )));
            }
            let out = m.row_mut(b);
            for (&j, &v) in row.indices().iter().zip(row.values()) {
                out[j as usize] = v;
            }
        }
        Ok(m)
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self · other`
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(shape_err(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_acc(
            &self.data,
            self.rows,
            self.cols,
            &other.data,
            other.cols,
            &mut out.data,
        );
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(shape_err(format!(
                "matmul_t {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm_nt(
            &self.data,
            self.rows,
            self.cols,
            &other.data,
            other.rows,
            &mut out.data,
        );
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(shape_err(format!(
                "t_matmul ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm_tn_acc(
            &self.data,
            self.rows,
            self.cols,
            &other.data,
            other.cols,
            &mut out.data,
        );
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_err(format!(
                "add {:?} to {:?}",
                other.shape(),
                self.shape()
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(shape_err(format!(
                "subtract {:?} from {:?}",
                other.shape(),
                self.shape()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&mut self, factor: f32) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn fill(&mut self, value: f32) {
        self.data.fill(value);
    }

    /// Selects a subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (o, &i) in idx.iter().enumerate() {
            out.row_mut(o).copy_from_slice(self.row(i));
        }
        out
    }

    /// Row-wise concatenation `[self ‖ other]`.
    pub fn hconcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(shape_err("hconcat needs equal row counts"));
        }
        let cols = self.cols + other.cols;
        let mut out = Matrix::zeros(self.rows, cols);
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            dst[..self.cols].copy_from_slice(self.row(r));
            dst[self.cols..].copy_from_slice(other.row(r));
        }
        Ok(out)
    }
}

/// Sparse row of a binary interaction matrix. Indices are strictly
/// increasing and below `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f32>,
}

impl SparseRow {
    /// Implicit-feedback row: every listed index gets value 1.0.
    pub fn binary(dim: usize, indices: Vec<u32>) -> Result<Self> {
        let values = vec![1.0; indices.len()];
        SparseRow::new(dim, indices, values)
    }

    pub fn new(dim: usize, indices: Vec<u32>, values: Vec<f32>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(shape_err("sparse row indices/values length mismatch"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(shape_err("sparse row indices must be strictly increasing"));
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(shape_err(format!(
                    "sparse index {last} out of range for dim {dim}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(shape_err("sparse row values must be finite"));
        }
        Ok(SparseRow {
            dim,
            indices,
            values,
        })
    }

    pub fn empty(dim: usize) -> Self {
        SparseRow {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    #[inline]
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, item: u32) -> bool {
        self.indices.binary_search(&item).is_ok()
    }

    pub fn to_dense(&self) -> Vec<f32> {
        let mut out = vec![0.0; self.dim];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j as usize] = v;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// kernels
//
// All reductions run in a fixed order, so results do not depend on anything
// but the inputs.

/// `out[b, :] += Σ_k a[b, k] · w[k, :]`
pub(crate) fn gemm_acc(
    a: &[f32],
    rows: usize,
    inner: usize,
    w: &[f32],
    cols: usize,
    out: &mut [f32],
) {
    debug_assert_eq!(a.len(), rows * inner);
    debug_assert_eq!(w.len(), inner * cols);
    debug_assert_eq!(out.len(), rows * cols);
    for b in 0..rows {
        let a_row = &a[b * inner..(b + 1) * inner];
        let o_row = &mut out[b * cols..(b + 1) * cols];
        for (k, &av) in a_row.iter().enumerate() {
            if av != 0.0 {
                axpy(av, &w[k * cols..(k + 1) * cols], o_row);
            }
        }
    }
}

/// `out[k, :] += Σ_b a[b, k] · g[b, :]`, i.e. `aᵀ · g`.
pub(crate) fn gemm_tn_acc(
    a: &[f32],
    rows: usize,
    inner: usize,
    g: &[f32],
    cols: usize,
    out: &mut [f32],
) {
    debug_assert_eq!(a.len(), rows * inner);
    debug_assert_eq!(g.len(), rows * cols);
    debug_assert_eq!(out.len(), inner * cols);
    for b in 0..rows {
        let a_row = &a[b * inner..(b + 1) * inner];
        let g_row = &g[b * cols..(b + 1) * cols];
        for (k, &av) in a_row.iter().enumerate() {
            if av != 0.0 {
                axpy(av, g_row, &mut out[k * cols..(k + 1) * cols]);
            }
        }
    }
}

/// `out[b, k] = ⟨g[b, :], w[k, :]⟩`, i.e. `g · wᵀ`.
pub(crate) fn gemm_nt(
    g: &[f32],
    rows: usize,
    cols: usize,
    w: &[f32],
    inner: usize,
    out: &mut [f32],
) {
    debug_assert_eq!(g.len(), rows * cols);
    debug_assert_eq!(w.len(), inner * cols);
    debug_assert_eq!(out.len(), rows * inner);
    for b in 0..rows {
        let g_row = &g[b * cols..(b + 1) * cols];
        for k in 0..inner {
            out[b * inner + k] = dot(g_row, &w[k * cols..(k + 1) * cols]);
        }
    }
}

#[inline]
pub(crate) fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Dot product with eight independent lanes, combined in a fixed order.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let aa = &a[c * 8..c * 8 + 8];
        let bb = &b[c * 8..c * 8 + 8];
        for l in 0..8 {
            acc[l] += aa[l] * bb[l];
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0f64;
                for k in 0..a.cols() {
                    s += a.get(i, k) as f64 * b.get(k, j) as f64;
                }
                out.set(i, j, s as f32);
            }
        }
        out
    }

    fn seq(rows: usize, cols: usize, offset: f32) -> Matrix {
        let data = (0..rows * cols)
            .map(|i| (i as f32 * 0.37 + offset).sin())
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn close(a: &Matrix, b: &Matrix) -> bool {
        a.shape() == b.shape()
            && a.data()
                .iter()
                .zip(b.data())
                .all(|(x, y)| (x - y).abs() < 1e-5)
    }

    #[test]
    fn products_agree_with_naive() {
        let a = seq(5, 11, 0.1);
        let b = seq(11, 7, 0.5);
        assert!(close(&a.matmul(&b).unwrap(), &naive(&a, &b)));
        let c = seq(7, 11, 0.9);
        assert!(close(&a.matmul_t(&c).unwrap(), &naive(&a, &c.transpose())));
        let d = seq(5, 3, 0.2);
        assert!(close(&a.t_matmul(&d).unwrap(), &naive(&a.transpose(), &d)));
    }

    #[test]
    fn matmul_shape_mismatch() {
        assert!(Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 3)).is_err());
        assert!(Matrix::from_vec(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn sparse_row_validation() {
        assert!(SparseRow::binary(5, vec![0, 2, 4]).is_ok());
        assert!(SparseRow::binary(5, vec![2, 2]).is_err());
        assert!(SparseRow::binary(5, vec![3, 1]).is_err());
        assert!(SparseRow::binary(5, vec![5]).is_err());
        let r = SparseRow::binary(4, vec![1, 3]).unwrap();
        assert_eq!(r.to_dense(), vec![0.0, 1.0, 0.0, 1.0]);
        assert!(r.contains(3) && !r.contains(2));
    }
}

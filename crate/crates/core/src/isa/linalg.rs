//! Minimal row-major f64 matrix used by the learning code.
//!
//! Dense eigendecomposition is delegated to nalgebra; everything else is
//! explicit loops so reduction order is fixed and seeded runs reproduce
//! bit-for-bit.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}x{cols} = {} entries", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows_f32(rows: &[Vec<f32>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::invalid("rows", "matrix needs at least one row"));
        }
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    expected: format!("row length {c}"),
                    got: format!("row {i} has length {}", row.len()),
                });
            }
            data.extend(row.iter().map(|&v| v as f64));
        }
        Ok(Mat { rows: r, cols: c, data })
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
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// self * x for a column vector x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (r, slot) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            *slot = acc;
        }
        out
    }

    /// self^T * x, i.e. combines rows weighted by x.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &w) in x.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = self.row(r);
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += w * a;
            }
        }
        out
    }

    /// self * other.
    pub fn matmul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(r);
                for (o, &b) in out_row.iter_mut().zip(orow.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// self * other^T; contraction runs along contiguous rows of both.
    pub fn matmul_transpose(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.cols, other.cols);
        let mut out = Mat::zeros(self.rows, other.rows);
        for r in 0..self.rows {
            let arow = self.row(r);
            for c in 0..other.rows {
                let brow = other.row(c);
                let mut acc = 0.0;
                for (a, b) in arow.iter().zip(brow.iter()) {
                    acc += a * b;
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// self - s * other, elementwise.
    pub fn sub_scaled(&self, other: &Mat, s: f64) -> Mat {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - s * b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn max_abs_diff_from_identity(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        let mut m: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let target = if r == c { 1.0 } else { 0.0 };
                m = m.max((self.get(r, c) - target).abs());
            }
        }
        m
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
/// Returns (eigenvalues, eigenvectors-as-rows). Row signs are fixed so the
/// largest-magnitude entry of each eigenvector is positive.
pub fn sym_eigen_desc(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    if a.rows() != a.cols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    let n = a.rows();
    let m = DMatrix::from_row_slice(n, n, a.data());
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::zeros(n, n);
    for (r, &idx) in order.iter().enumerate() {
        values.push(eig.eigenvalues[idx]);
        let col = eig.eigenvectors.column(idx);
        let mut max_abs = 0.0;
        let mut max_val = 0.0;
        for i in 0..n {
            if col[i].abs() > max_abs {
                max_abs = col[i].abs();
                max_val = col[i];
            }
        }
        let sign = if max_val < 0.0 { -1.0 } else { 1.0 };
        for c in 0..n {
            vectors.set(r, c, sign * col[c]);
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal_sorted_descending() {
        let a = Mat::from_vec(3, 3, vec![2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let (vals, vecs) = sym_eigen_desc(&a).unwrap();
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        // first eigenvector picks the 5.0 axis
        assert!((vecs.get(0, 1).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matmul_small_case() {
        let a = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_transpose_matches_explicit_transpose() {
        let a = Mat::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 4.0, -6.0]).unwrap();
        let b = Mat::from_vec(4, 3, (0..12).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap();
        let fast = a.matmul_transpose(&b);
        let slow = a.matmul(&b.transpose());
        for (x, y) in fast.data().iter().zip(slow.data().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

//! Minimal dense-matrix support for the network code.
//!
//! Weight matrices are stored row-major with shape (fan_in, fan_out), so a
//! forward pass reads columns and a backward pass reads rows. The few
//! operations the trainers need are written out by hand; nothing here is
//! meant to be a general linear-algebra layer.

use std::ops::{Index, IndexMut};

/// Row-major dense matrix of f64.
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Square matrix `scale * I`.
    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        Mat::from_fn(n, n, |r, c| if r == c { scale } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// out[c] += sum_r x[r] * self[r, c] — the forward direction for a
    /// (fan_in, fan_out) weight matrix.
    pub fn acc_forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (c, &w) in row.iter().enumerate() {
                out[c] += xv * w;
            }
        }
    }

    /// out[r] += sum_c self[r, c] * dy[c] — the backward direction.
    pub fn acc_backward(&self, dy: &[f64], out: &mut [f64]) {
        debug_assert_eq!(dy.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (c, &w) in row.iter().enumerate() {
                acc += w * dy[c];
            }
            *o += acc;
        }
    }

    /// self[r, c] += scale * x[r] * dy[c] — outer-product accumulation used
    /// for gradient buffers.
    pub fn acc_outer(&mut self, x: &[f64], dy: &[f64], scale: f64) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(dy.len(), self.cols);
        for (r, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            let s = scale * xv;
            for (c, w) in row.iter_mut().enumerate() {
                *w += s * dy[c];
            }
        }
    }

    /// self += scale * other, elementwise.
    pub fn add_scaled(&mut self, other: &Mat, scale: f64) {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += scale * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// a += scale * b, elementwise.
pub fn add_scaled_vec(a: &mut [f64], b: &[f64], scale: f64) {
    debug_assert_eq!(a.len(), b.len());
    for (av, &bv) in a.iter_mut().zip(b.iter()) {
        *av += scale * bv;
    }
}

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A real `height x width` grid stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2D {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

fn check_extent(height: usize, width: usize) -> Result<()> {
    if height < 2 || width < 2 {
        return Err(Error::invalid(format!(
            "extent {height}x{width} is degenerate, need at least 2x2"
        )));
    }
    Ok(())
}

impl Tensor2D {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_extent(height, width)?;
        if values.len() != height * width {
            return Err(Error::invalid(format!(
                "{} values for a {height}x{width} grid",
                values.len()
            )));
        }
        Ok(Tensor2D { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_extent(height, width)?;
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Ok(Tensor2D { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    pub fn same_extent(&self, other: &Tensor2D) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn ensure_same_extent(&self, other: &Tensor2D) -> Result<()> {
        if self.same_extent(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "extent mismatch: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )))
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Tensor2D {
        Tensor2D {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Tensor2D, f: impl Fn(f64, f64) -> f64) -> Result<Tensor2D> {
        self.ensure_same_extent(other)?;
        Ok(Tensor2D {
            height: self.height,
            width: self.width,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, k: f64) -> Tensor2D {
        self.map(|v| v * k)
    }

    pub fn max_abs_diff(&self, other: &Tensor2D) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Min-max normalization to `[0, 1]`; a constant grid maps to zeros.
    pub fn min_max_normalized(&self) -> Tensor2D {
        let lo = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if !(range > 0.0) || !range.is_finite() {
            return self.map(|_| 0.0);
        }
        self.map(|v| (v - lo) / range)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor2D {
        self.map(|v| v.clamp(lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    /// `e^{i theta}`
    pub fn cis(theta: f64) -> Self {
        Complex::new(libm::cos(theta), libm::sin(theta))
    }

    pub fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn scale(self, k: f64) -> Self {
        Complex::new(self.re * k, self.im * k)
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Complex;
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

/// Unshifted 2D spectrum; bin `(u, v)` is row frequency `u`, column frequency `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    bins: Vec<Complex>,
}

impl Spectrum {
    pub fn new(height: usize, width: usize, bins: Vec<Complex>) -> Result<Self> {
        check_extent(height, width)?;
        if bins.len() != height * width {
            return Err(Error::invalid(format!(
                "{} bins for a {height}x{width} spectrum",
                bins.len()
            )));
        }
        Ok(Spectrum { height, width, bins })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![Complex::ZERO; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bins(&self) -> &[Complex] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex] {
        &mut self.bins
    }

    pub fn get(&self, u: usize, v: usize) -> Complex {
        self.bins[u * self.width + v]
    }

    pub fn set(&mut self, u: usize, v: usize, value: Complex) {
        self.bins[u * self.width + v] = value;
    }

    /// Sum of `|F(u, v)|^2` over bins selected by `keep`.
    pub fn energy_where(&self, keep: impl Fn(usize, usize) -> bool) -> f64 {
        let mut total = 0.0;
        for u in 0..self.height {
            for v in 0..self.width {
                if keep(u, v) {
                    total += self.get(u, v).norm_sqr();
                }
            }
        }
        total
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    /// `self * x` for a column vector `x` of length `cols`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::invalid(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|r| super::dot(self.row(r), x)).collect())
    }

    pub fn scale(&self, k: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_extent_rejected() {
        assert!(Tensor2D::zeros(1, 4).is_err());
        assert!(Tensor2D::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Spectrum::zeros(4, 1).is_err());
    }

    #[test]
    fn min_max_of_constant_is_zero() {
        let t = Tensor2D::new(2, 2, vec![3.0; 4]).unwrap();
        assert_eq!(t.min_max_normalized().values(), &[0.0; 4]);
        let t = Tensor2D::new(2, 2, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(t.min_max_normalized().values(), &[0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn matrix_rejects_non_finite() {
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.mul_vec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }
}

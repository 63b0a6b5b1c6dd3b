//! Dense complex matrices and vector helpers.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::{compensated_sum, Scalar};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Returns `None` when the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| {
            if r == c {
                Complex::new(T::one(), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    /// Keeps the given columns, in order.
    pub fn select_columns(&self, cols: impl IntoIterator<Item = usize> + Clone) -> Self {
        let n = cols.clone().into_iter().count();
        let mut data = Vec::with_capacity(self.rows * n);
        for r in 0..self.rows {
            for c in cols.clone() {
                data.push(self.get(r, c));
            }
        }
        Self {
            rows: self.rows,
            cols: n,
            data,
        }
    }

    pub fn frobenius_norm(&self) -> T {
        norm(&self.data)
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v = *v * s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn mat_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.cols, "mat_vec shape mismatch");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn mat_mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "mat_mul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn trace(&self) -> Complex<T> {
        let n = self.rows.min(self.cols);
        (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self.get(i, i))
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }
}

/// `a^H b`.
pub fn dot_h<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    assert_eq!(a.len(), b.len(), "dot_h length mismatch");
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sqr<T: Scalar>(v: &[Complex<T>]) -> T {
    compensated_sum(v.iter().map(|x| x.norm_sqr()))
}

pub fn norm<T: Scalar>(v: &[Complex<T>]) -> T {
    // scaled accumulation keeps tiny and huge vectors representable
    let scale = v
        .iter()
        .map(|x| x.re.abs().max(x.im.abs()))
        .fold(T::zero(), T::max);
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = v
        .iter()
        .map(|x| {
            let (re, im) = (x.re / scale, x.im / scale);
            re * re + im * im
        })
        .sum();
    scale * s.sqrt()
}

/// Returns `v / |v|`, or `None` for a zero or non-finite norm.
pub fn normalized<T: Scalar>(v: &[Complex<T>]) -> Option<Vec<Complex<T>>> {
    let n = norm(v);
    if n > T::zero() && n.is_finite() {
        Some(v.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

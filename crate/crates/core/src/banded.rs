//! Banded matrix storage shared by every operator in the crate.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Field element stored in a [`BandedMatrix`]: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn modulus(self) -> f64;
    fn from_real(x: f64) -> Self;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Square matrix with `lower` sub- and `upper` super-diagonals.
///
/// Diagonal `d` (offset `d = j - i`, from `-lower` to `upper`) is stored
/// contiguously with `dim` slots indexed by row; slots that fall outside the
/// matrix are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix<T: Scalar> {
    dim: usize,
    lower: usize,
    upper: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedMatrix<T> {
    pub fn zeros(dim: usize, lower: usize, upper: usize) -> Self {
        Self { dim, lower, upper, data: vec![T::zero(); dim * (lower + upper + 1)] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, 0, 0);
        for i in 0..dim {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_fn(dim: usize, lower: usize, upper: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim, lower, upper);
        for i in 0..dim {
            for j in m.row_range(i) {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.lower
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.upper
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        (self.lower + j - i) * self.dim + i
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.dim && j < self.dim && j + self.lower >= i && i + self.upper >= j
    }

    /// Column indices of row `i` that lie inside the band.
    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower)..(i + self.upper + 1).min(self.dim)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            T::zero()
        }
    }

    /// Panics when `(i, j)` is outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.lower, self.upper);
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.lower, self.upper);
        let s = self.slot(i, j);
        self.data[s] = self.data[s] + v;
    }

    pub fn try_set(&mut self, i: usize, j: usize, v: T) -> Result<()> {
        if !self.in_band(i, j) {
            return Err(Error::domain(format!("element ({i}, {j}) outside declared band")));
        }
        self.set(i, j, v);
        Ok(())
    }

    /// Entries of diagonal `offset` (j - i), `dim - |offset|` values.
    pub fn diagonal(&self, offset: isize) -> Vec<T> {
        let n = self.dim as isize;
        if offset < -(self.lower as isize) || offset > self.upper as isize || offset.abs() >= n.max(1) {
            return vec![T::zero(); (n - offset.abs()).max(0) as usize];
        }
        let rows = if offset >= 0 { 0..(n - offset) } else { -offset..n };
        rows.map(|i| self.get(i as usize, (i + offset) as usize)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }

    pub fn matvec<U>(&self, x: &[U]) -> Vec<U>
    where
        U: Scalar,
        T: Into<U>,
    {
        let mut y = vec![U::zero(); self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into<U>(&self, x: &[U], y: &mut [U])
    where
        U: Scalar,
        T: Into<U>,
    {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = U::zero();
            for j in self.row_range(i) {
                acc = acc + self.data[self.slot(i, j)].into() * x[j];
            }
            *yi = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim, self.upper, self.lower);
        for i in 0..self.dim {
            for j in self.row_range(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Largest `|a_ij - a_ji|` over the band.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in self.row_range(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).modulus());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() == 0.0
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> BandedMatrix<U> {
        BandedMatrix {
            dim: self.dim,
            lower: self.lower,
            upper: self.upper,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy with the band narrowed to `(lower, upper)`; dropped entries are returned as
    /// the largest discarded magnitude.
    pub fn truncated(&self, lower: usize, upper: usize) -> (Self, f64) {
        let mut out = Self::zeros(self.dim, lower.min(self.lower), upper.min(self.upper));
        let mut dropped = 0.0f64;
        for i in 0..self.dim {
            for j in self.row_range(i) {
                let v = self.get(i, j);
                if out.in_band(i, j) {
                    out.set(i, j, v);
                } else {
                    dropped = dropped.max(v.modulus());
                }
            }
        }
        (out, dropped)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j)).collect()).collect()
    }
}

impl BandedMatrix<f64> {
    pub fn to_complex(&self) -> BandedMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

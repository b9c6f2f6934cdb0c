use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;

use super::C64;
use crate::error::{Error, Result};
use crate::tolerances;

/// Dense complex matrix.
///
/// Thin wrapper over a column-major `nalgebra::DMatrix`; indexing is always
/// `(row, col)`. Constructors that accept external data reject non-finite
/// entries, and every operation here preserves finiteness of finite inputs.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "row-major entries",
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid(format!("non-finite entry at ({}, {})", pos / cols.max(1), pos % cols.max(1))));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { C64::new(0.0, 0.0) }))
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Result<Self> {
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch { context: "column vector", expected: rows, found: bad.len() });
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn from_inner(inner: DMatrix<C64>) -> Self {
        Self(inner)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.0.column(j).iter().copied().collect()
    }

    /// The first `n` columns.
    pub fn leading_columns(&self, n: usize) -> Self {
        Self(self.0.columns(0, n).into_owned())
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols(), |i, j| self.0[(rows[i], j)])
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows().min(self.cols())).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().into_iter().sum()
    }

    /// Largest entry modulus, `max_ij |a_ij|`.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// True when every off-diagonal entry is (numerically) zero.
    pub fn is_diagonal(&self) -> bool {
        self.0.iter().enumerate().all(|(k, z)| k % self.rows() == k / self.rows() || z.norm() <= tolerances::ZERO)
    }

    /// `max |A^†A - 1|` for a square matrix, `None` otherwise.
    pub fn unitarity_error(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        Some(self.isometry_error())
    }

    /// `max |A^†A - 1|`: orthonormality error of the columns.
    pub fn isometry_error(&self) -> f64 {
        let gram = self.0.adjoint() * &self.0;
        let n = gram.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error().is_some_and(|e| e <= tol)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.0.shape(), other.0.shape(), "shape mismatch");
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix {}x{} ", self.rows(), self.cols())?;
        f.debug_list()
            .entries((0..self.rows()).map(|i| (0..self.cols()).map(|j| self.0[(i, j)]).collect::<Vec<_>>()))
            .finish()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn row_major_round_trip() {
        let entries = [c(1.0, 0.0), c(2.0, 1.0), c(0.0, -1.0), c(4.0, 0.5), c(5.0, 0.0), c(6.0, 0.0)];
        let m = ComplexMatrix::from_row_major(2, 3, &entries).unwrap();
        assert_eq!(m[(0, 1)], c(2.0, 1.0));
        assert_eq!(m[(1, 0)], c(4.0, 0.5));
        assert_eq!(m.to_row_major(), entries.to_vec());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = ComplexMatrix::from_row_major(1, 2, &[c(1.0, 0.0), c(f64::NAN, 0.0)]).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
        assert!(ComplexMatrix::from_row_major(2, 2, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn unitarity_check() {
        let h = 1.0 / 2f64.sqrt();
        let had = ComplexMatrix::from_row_major(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]).unwrap();
        assert!(had.is_unitary(1e-12));
        let not = had.scale(c(1.1, 0.0));
        assert!(!not.is_unitary(1e-3));
        assert_eq!(ComplexMatrix::zeros(2, 3).unitarity_error(), None);
    }

    #[test]
    fn diagonal_detection() {
        let d = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, 1.0)]);
        assert!(d.is_diagonal());
        let mut nd = d.clone();
        nd[(0, 1)] = c(1e-3, 0.0);
        assert!(!nd.is_diagonal());
    }

    #[test]
    fn kron_shape_and_entries() {
        let a = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let b = ComplexMatrix::identity(3);
        let k = a.kron(&b);
        assert_eq!((k.rows(), k.cols()), (6, 6));
        assert_eq!(k[(4, 4)], c(2.0, 0.0));
        assert_eq!(k[(1, 1)], c(1.0, 0.0));
    }
}

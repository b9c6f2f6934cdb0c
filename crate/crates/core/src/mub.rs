//! Mutually unbiased bases as basis-change matrices relative to the
//! standard basis.
//!
//! Column `b` of `matrices[x]` is the `b`-th vector of basis `x`;
//! `matrices[0]` is always the identity. Every vector of the other bases is
//! phased so that its first component is real positive.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};

/// Which construction produced a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MubConstruction {
    /// Standard basis plus the discrete Fourier basis, any `d >= 2`.
    FourierPair,
    /// Standard basis plus quadratic-phase bases, prime `d`.
    PrimeQuadratic,
}

/// Compact description of a family for run manifests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MubDescriptor {
    pub construction: MubConstruction,
    pub dim: usize,
    pub num_bases: usize,
}

#[derive(Clone, Debug)]
pub struct MubFamily {
    dim: usize,
    construction: MubConstruction,
    matrices: Vec<ComplexMatrix>,
}

/// `exp(2πi k/d) / sqrt(d)` with `k` reduced mod `d` first, so equal
/// residues produce bit-identical entries.
fn root_of_unity(k: u64, d: usize, scale: f64) -> C64 {
    let k = (k % d as u64) as f64;
    C64::from_polar(scale, 2.0 * PI * k / d as f64)
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= n {
        if n % i == 0 {
            return false;
        }
        i += 1;
    }
    true
}

impl MubFamily {
    /// `{identity, DFT}` with `F_jk = exp(2πi jk/d)/sqrt(d)`.
    pub fn fourier_pair(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("fourier_pair requires d >= 2, got {d}")));
        }
        let s = 1.0 / (d as f64).sqrt();
        let dft = ComplexMatrix::from_fn(d, d, |j, k| root_of_unity((j * k) as u64, d, s));
        Ok(Self { dim: d, construction: MubConstruction::FourierPair, matrices: vec![ComplexMatrix::identity(d), dft] })
    }

    /// Identity plus `m - 1` bases of the complete prime-dimension set.
    ///
    /// For odd prime `d`, basis `x >= 1` has columns
    /// `(1/sqrt(d)) ω^{(x-1) j^2 + b j}`; basis 1 is the Fourier basis. For
    /// `d = 2` the bases are the eigenbases of Z, X and Y.
    pub fn prime_family(d: usize, m: usize) -> Result<Self> {
        if !is_prime(d) {
            return Err(Error::UnsupportedDimension {
                dim: d,
                constraint: "more than two MUBs are only constructed for prime dimensions",
            });
        }
        if m < 2 || m > d + 1 {
            return Err(Error::invalid(format!("number of bases must satisfy 2 <= m <= d + 1 = {}, got {m}", d + 1)));
        }
        let s = 1.0 / (d as f64).sqrt();
        let mut matrices = vec![ComplexMatrix::identity(d)];
        if d == 2 {
            let x_basis = ComplexMatrix::from_fn(2, 2, |j, b| C64::new(if j == 1 && b == 1 { -s } else { s }, 0.0));
            let y_basis = ComplexMatrix::from_fn(2, 2, |j, b| match (j, b) {
                (0, _) => C64::new(s, 0.0),
                (1, 0) => C64::new(0.0, s),
                _ => C64::new(0.0, -s),
            });
            matrices.extend([x_basis, y_basis].into_iter().take(m - 1));
        } else {
            for q in 0..(m - 1) as u64 {
                let du = d as u64;
                matrices.push(ComplexMatrix::from_fn(d, d, |j, b| {
                    let (j, b) = (j as u64, b as u64);
                    root_of_unity((q * (j * j % du) + b * j) % du, d, s)
                }));
            }
        }
        Ok(Self { dim: d, construction: MubConstruction::PrimeQuadratic, matrices })
    }

    /// Fourier pair for `m = 2`, the prime construction for `m > 2`.
    pub fn standard(d: usize, m: usize) -> Result<Self> {
        if m == 2 {
            Self::fourier_pair(d)
        } else {
            Self::prime_family(d, m)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn construction(&self) -> MubConstruction {
        self.construction
    }

    pub fn basis(&self, x: usize) -> &ComplexMatrix {
        &self.matrices[x]
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    pub fn descriptor(&self) -> MubDescriptor {
        MubDescriptor { construction: self.construction, dim: self.dim, num_bases: self.len() }
    }

    /// The first `m` bases.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::invalid(format!("cannot keep {m} of {} bases", self.len())));
        }
        Ok(Self { dim: self.dim, construction: self.construction, matrices: self.matrices[..m].to_vec() })
    }

    /// `max |(W_x^† W_y)_ij|^2 - 1/d|` over the given pairs of bases.
    pub fn unbiasedness_error_for(&self, pairs: impl IntoIterator<Item = (usize, usize)>) -> f64 {
        let target = 1.0 / self.dim as f64;
        let mut worst: f64 = 0.0;
        for (x, y) in pairs {
            let overlap = &self.matrices[x].adjoint() * &self.matrices[y];
            for z in overlap.inner().iter() {
                worst = worst.max((z.norm_sqr() - target).abs());
            }
        }
        worst
    }

    /// Worst deviation from unbiasedness over all pairs of distinct bases.
    pub fn unbiasedness_error(&self) -> f64 {
        let m = self.len();
        self.unbiasedness_error_for((0..m).flat_map(|x| ((x + 1)..m).map(move |y| (x, y))))
    }

    /// Worst unitarity error over the bases.
    pub fn unitarity_error(&self) -> f64 {
        self.matrices.iter().filter_map(ComplexMatrix::unitarity_error).fold(0.0, f64::max)
    }
}

//! Dense complex linear algebra and deterministic randomness.

mod matrix;
mod rng;
mod svd;

pub use matrix::ComplexMatrix;
pub use rng::Rng;
pub use svd::{svd, Svd};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Haar-random `d x d` unitary.
///
/// QR decomposition of a complex Ginibre matrix, with the phases of the
/// diagonal of `R` moved into `Q` so the distribution is exactly Haar.
pub fn random_unitary(d: usize, rng: &mut Rng) -> Result<ComplexMatrix> {
    if d == 0 {
        return Err(Error::invalid("random_unitary requires d >= 1"));
    }
    let ginibre = ComplexMatrix::from_fn(d, d, |_, _| rng.complex_normal());
    let qr = ginibre.into_inner().qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = ComplexMatrix::from_inner(q);
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// `<x|y>` (conjugate-linear in the first argument).
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

//! Benchmark inputs shared by the criterion targets.

use chancert_core::{ComplexMatrix, FiberSpec, Rng};

/// Gaussian random `n x n` matrix.
pub fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = Rng::from_seed(seed);
    ComplexMatrix::from_fn(n, n, |_, _| rng.complex_normal())
}

/// The 2 m preset on a coarser wavelength grid.
pub fn bench_fiber() -> FiberSpec {
    FiberSpec { num_wavelengths: 41, ..FiberSpec::graded_2m() }
}

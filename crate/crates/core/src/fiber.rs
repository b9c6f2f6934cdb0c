//! Idealized graded-index multi-mode fiber.
//!
//! The fiber is represented in its eigenmode basis, where each
//! monochromatic transmission matrix is diagonal:
//! `T(λ) = diag(exp(-i β_mn(λ) L))`. The propagation constant depends on the
//! mode only through its group `g = m + n + 1`:
//!
//! ```text
//! β = sqrt((n1 k r)^2 - B) / r
//! B = (Γ(1/α + 1/2) (α + 2) g sqrt(π) V^(2/α) / (2 Γ(1/α)))^(α/(α+2))
//! V = k r n1 sqrt(2Δ),  Δ = (n1^2 - n2^2) / (2 n1^2),  k = 2π/λ
//! ```
//!
//! A stack of these matrices over a symmetric wavelength grid, weighted by a
//! Gaussian source spectrum, forms the multi-spectral transmission matrix
//! ([`Mstm`]).

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};
use crate::tolerances;

/// Physical fiber and source parameters. Lengths in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub length_m: f64,
    pub core_radius_m: f64,
    pub n_core: f64,
    pub numerical_aperture: f64,
    /// Power-law exponent of the index profile (2 = parabolic).
    pub alpha: f64,
    pub center_wavelength_m: f64,
    /// Full span of the wavelength grid.
    pub bandwidth_m: f64,
    /// Grid size; odd, so the center wavelength is on the grid.
    pub num_wavelengths: usize,
    /// Standard deviation of the Gaussian source spectrum.
    pub sigma_m: f64,
}

impl FiberSpec {
    /// Default source standard deviation: the ±1.5 nm grid spans ±3σ.
    pub const DEFAULT_SIGMA_M: f64 = 0.5e-9;

    fn graded(length_m: f64) -> Self {
        Self {
            length_m,
            core_radius_m: 25e-6,
            n_core: 1.444,
            numerical_aperture: 0.22,
            alpha: 2.0,
            center_wavelength_m: 810e-9,
            bandwidth_m: 3e-9,
            num_wavelengths: 201,
            sigma_m: Self::DEFAULT_SIGMA_M,
        }
    }

    /// 2 m graded-index fiber, 810 ± 1.5 nm source on 201 grid points.
    pub fn graded_2m() -> Self {
        Self::graded(2.0)
    }

    /// 5 m graded-index fiber, same source.
    pub fn graded_5m() -> Self {
        Self::graded(5.0)
    }

    /// The same fiber driven by a single wavelength.
    pub fn monochromatic(mut self) -> Self {
        self.num_wavelengths = 1;
        self.bandwidth_m = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length_m", self.length_m),
            ("core_radius_m", self.core_radius_m),
            ("n_core", self.n_core),
            ("numerical_aperture", self.numerical_aperture),
            ("alpha", self.alpha),
            ("center_wavelength_m", self.center_wavelength_m),
            ("sigma_m", self.sigma_m),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and positive, got {value}")));
            }
        }
        if self.numerical_aperture >= self.n_core {
            return Err(Error::invalid(format!(
                "numerical_aperture {} must be below n_core {}",
                self.numerical_aperture, self.n_core
            )));
        }
        if self.num_wavelengths % 2 == 0 {
            return Err(Error::invalid(format!("num_wavelengths must be odd, got {}", self.num_wavelengths)));
        }
        if !self.bandwidth_m.is_finite() || self.bandwidth_m < 0.0 {
            return Err(Error::invalid(format!("bandwidth_m must be non-negative, got {}", self.bandwidth_m)));
        }
        if self.num_wavelengths > 1 && self.bandwidth_m == 0.0 {
            return Err(Error::invalid("bandwidth_m must be positive when num_wavelengths > 1"));
        }
        if self.bandwidth_m / 2.0 >= self.center_wavelength_m {
            return Err(Error::invalid("bandwidth_m exceeds twice the center wavelength"));
        }
        Ok(())
    }

    pub fn n_cladding(&self) -> f64 {
        (self.n_core * self.n_core - self.numerical_aperture * self.numerical_aperture).sqrt()
    }

    /// Relative index contrast `(n1^2 - n2^2) / (2 n1^2)`.
    pub fn index_contrast(&self) -> f64 {
        let n2 = self.n_cladding();
        (self.n_core * self.n_core - n2 * n2) / (2.0 * self.n_core * self.n_core)
    }

    pub fn v_number(&self, wavelength_m: f64) -> f64 {
        wavenumber(wavelength_m) * self.core_radius_m * self.n_core * (2.0 * self.index_contrast()).sqrt()
    }

    /// Uniform grid `λ0 ± bandwidth/2`, endpoints included, ascending.
    pub fn wavelengths(&self) -> Vec<f64> {
        let offsets = self.grid_offsets();
        offsets.iter().map(|o| self.center_wavelength_m + o).collect()
    }

    /// Offsets `λ_i - λ0`. Built from integer multiples of the step so that
    /// the grid is exactly symmetric.
    fn grid_offsets(&self) -> Vec<f64> {
        let n = self.num_wavelengths;
        if n <= 1 {
            return vec![0.0; n];
        }
        let half = (n - 1) / 2;
        let step = self.bandwidth_m / (n - 1) as f64;
        (0..n).map(|i| if i < half { -((half - i) as f64 * step) } else { (i - half) as f64 * step }).collect()
    }

    /// Normalized Gaussian weights `∝ exp(-(λ - λ0)^2 / 2σ^2)` on the grid.
    pub fn spectral_weights(&self) -> Vec<f64> {
        let raw: Vec<f64> =
            self.grid_offsets().iter().map(|o| (-(o * o) / (2.0 * self.sigma_m * self.sigma_m)).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Stable hex digest of the parameter bit patterns; used as cache key.
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        for x in [
            self.length_m,
            self.core_radius_m,
            self.n_core,
            self.numerical_aperture,
            self.alpha,
            self.center_wavelength_m,
            self.bandwidth_m,
            self.sigma_m,
        ] {
            h.update(x.to_bits().to_le_bytes());
        }
        h.update((self.num_wavelengths as u64).to_le_bytes());
        h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn wavenumber(wavelength_m: f64) -> f64 {
    2.0 * PI / wavelength_m
}

/// Eigenmode label; modes with equal `m + n` share a propagation constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub m: u32,
    pub n: u32,
}

impl ModeIndex {
    pub fn new(m: u32, n: u32) -> Self {
        Self { m, n }
    }

    /// Principal mode-group number `m + n + 1`.
    pub fn group(&self) -> u32 {
        self.m + self.n + 1
    }
}

/// The mode-dependent term `B` of the propagation constant for group `g`.
pub fn b_tilde(group: u32, wavelength_m: f64, spec: &FiberSpec) -> f64 {
    let a = spec.alpha;
    let v = spec.v_number(wavelength_m);
    let base = gamma(1.0 / a + 0.5) * (a + 2.0) * group as f64 * PI.sqrt() * v.powf(2.0 / a) / (2.0 * gamma(1.0 / a));
    base.powf(a / (a + 2.0))
}

/// Number of mode groups the fiber guides at `wavelength_m`:
/// groups with `g < V sqrt(α / (2(α + 2)))` (for α = 2, `g < V/2`).
pub fn guided_group_count(wavelength_m: f64, spec: &FiberSpec) -> u32 {
    let a = spec.alpha;
    let limit = spec.v_number(wavelength_m) * (a / (2.0 * (a + 2.0))).sqrt();
    let mut g = 0u32;
    while ((g + 1) as f64) < limit && group_has_real_beta(g + 1, wavelength_m, spec) {
        g += 1;
    }
    g
}

fn group_has_real_beta(group: u32, wavelength_m: f64, spec: &FiberSpec) -> bool {
    let nkr = spec.n_core * wavenumber(wavelength_m) * spec.core_radius_m;
    b_tilde(group, wavelength_m, spec) < nkr * nkr
}

fn group_beta(group: u32, wavelength_m: f64, spec: &FiberSpec) -> Option<f64> {
    let nkr = spec.n_core * wavenumber(wavelength_m) * spec.core_radius_m;
    let arg = nkr * nkr - b_tilde(group, wavelength_m, spec);
    (arg > 0.0).then(|| arg.sqrt() / spec.core_radius_m)
}

/// Propagation constant `β_mn(λ)` in 1/m.
pub fn propagation_constant(mode: ModeIndex, wavelength_m: f64, spec: &FiberSpec) -> Result<f64> {
    group_beta(mode.group(), wavelength_m, spec).ok_or(Error::UnguidedMode { m: mode.m, n: mode.n, wavelength_m })
}

/// Guided modes at the center wavelength, ordered by group, then by `m`.
pub fn enumerate_modes(spec: &FiberSpec) -> Vec<ModeIndex> {
    let groups = guided_group_count(spec.center_wavelength_m, spec);
    (1..=groups).flat_map(|g| (0..g).map(move |m| ModeIndex::new(m, g - 1 - m))).collect()
}

/// Wavelength-indexed stack of equal-size square matrices.
#[derive(Clone, Debug)]
pub enum MatrixStack {
    /// Diagonal matrices stored by their diagonals.
    Diagonal {
        dim: usize,
        diagonals: Vec<Vec<C64>>,
    },
    Dense {
        dim: usize,
        matrices: Vec<ComplexMatrix>,
    },
}

impl MatrixStack {
    pub fn len(&self) -> usize {
        match self {
            MatrixStack::Diagonal { diagonals, .. } => diagonals.len(),
            MatrixStack::Dense { matrices, .. } => matrices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            MatrixStack::Diagonal { dim, .. } | MatrixStack::Dense { dim, .. } => *dim,
        }
    }

    /// Diagonal of matrix `i` when the stack is stored diagonally.
    pub fn diagonal(&self, i: usize) -> Option<&[C64]> {
        match self {
            MatrixStack::Diagonal { diagonals, .. } => Some(&diagonals[i]),
            MatrixStack::Dense { .. } => None,
        }
    }

    /// Matrix `i`, materialized densely.
    pub fn matrix(&self, i: usize) -> ComplexMatrix {
        match self {
            MatrixStack::Diagonal { diagonals, .. } => ComplexMatrix::from_diagonal(&diagonals[i]),
            MatrixStack::Dense { matrices, .. } => matrices[i].clone(),
        }
    }

    fn permuted(&self, order: &[usize]) -> Self {
        match self {
            MatrixStack::Diagonal { dim, diagonals } => {
                MatrixStack::Diagonal { dim: *dim, diagonals: order.iter().map(|&i| diagonals[i].clone()).collect() }
            }
            MatrixStack::Dense { dim, matrices } => {
                MatrixStack::Dense { dim: *dim, matrices: order.iter().map(|&i| matrices[i].clone()).collect() }
            }
        }
    }
}

/// Multi-spectral transmission matrix.
#[derive(Clone, Debug)]
pub struct Mstm {
    spec: Option<FiberSpec>,
    wavelengths: Vec<f64>,
    weights: Vec<f64>,
    matrices: MatrixStack,
    modes: Vec<ModeIndex>,
}

impl Mstm {
    /// Assembles and validates an MSTM from explicit parts.
    ///
    /// `spec` is `None` for synthetic stacks; `modes` may then be empty.
    /// Wavelengths need not be sorted here; see [`Mstm::sorted`].
    pub fn from_parts(
        spec: Option<FiberSpec>,
        wavelengths: Vec<f64>,
        weights: Vec<f64>,
        matrices: MatrixStack,
        modes: Vec<ModeIndex>,
    ) -> Result<Self> {
        let n = wavelengths.len();
        if weights.len() != n {
            return Err(Error::DimensionMismatch { context: "spectral weights", expected: n, found: weights.len() });
        }
        if matrices.len() != n {
            return Err(Error::DimensionMismatch { context: "matrix stack", expected: n, found: matrices.len() });
        }
        let dim = matrices.dim();
        if !modes.is_empty() && modes.len() != dim {
            return Err(Error::DimensionMismatch { context: "mode list", expected: dim, found: modes.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("spectral weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if n > 0 && (total - 1.0).abs() > tolerances::WEIGHT_SUM {
            return Err(Error::invalid(format!("spectral weights sum to {total}, expected 1")));
        }
        match &matrices {
            MatrixStack::Diagonal { diagonals, .. } => {
                for d in diagonals {
                    if d.len() != dim {
                        return Err(Error::DimensionMismatch { context: "diagonal", expected: dim, found: d.len() });
                    }
                    if d.iter().any(|z| (z.norm() - 1.0).abs() > tolerances::UNITARITY) {
                        return Err(Error::invalid("diagonal transmission entries must have unit modulus"));
                    }
                }
            }
            MatrixStack::Dense { matrices, .. } => {
                for m in matrices {
                    if m.rows() != dim || m.cols() != dim {
                        return Err(Error::DimensionMismatch {
                            context: "dense matrix",
                            expected: dim,
                            found: m.rows(),
                        });
                    }
                    if !m.is_finite() {
                        return Err(Error::invalid("transmission matrices must be finite"));
                    }
                }
            }
        }
        Ok(Self { spec, wavelengths, weights, matrices, modes })
    }

    /// Synthetic diagonal stack without fiber parameters.
    pub fn from_diagonals(wavelengths: Vec<f64>, weights: Vec<f64>, diagonals: Vec<Vec<C64>>) -> Result<Self> {
        let dim = diagonals.first().map_or(0, Vec::len);
        Self::from_parts(None, wavelengths, weights, MatrixStack::Diagonal { dim, diagonals }, Vec::new())
    }

    /// The same channel with wavelengths (and their weights and matrices)
    /// in ascending order.
    pub fn sorted(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &j| self.wavelengths[i].total_cmp(&self.wavelengths[j]));
        self.permuted(&order)
    }

    /// Reorders wavelengths, weights and matrices together.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            spec: self.spec.clone(),
            wavelengths: order.iter().map(|&i| self.wavelengths[i]).collect(),
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            matrices: self.matrices.permuted(order),
            modes: self.modes.clone(),
        }
    }

    pub fn spec(&self) -> Option<&FiberSpec> {
        self.spec.as_ref()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrices(&self) -> &MatrixStack {
        &self.matrices
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    /// Number of spatial modes.
    pub fn dim(&self) -> usize {
        self.matrices.dim()
    }

    /// Number of wavelengths.
    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    /// Index of the grid point closest to the center of the band.
    pub fn center_index(&self) -> usize {
        self.len() / 2
    }

    /// Weighted mean `Σ_i w_i T(λ_i)` with no phase alignment.
    pub fn weighted_mean(&self) -> ComplexMatrix {
        let dim = self.dim();
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for i in 0..self.len() {
            let w = C64::new(self.weights[i], 0.0);
            match self.matrices.diagonal(i) {
                Some(diag) => {
                    for (j, z) in diag.iter().enumerate() {
                        acc[(j, j)] += w * z;
                    }
                }
                None => acc = &acc + &self.matrices.matrix(i).scale(w),
            }
        }
        acc
    }

    /// Writes the binary artifact (see [`artifact`]).
    pub fn write_artifact<W: Write>(&self, out: W, precision: artifact::Precision) -> Result<()> {
        artifact::write(self, out, precision)
    }

    pub fn read_artifact<R: Read>(input: R) -> Result<Self> {
        artifact::read(input)
    }
}

/// Builds the multi-spectral transmission matrix of an idealized fiber.
pub fn build_mstm(spec: &FiberSpec) -> Result<Mstm> {
    spec.validate()?;
    let modes = enumerate_modes(spec);
    let groups = modes.iter().map(ModeIndex::group).max().unwrap_or(0);
    let wavelengths = spec.wavelengths();
    let weights = spec.spectral_weights();

    let diagonals = wavelengths
        .par_iter()
        .map(|&lambda| {
            if guided_group_count(lambda, spec) < groups {
                let lost = modes
                    .iter()
                    .find(|m| m.group() > guided_group_count(lambda, spec))
                    .copied()
                    .unwrap_or(ModeIndex::new(0, groups.saturating_sub(1)));
                return Err(Error::UnguidedMode { m: lost.m, n: lost.n, wavelength_m: lambda });
            }
            // One phase per group, shared bit-for-bit by the modes in it.
            let phases = (1..=groups)
                .map(|g| {
                    let beta = group_beta(g, lambda, spec).ok_or(Error::UnguidedMode {
                        m: 0,
                        n: g - 1,
                        wavelength_m: lambda,
                    })?;
                    Ok(C64::from_polar(1.0, -beta * spec.length_m))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(modes.iter().map(|m| phases[(m.group() - 1) as usize]).collect())
        })
        .collect::<Result<Vec<Vec<C64>>>>()?;

    Mstm::from_parts(
        Some(spec.clone()),
        wavelengths,
        weights,
        MatrixStack::Diagonal { dim: modes.len(), diagonals },
        modes,
    )
}

/// Binary MSTM artifact. All integers and floats little-endian.
///
/// ```text
/// offset  size        field
/// 0       8           magic "CCMSTM01"
/// 8       1           precision: 1 = complex64 (f32 re, f32 im), 2 = complex128
/// 9       1           layout: 0 = dense row-major D x D, 1 = diagonal (D entries)
/// 10      6           reserved, zero
/// 16      8           N, number of wavelengths (u64)
/// 24      8           D, number of modes (u64)
/// 32      8           spec flag (u64): 1 if a fiber spec follows, else 0
/// 40      72          spec (if flagged): length, core radius, n_core, NA,
///                     alpha, center wavelength, bandwidth, sigma (f64 each),
///                     num_wavelengths (u64)
/// ..      8 * D       modes: (m: u32, n: u32); D = 0 entries if no spec
/// ..      8 * N       wavelengths (f64, meters)
/// ..      8 * N       weights (f64)
/// ..      payload     N matrices, entries as (re, im) pairs
/// ```
pub mod artifact {
    use super::*;

    pub const MAGIC: &[u8; 8] = b"CCMSTM01";

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Precision {
        Complex64,
        Complex128,
    }

    fn put_u64<W: Write>(w: &mut W, x: u64) -> std::io::Result<()> {
        w.write_all(&x.to_le_bytes())
    }

    fn put_f64<W: Write>(w: &mut W, x: f64) -> std::io::Result<()> {
        w.write_all(&x.to_le_bytes())
    }

    fn put_c<W: Write>(w: &mut W, z: C64, p: Precision) -> std::io::Result<()> {
        match p {
            Precision::Complex64 => {
                w.write_all(&(z.re as f32).to_le_bytes())?;
                w.write_all(&(z.im as f32).to_le_bytes())
            }
            Precision::Complex128 => {
                put_f64(w, z.re)?;
                put_f64(w, z.im)
            }
        }
    }

    pub(super) fn write<W: Write>(mstm: &Mstm, out: W, precision: Precision) -> Result<()> {
        let mut w = std::io::BufWriter::new(out);
        w.write_all(MAGIC)?;
        let layout = match mstm.matrices {
            MatrixStack::Diagonal { .. } => 1u8,
            MatrixStack::Dense { .. } => 0u8,
        };
        let p = match precision {
            Precision::Complex64 => 1u8,
            Precision::Complex128 => 2u8,
        };
        w.write_all(&[p, layout, 0, 0, 0, 0, 0, 0])?;
        put_u64(&mut w, mstm.len() as u64)?;
        put_u64(&mut w, mstm.dim() as u64)?;
        match &mstm.spec {
            Some(s) => {
                put_u64(&mut w, 1)?;
                for x in [
                    s.length_m,
                    s.core_radius_m,
                    s.n_core,
                    s.numerical_aperture,
                    s.alpha,
                    s.center_wavelength_m,
                    s.bandwidth_m,
                    s.sigma_m,
                ] {
                    put_f64(&mut w, x)?;
                }
                put_u64(&mut w, s.num_wavelengths as u64)?;
                if mstm.modes.len() != mstm.dim() {
                    return Err(Error::invalid("fiber MSTM must list one mode per dimension"));
                }
                for mode in &mstm.modes {
                    w.write_all(&mode.m.to_le_bytes())?;
                    w.write_all(&mode.n.to_le_bytes())?;
                }
            }
            None => put_u64(&mut w, 0)?,
        }
        for &x in &mstm.wavelengths {
            put_f64(&mut w, x)?;
        }
        for &x in &mstm.weights {
            put_f64(&mut w, x)?;
        }
        for i in 0..mstm.len() {
            match &mstm.matrices {
                MatrixStack::Diagonal { diagonals, .. } => {
                    for &z in &diagonals[i] {
                        put_c(&mut w, z, precision)?;
                    }
                }
                MatrixStack::Dense { matrices, .. } => {
                    for z in matrices[i].to_row_major() {
                        put_c(&mut w, z, precision)?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    struct Reader<R: Read>(R);

    impl<R: Read> Reader<R> {
        fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
            let mut buf = [0u8; N];
            self.0.read_exact(&mut buf).map_err(|e| {
                if e.kind() == std::io::ErrorKind::UnexpectedEof {
                    Error::Parse("MSTM artifact is truncated".into())
                } else {
                    Error::Io(e)
                }
            })?;
            Ok(buf)
        }
        fn u64(&mut self) -> Result<u64> {
            Ok(u64::from_le_bytes(self.bytes()?))
        }
        fn u32(&mut self) -> Result<u32> {
            Ok(u32::from_le_bytes(self.bytes()?))
        }
        fn f64(&mut self) -> Result<f64> {
            Ok(f64::from_le_bytes(self.bytes()?))
        }
        fn c(&mut self, p: Precision) -> Result<C64> {
            Ok(match p {
                Precision::Complex64 => {
                    C64::new(f32::from_le_bytes(self.bytes()?) as f64, f32::from_le_bytes(self.bytes()?) as f64)
                }
                Precision::Complex128 => C64::new(self.f64()?, self.f64()?),
            })
        }
    }

    const MAX_ELEMENTS: u64 = 1 << 32;

    pub(super) fn read<R: Read>(input: R) -> Result<Mstm> {
        let mut r = Reader(std::io::BufReader::new(input));
        if &r.bytes::<8>()? != MAGIC {
            return Err(Error::Parse("not an MSTM artifact (bad magic)".into()));
        }
        let header = r.bytes::<8>()?;
        let precision = match header[0] {
            1 => Precision::Complex64,
            2 => Precision::Complex128,
            other => return Err(Error::Parse(format!("unknown precision code {other}"))),
        };
        let diagonal = match header[1] {
            0 => false,
            1 => true,
            other => return Err(Error::Parse(format!("unknown layout code {other}"))),
        };
        let n = r.u64()?;
        let dim = r.u64()?;
        if n.saturating_mul(dim).saturating_mul(if diagonal { 1 } else { dim }) > MAX_ELEMENTS {
            return Err(Error::Parse(format!("implausible artifact size N={n}, D={dim}")));
        }
        let (n, dim) = (n as usize, dim as usize);
        let (spec, modes) = match r.u64()? {
            0 => (None, Vec::new()),
            1 => {
                let mut f = [0f64; 8];
                for x in f.iter_mut() {
                    *x = r.f64()?;
                }
                let spec = FiberSpec {
                    length_m: f[0],
                    core_radius_m: f[1],
                    n_core: f[2],
                    numerical_aperture: f[3],
                    alpha: f[4],
                    center_wavelength_m: f[5],
                    bandwidth_m: f[6],
                    sigma_m: f[7],
                    num_wavelengths: r.u64()? as usize,
                };
                let modes = (0..dim).map(|_| Ok(ModeIndex::new(r.u32()?, r.u32()?))).collect::<Result<Vec<_>>>()?;
                (Some(spec), modes)
            }
            other => return Err(Error::Parse(format!("bad spec flag {other}"))),
        };
        let wavelengths = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let weights = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let matrices = if diagonal {
            let diagonals = (0..n)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            let z = r.c(precision)?;
                            // Reduced precision leaves |z| off 1 by ~1e-7.
                            let lossy = precision == Precision::Complex64 && z.norm() > 0.0;
                            Ok(if lossy { z / z.norm() } else { z })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            MatrixStack::Diagonal { dim, diagonals }
        } else {
            let matrices = (0..n)
                .map(|_| {
                    let entries = (0..dim * dim).map(|_| r.c(precision)).collect::<Result<Vec<_>>>()?;
                    ComplexMatrix::from_row_major(dim, dim, &entries)
                })
                .collect::<Result<Vec<_>>>()?;
            MatrixStack::Dense { dim, matrices }
        };
        Mstm::from_parts(spec, wavelengths, weights, matrices, modes)
    }
}

//! Single-matrix approximations of the (spectrally impure) fiber channel,
//! and the SVD basis used to prepare and measure states.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::Mstm;
use crate::numerics::{inner, svd, ComplexMatrix, Rng, Svd, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TmMethod {
    SpectralMean,
    IntensityFit,
}

/// How the per-wavelength global phase is treated before averaging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SpectralGauge {
    /// Rotate each `T(λ)` so its reference entry (largest modulus, lowest
    /// index on ties) is real positive. A global phase per wavelength does not
    /// change any measured intensity, so this only removes the common
    /// propagation phase that would otherwise wash out the average.
    #[default]
    ReferenceEntry,
    /// Plain `Σ w_i T(λ_i)`.
    Raw,
}

#[derive(Clone, Debug)]
pub struct ApproxTm {
    pub matrix: ComplexMatrix,
    pub method: TmMethod,
    pub svd: Svd,
    /// RMS intensity residual of the fit; `None` for the spectral mean.
    pub residual: Option<f64>,
}

impl ApproxTm {
    pub fn new(matrix: ComplexMatrix, method: TmMethod, residual: Option<f64>) -> Result<Self> {
        let svd = svd(&matrix)?;
        Ok(Self { matrix, method, svd, residual })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.singular_values
    }
}

fn reference_phase(entries: impl Iterator<Item = C64> + Clone) -> C64 {
    let max = entries.clone().map(|z| z.norm()).fold(0.0, f64::max);
    // Unit-modulus entries differ in the last bits; treat those as ties.
    match entries.into_iter().find(|z| z.norm() >= max * (1.0 - 1e-12)) {
        Some(z) if max > 0.0 => z.conj() / z.norm(),
        _ => C64::new(1.0, 0.0),
    }
}

/// Weighted spectral average with the default gauge.
pub fn spectral_mean_tm(mstm: &Mstm) -> Result<ApproxTm> {
    spectral_mean_tm_with(mstm, SpectralGauge::default())
}

pub fn spectral_mean_tm_with(mstm: &Mstm, gauge: SpectralGauge) -> Result<ApproxTm> {
    let dim = mstm.dim();
    let stack = mstm.matrices();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for i in 0..mstm.len() {
        let w = mstm.weights()[i];
        match stack.diagonal(i) {
            Some(diag) => {
                let phase = match gauge {
                    SpectralGauge::ReferenceEntry => reference_phase(diag.iter().copied()),
                    SpectralGauge::Raw => C64::new(1.0, 0.0),
                };
                for (j, z) in diag.iter().enumerate() {
                    acc[(j, j)] += z * phase * w;
                }
            }
            None => {
                let t = stack.matrix(i);
                let phase = match gauge {
                    // lowest row-major index wins ties
                    SpectralGauge::ReferenceEntry => reference_phase(t.to_row_major().into_iter()),
                    SpectralGauge::Raw => C64::new(1.0, 0.0),
                };
                acc = &acc + &t.scale(phase * w);
            }
        }
    }
    ApproxTm::new(acc, TmMethod::SpectralMean, None)
}

/// Probe vectors and the spectrally averaged intensities
/// `Σ_i w_i |<y|T(λ_i)|x>|^2` for pairs of them.
#[derive(Clone, Debug)]
pub struct ProbeDataset {
    dim: usize,
    inputs: Vec<Vec<C64>>,
    outputs: Vec<Vec<C64>>,
    /// `(input id, output id, intensity)`.
    records: Vec<(usize, usize, f64)>,
}

impl ProbeDataset {
    pub fn new(inputs: Vec<Vec<C64>>, outputs: Vec<Vec<C64>>, records: Vec<(usize, usize, f64)>) -> Result<Self> {
        let dim = inputs.first().or(outputs.first()).map_or(0, Vec::len);
        if let Some(v) = inputs.iter().chain(&outputs).find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { context: "probe vector", expected: dim, found: v.len() });
        }
        for &(i, o, value) in &records {
            if i >= inputs.len() || o >= outputs.len() {
                return Err(Error::invalid(format!("probe pair ({i}, {o}) refers to a missing probe")));
            }
            if !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(format!("intensity for probe pair ({i}, {o}) is {value}")));
            }
        }
        Ok(Self { dim, inputs, outputs, records })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[Vec<C64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<C64>] {
        &self.outputs
    }

    pub fn records(&self) -> &[(usize, usize, f64)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Intensities as CSV with columns `probe_in_id, probe_out_id, intensity`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["probe_in_id", "probe_out_id", "intensity"])?;
        for &(i, o, v) in &self.records {
            w.serialize((i, o, v))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads intensities measured for known probe vectors.
    pub fn read_csv<R: Read>(input: R, inputs: Vec<Vec<C64>>, outputs: Vec<Vec<C64>>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            probe_in_id: usize,
            probe_out_id: usize,
            intensity: f64,
        }
        let mut r = csv::Reader::from_reader(input);
        let mut records = Vec::new();
        for (line, row) in r.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Parse(format!("probe CSV record {}: {e}", line + 1)))?;
            records.push((row.probe_in_id, row.probe_out_id, row.intensity));
        }
        Self::new(inputs, outputs, records)
    }
}

/// Intensities of every `(input, output)` pair through the MSTM.
pub fn probe_dataset_for(mstm: &Mstm, inputs: Vec<Vec<C64>>, outputs: Vec<Vec<C64>>) -> Result<ProbeDataset> {
    let pairs: Vec<(usize, usize)> = (0..inputs.len()).flat_map(|i| (0..outputs.len()).map(move |o| (i, o))).collect();
    probe_pairs(mstm, inputs, outputs, &pairs)
}

fn probe_pairs(
    mstm: &Mstm,
    inputs: Vec<Vec<C64>>,
    outputs: Vec<Vec<C64>>,
    pairs: &[(usize, usize)],
) -> Result<ProbeDataset> {
    let dim = mstm.dim();
    if let Some(v) = inputs.iter().chain(&outputs).find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { context: "probe vector", expected: dim, found: v.len() });
    }
    let stack = mstm.matrices();
    // intensities[i][o], accumulated over wavelengths in index order
    let per_input: Vec<Vec<f64>> = inputs
        .par_iter()
        .map(|x| {
            let mut acc = vec![0.0; outputs.len()];
            for l in 0..mstm.len() {
                let tx: Vec<C64> = match stack.diagonal(l) {
                    Some(diag) => diag.iter().zip(x).map(|(t, xj)| t * xj).collect(),
                    None => {
                        let t = stack.matrix(l);
                        (0..dim).map(|r| (0..dim).map(|c| t[(r, c)] * x[c]).sum()).collect()
                    }
                };
                let w = mstm.weights()[l];
                for (o, y) in outputs.iter().enumerate() {
                    acc[o] += w * inner(y, &tx).norm_sqr();
                }
            }
            acc
        })
        .collect();
    let records = pairs.iter().map(|&(i, o)| (i, o, per_input[i][o])).collect();
    ProbeDataset::new(inputs, outputs, records)
}

/// `num_probes` intensity measurements with Haar-random probe vectors.
///
/// `K = ceil(sqrt(num_probes))` input and `K` output vectors are drawn; the
/// first `num_probes` pairs in row-major order `(input, output)` are kept.
pub fn simulate_probe_dataset(mstm: &Mstm, num_probes: usize, rng: &mut Rng) -> Result<ProbeDataset> {
    if num_probes == 0 {
        return Err(Error::invalid("num_probes must be at least 1"));
    }
    let k = (num_probes as f64).sqrt().ceil() as usize;
    let k = if k * k < num_probes { k + 1 } else { k };
    let inputs: Vec<Vec<C64>> = (0..k).map(|_| rng.haar_vector(mstm.dim())).collect();
    let outputs: Vec<Vec<C64>> = (0..k).map(|_| rng.haar_vector(mstm.dim())).collect();
    let pairs: Vec<(usize, usize)> = (0..num_probes).map(|p| (p / k, p % k)).collect();
    probe_pairs(mstm, inputs, outputs, &pairs)
}

/// Default probe count, `4 dim^2`.
pub fn default_num_probes(dim: usize) -> usize {
    4 * dim * dim
}

/// Settings for [`intensity_fit_tm_with`].
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Iteration budget per attempt.
    pub iters: usize,
    pub learning_rate: f64,
    /// Stop once the RMS residual falls below this.
    pub tolerance: f64,
    /// Iterations between divergence and stagnation checks.
    pub check_every: usize,
    /// Consecutive residual increases at checks that count as divergence.
    pub max_increases: usize,
    /// Fresh random starts tried when an attempt stalls in a local minimum.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { iters: 20_000, learning_rate: 0.02, tolerance: 1e-9, check_every: 10, max_increases: 10, restarts: 16 }
    }
}

/// Tracks the residual at periodic checks.
#[derive(Debug)]
pub struct ResidualMonitor {
    max_increases: usize,
    last: f64,
    increases: usize,
    history: Vec<f64>,
}

/// Verdict of a [`ResidualMonitor`] check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Progress {
    Improving,
    Stalled,
    Diverged,
}

impl ResidualMonitor {
    /// Checks over which a stall is judged.
    const STALL_WINDOW: usize = 100;
    /// Minimum relative improvement across the window.
    const STALL_RATIO: f64 = 0.99;

    pub fn new(max_increases: usize) -> Self {
        Self { max_increases, last: f64::INFINITY, increases: 0, history: Vec::new() }
    }

    pub fn check(&mut self, residual: f64) -> Progress {
        if residual > self.last {
            self.increases += 1;
        } else {
            self.increases = 0;
        }
        self.last = residual;
        self.history.push(residual);
        if self.increases >= self.max_increases {
            return Progress::Diverged;
        }
        let n = self.history.len();
        if n > Self::STALL_WINDOW && residual > Self::STALL_RATIO * self.history[n - 1 - Self::STALL_WINDOW] {
            return Progress::Stalled;
        }
        Progress::Improving
    }
}

/// Least-squares fit `min Σ (I - |<y|T|x>|^2)^2` with Adam from a random start.
pub fn intensity_fit_tm(dataset: &ProbeDataset, dim: usize, iters: usize, rng: &mut Rng) -> Result<ApproxTm> {
    intensity_fit_tm_with(dataset, dim, &FitOptions { iters, ..FitOptions::default() }, rng)
}

struct FitProblem {
    dim: usize,
    x: ComplexMatrix,
    y: ComplexMatrix,
    x_adj: ComplexMatrix,
    y_adj: ComplexMatrix,
    records: Vec<(usize, usize, f64)>,
}

impl FitProblem {
    /// Mean squared residual and the coefficients `c` with gradient `Y c X^†`.
    fn evaluate(&self, t: &ComplexMatrix) -> (f64, ComplexMatrix) {
        let amp = &(&self.y_adj * t) * &self.x; // amp[(o, i)] = <y_o|T|x_i>
        let count = self.records.len() as f64;
        let mut coeff = ComplexMatrix::zeros(self.y.cols(), self.x.cols());
        let mut loss = 0.0;
        for &(i, o, intensity) in &self.records {
            let a = amp[(o, i)];
            let r = a.norm_sqr() - intensity;
            loss += r * r;
            coeff[(o, i)] += a * (4.0 * r / count);
        }
        (loss / count, coeff)
    }

    /// One Adam descent from a random start: `(matrix, rms, stalled)`.
    fn descend(&self, options: &FitOptions, rng: &mut Rng) -> Result<(ComplexMatrix, f64, bool)> {
        let dim = self.dim;
        // Intensities from unit probes through a contraction scale like 1/dim.
        let scale = (1.0 / dim as f64).sqrt();
        let mut t = ComplexMatrix::from_fn(dim, dim, |_, _| rng.complex_normal() * scale);
        let mut m1 = vec![C64::new(0.0, 0.0); dim * dim];
        let mut m2 = vec![(0.0f64, 0.0f64); dim * dim];
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-12);
        let mut monitor = ResidualMonitor::new(options.max_increases);
        let mut rms = f64::INFINITY;
        for step in 1..=options.iters {
            let (loss, coeff) = self.evaluate(&t);
            rms = loss.sqrt();
            if !rms.is_finite() {
                return Err(Error::OptimizationFailure { iterations: step, residual: rms });
            }
            if rms <= options.tolerance {
                break;
            }
            if step % options.check_every.max(1) == 0 {
                match monitor.check(rms) {
                    Progress::Improving => {}
                    Progress::Stalled => return Ok((t, rms, true)),
                    Progress::Diverged => return Err(Error::OptimizationFailure { iterations: step, residual: rms }),
                }
            }
            // dL/dRe T + i dL/dIm T  =  Σ 4 r a y x^†
            let grad = &(&self.y * &coeff) * &self.x_adj;
            let lr = options.learning_rate * scale / (1.0 + step as f64 / 2000.0);
            let c1 = 1.0 - b1.powi(step as i32);
            let c2 = 1.0 - b2.powi(step as i32);
            for c in 0..dim {
                for r in 0..dim {
                    let idx = c * dim + r;
                    let g = grad[(r, c)];
                    m1[idx] = m1[idx] * b1 + g * (1.0 - b1);
                    let (vr, vi) = m2[idx];
                    m2[idx] = (vr * b2 + g.re * g.re * (1.0 - b2), vi * b2 + g.im * g.im * (1.0 - b2));
                    let mh = m1[idx] / c1;
                    let (vr, vi) = (m2[idx].0 / c2, m2[idx].1 / c2);
                    t[(r, c)] -= C64::new(mh.re / (vr.sqrt() + eps), mh.im / (vi.sqrt() + eps)) * lr;
                }
            }
        }
        Ok((t, rms, false))
    }
}

pub fn intensity_fit_tm_with(
    dataset: &ProbeDataset,
    dim: usize,
    options: &FitOptions,
    rng: &mut Rng,
) -> Result<ApproxTm> {
    if options.iters == 0 {
        return Err(Error::invalid("intensity fit needs iters >= 1"));
    }
    if dataset.dim() != dim {
        return Err(Error::DimensionMismatch { context: "probe dataset", expected: dim, found: dataset.dim() });
    }
    if dataset.is_empty() {
        return Err(Error::invalid("probe dataset has no records"));
    }
    let x = ComplexMatrix::from_fn(dim, dataset.inputs.len(), |r, c| dataset.inputs[c][r]);
    let y = ComplexMatrix::from_fn(dim, dataset.outputs.len(), |r, c| dataset.outputs[c][r]);
    let problem = FitProblem { dim, x_adj: x.adjoint(), y_adj: y.adjoint(), x, y, records: dataset.records.clone() };
    let mut best: Option<(ComplexMatrix, f64)> = None;
    for _ in 0..=options.restarts {
        let (t, rms, stalled) = problem.descend(options, rng)?;
        if best.as_ref().is_none_or(|b| rms < b.1) {
            best = Some((t, rms));
        }
        if !stalled {
            break;
        }
    }
    let (t, rms) = best.expect("at least one attempt");
    ApproxTm::new(t, TmMethod::IntensityFit, Some(rms))
}

/// Leading `d` input (columns of V) and output (columns of U) singular
/// vectors.
pub fn leading_subspace(approx: &ApproxTm, d: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let k = approx.svd.singular_values.len();
    if d == 0 || d > k {
        return Err(Error::invalid(format!("subspace dimension must be in 1..={k}, got {d}")));
    }
    Ok((approx.svd.v.leading_columns(d), approx.svd.u.leading_columns(d)))
}

/// `max |P_a - P_b|` for the projectors onto the column spans of `a`, `b`.
pub fn projector_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let pa = a * &a.adjoint();
    let pb = b * &b.adjoint();
    pa.max_abs_diff(&pb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{build_mstm, FiberSpec, MatrixStack};
    use crate::numerics::random_unitary;
    use crate::tolerances;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dense_mstm(t: ComplexMatrix) -> Mstm {
        let dim = t.rows();
        Mstm::from_parts(None, vec![810e-9], vec![1.0], MatrixStack::Dense { dim, matrices: vec![t] }, Vec::new())
            .unwrap()
    }

    #[test]
    fn single_wavelength_mean_is_the_matrix() {
        let mstm = build_mstm(&FiberSpec::graded_2m().monochromatic()).unwrap();
        let approx = spectral_mean_tm_with(&mstm, SpectralGauge::Raw).unwrap();
        assert_eq!(approx.matrix, mstm.matrices().matrix(0));
        assert!(approx.singular_values().iter().all(|s| (s - 1.0).abs() < 1e-14));
        assert_eq!(approx.method, TmMethod::SpectralMean);
    }

    #[test]
    fn opposite_phases_average_to_cosine() {
        let theta: f64 = 0.7;
        let diagonals =
            vec![vec![c(1.0, 0.0), C64::from_polar(1.0, theta)], vec![c(1.0, 0.0), C64::from_polar(1.0, -theta)]];
        let mstm = Mstm::from_diagonals(vec![809e-9, 811e-9], vec![0.5, 0.5], diagonals).unwrap();
        for gauge in [SpectralGauge::Raw, SpectralGauge::ReferenceEntry] {
            let approx = spectral_mean_tm_with(&mstm, gauge).unwrap();
            assert!((approx.matrix[(1, 1)] - c(theta.cos(), 0.0)).norm() < 1e-15);
            assert!(approx.matrix.is_diagonal());
        }
    }

    #[test]
    fn gauge_removes_common_phase() {
        let diagonals = vec![vec![c(-1.0, 0.0); 3], vec![c(1.0, 0.0); 3]];
        let mstm = Mstm::from_diagonals(vec![1.0, 2.0], vec![0.5, 0.5], diagonals).unwrap();
        let raw = spectral_mean_tm_with(&mstm, SpectralGauge::Raw).unwrap();
        assert!(raw.matrix.max_abs() < 1e-15);
        let aligned = spectral_mean_tm(&mstm).unwrap();
        assert_eq!(aligned.matrix, ComplexMatrix::identity(3));
    }

    #[test]
    fn preset_fiber_mean_has_decaying_spectrum() {
        let approx = spectral_mean_tm(&build_mstm(&FiberSpec::graded_5m()).unwrap()).unwrap();
        let s = approx.singular_values();
        assert!(approx.matrix.is_diagonal());
        assert!(s[0] > 0.999 && s[0] <= 1.0 + 1e-12);
        assert!(s[s.len() - 1] < 0.5 * s[0]);
        assert!(s.iter().all(|v| *v <= 1.0 + 1e-12));
    }

    #[test]
    fn longer_fiber_has_smaller_singular_values() {
        let short = spectral_mean_tm(&build_mstm(&FiberSpec::graded_2m()).unwrap()).unwrap();
        let long = spectral_mean_tm(&build_mstm(&FiberSpec::graded_5m()).unwrap()).unwrap();
        for (l, s) in long.singular_values().iter().zip(short.singular_values()).take(100) {
            assert!(*l <= s + 1e-9);
        }
    }

    #[test]
    fn diagonal_fiber_subspace_is_eigenmodes() {
        let approx = spectral_mean_tm(&build_mstm(&FiberSpec::graded_2m()).unwrap()).unwrap();
        let (vin, vout) = leading_subspace(&approx, 40).unwrap();
        for basis in [&vin, &vout] {
            assert!(basis.isometry_error() <= tolerances::UNITARITY);
            for j in 0..40 {
                let peak = basis.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(peak >= 1.0 - 1e-9);
            }
        }
        // equal singular values inside a group: kept in mode enumeration order
        assert_eq!(vin[(0, 0)].norm(), 1.0);
        assert_eq!(vin[(1, 1)].norm(), 1.0);
        assert_eq!(vin[(2, 2)].norm(), 1.0);
    }

    #[test]
    fn leading_subspace_bounds() {
        let mstm = build_mstm(&FiberSpec::graded_2m().monochromatic()).unwrap();
        let approx = spectral_mean_tm(&mstm).unwrap();
        let (vin, vout) = leading_subspace(&approx, approx.dim()).unwrap();
        assert!(vin.is_unitary(1e-12) && vout.is_unitary(1e-12));
        let (v1, _) = leading_subspace(&approx, 1).unwrap();
        assert_eq!(v1.cols(), 1);
        assert!(leading_subspace(&approx, approx.dim() + 1).is_err());
        assert!(leading_subspace(&approx, 0).is_err());
    }

    #[test]
    fn standard_probes_read_matrix_moduli() {
        let t = random_unitary(4, &mut Rng::from_seed(1)).unwrap();
        let mstm = dense_mstm(t.clone());
        let basis: Vec<Vec<C64>> = (0..4).map(|j| ComplexMatrix::identity(4).column(j)).collect();
        let data = probe_dataset_for(&mstm, basis.clone(), basis).unwrap();
        for &(i, o, v) in data.records() {
            assert!((v - t[(o, i)].norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn simulated_intensities_bounded_and_reproducible() {
        let mstm = build_mstm(&FiberSpec { num_wavelengths: 11, ..FiberSpec::graded_2m() }).unwrap();
        let a = simulate_probe_dataset(&mstm, 50, &mut Rng::from_seed(3)).unwrap();
        let b = simulate_probe_dataset(&mstm, 50, &mut Rng::from_seed(3)).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a.records(), b.records());
        assert!(a.records().iter().all(|r| r.2 >= 0.0 && r.2 <= 1.0 + 1e-12));
        assert!(simulate_probe_dataset(&mstm, 0, &mut Rng::from_seed(3)).is_err());
    }

    #[test]
    fn probe_csv_round_trip() {
        let t = random_unitary(2, &mut Rng::from_seed(4)).unwrap();
        let mstm = dense_mstm(t);
        let data = simulate_probe_dataset(&mstm, 7, &mut Rng::from_seed(5)).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("probe_in_id,probe_out_id,intensity\n"));
        let back = ProbeDataset::read_csv(&buf[..], data.inputs().to_vec(), data.outputs().to_vec()).unwrap();
        assert_eq!(back.records(), data.records());
        let bad = "probe_in_id,probe_out_id,intensity\n0,9,0.5\n";
        assert!(ProbeDataset::read_csv(bad.as_bytes(), data.inputs().to_vec(), data.outputs().to_vec()).is_err());
    }

    #[test]
    fn fit_recovers_unitary_up_to_global_phase() {
        for (dim, seed) in [(2usize, 10u64), (3, 11), (4, 12)] {
            let mut rng = Rng::from_seed(seed);
            let t0 = random_unitary(dim, &mut rng).unwrap();
            let data = simulate_probe_dataset(&dense_mstm(t0.clone()), default_num_probes(dim), &mut rng).unwrap();
            let fit = intensity_fit_tm(&data, dim, 20_000, &mut rng).unwrap();
            assert!(fit.residual.unwrap() <= 1e-6, "dim {dim}: residual {:?}", fit.residual);
            // align the global phase on the largest entry of t0
            let (r, cidx) = (0..dim * dim)
                .map(|k| (k / dim, k % dim))
                .max_by(|a, b| t0[*a].norm().total_cmp(&t0[*b].norm()))
                .unwrap();
            let phase = t0[(r, cidx)] / fit.matrix[(r, cidx)];
            let aligned = fit.matrix.scale(phase / phase.norm());
            assert!(aligned.max_abs_diff(&t0) < 1e-4, "dim {dim}");
        }
    }

    #[test]
    fn fit_from_monochromatic_fiber_matches_spectral_mean_subspace() {
        let mut spec = FiberSpec::graded_2m().monochromatic();
        spec.core_radius_m = 3e-6;
        let mstm = build_mstm(&spec).unwrap();
        let dim = mstm.dim();
        let mut rng = Rng::from_seed(21);
        let data = simulate_probe_dataset(&mstm, default_num_probes(dim), &mut rng).unwrap();
        let fit = intensity_fit_tm(&data, dim, 20_000, &mut rng).unwrap();
        let mean = spectral_mean_tm(&mstm).unwrap();
        assert!(fit.residual.unwrap() <= 1e-6);
        // all singular values are (numerically) one: the only invariant
        // subspace is the full space, on both sides
        let (vf, uf) = leading_subspace(&fit, dim).unwrap();
        let (vm, um) = leading_subspace(&mean, dim).unwrap();
        assert!(projector_distance(&vf, &vm) <= 1e-6);
        assert!(projector_distance(&uf, &um) <= 1e-6);
        assert!(fit.singular_values().iter().all(|s| (s - 1.0).abs() < 1e-5));
    }

    #[test]
    fn fit_rejects_zero_iterations() {
        let data = simulate_probe_dataset(&dense_mstm(ComplexMatrix::identity(2)), 4, &mut Rng::from_seed(0)).unwrap();
        let err = intensity_fit_tm(&data, 2, 0, &mut Rng::from_seed(0)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        assert!(matches!(intensity_fit_tm(&data, 3, 10, &mut Rng::from_seed(0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn monitor_flags_divergence() {
        let mut m = ResidualMonitor::new(10);
        assert_eq!(m.check(1.0), Progress::Improving);
        for k in 1..10 {
            assert_eq!(m.check(1.0 + k as f64), Progress::Improving);
        }
        assert_eq!(m.check(20.0), Progress::Diverged);
    }

    #[test]
    fn monitor_resets_after_decrease() {
        let mut m = ResidualMonitor::new(3);
        for r in [1.0, 2.0, 3.0, 2.5, 3.0, 4.0] {
            assert_eq!(m.check(r), Progress::Improving);
        }
        assert_eq!(m.check(5.0), Progress::Diverged);
    }

    #[test]
    fn monitor_flags_stall() {
        let mut m = ResidualMonitor::new(10);
        let mut verdict = Progress::Improving;
        for k in 0..200 {
            verdict = m.check(0.05 - 1e-7 * k as f64);
            if verdict != Progress::Improving {
                break;
            }
        }
        assert_eq!(verdict, Progress::Stalled);
    }

    #[test]
    fn non_finite_fit_is_an_optimization_failure() {
        let data = simulate_probe_dataset(&dense_mstm(ComplexMatrix::identity(3)), 36, &mut Rng::from_seed(0)).unwrap();
        let opts = FitOptions { learning_rate: f64::INFINITY, ..FitOptions::default() };
        let err = intensity_fit_tm_with(&data, 3, &opts, &mut Rng::from_seed(0)).unwrap_err();
        assert!(matches!(err, Error::OptimizationFailure { .. }));
        assert!(err.is_numeric());
    }
}

//! MUB correlation tensors `C_{a,b|x}` and the white-noise model.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::Mstm;
use crate::mub::MubFamily;
use crate::numerics::{ComplexMatrix, C64};
use crate::tolerances;

/// Probabilities `C_{a,b|x}` of outcome `a` for input `b`, both in basis `x`.
///
/// Every column `(x, b)` sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTensor {
    dim: usize,
    num_bases: usize,
    /// Index `(x * d + a) * d + b`.
    values: Vec<f64>,
}

impl CorrelationTensor {
    fn index(&self, x: usize, a: usize, b: usize) -> usize {
        (x * self.dim + a) * self.dim + b
    }

    /// Validates an already normalized tensor (layout `[x][a][b]`).
    pub fn from_normalized(dim: usize, num_bases: usize, values: Vec<f64>) -> Result<Self> {
        let t = Self::checked(dim, num_bases, values)?;
        let worst = t.normalization_error();
        if worst > tolerances::COLUMN_NORMALIZATION {
            return Err(Error::invalid(format!("tensor columns deviate from unit sum by {worst:e}")));
        }
        Ok(t)
    }

    /// Normalizes every column of non-negative data (layout `[x][a][b]`).
    pub fn from_raw(dim: usize, num_bases: usize, values: Vec<f64>) -> Result<Self> {
        let mut t = Self::checked(dim, num_bases, values)?;
        for x in 0..num_bases {
            for b in 0..dim {
                let total: f64 = (0..dim).map(|a| t.values[t.index(x, a, b)]).sum();
                if total <= 0.0 {
                    return Err(Error::invalid(format!("column b={b} of basis x={x} has zero total")));
                }
                for a in 0..dim {
                    let i = t.index(x, a, b);
                    t.values[i] /= total;
                }
            }
        }
        Ok(t)
    }

    fn checked(dim: usize, num_bases: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || num_bases == 0 {
            return Err(Error::invalid("tensor needs d >= 1 and m >= 1"));
        }
        let expected = num_bases * dim * dim;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { context: "correlation values", expected, found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("correlations must be finite and non-negative, found {v}")));
        }
        Ok(Self { dim, num_bases, values })
    }

    /// `C_{a,b|x} = δ_ab`.
    pub fn perfect(dim: usize, num_bases: usize) -> Self {
        let mut values = vec![0.0; num_bases * dim * dim];
        for x in 0..num_bases {
            for a in 0..dim {
                values[(x * dim + a) * dim + a] = 1.0;
            }
        }
        Self { dim, num_bases, values }
    }

    /// All entries `1/d`.
    pub fn maximally_mixed(dim: usize, num_bases: usize) -> Self {
        Self { dim, num_bases, values: vec![1.0 / dim as f64; num_bases * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_bases(&self) -> usize {
        self.num_bases
    }

    pub fn get(&self, x: usize, a: usize, b: usize) -> f64 {
        self.values[self.index(x, a, b)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Σ_a C_{a,a|x}`.
    pub fn diagonal_sum(&self, x: usize) -> f64 {
        (0..self.dim).map(|a| self.get(x, a, a)).sum()
    }

    /// The first `m` bases.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.num_bases {
            return Err(Error::invalid(format!("cannot keep {m} of {} bases", self.num_bases)));
        }
        Ok(Self { dim: self.dim, num_bases: m, values: self.values[..m * self.dim * self.dim].to_vec() })
    }

    /// Relabels outcomes and inputs of every basis by the same permutation.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dim;
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("relabeling must be a permutation of 0..d"));
        }
        let mut values = vec![0.0; self.values.len()];
        for x in 0..self.num_bases {
            for a in 0..d {
                for b in 0..d {
                    values[(x * d + perm[a]) * d + perm[b]] = self.get(x, a, b);
                }
            }
        }
        Ok(Self { dim: d, num_bases: self.num_bases, values })
    }

    /// Largest `|Σ_a C_{a,b|x} - 1|`.
    pub fn normalization_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.num_bases {
            for b in 0..self.dim {
                let total: f64 = (0..self.dim).map(|a| self.get(x, a, b)).sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
        worst
    }

    /// CSV with columns `x, a, b, value`, rows in `(x, a, b)` order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "a", "b", "value"])?;
        for x in 0..self.num_bases {
            for a in 0..self.dim {
                for b in 0..self.dim {
                    w.serialize((x, a, b, self.get(x, a, b)))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `x, a, b, value` records in any order and normalizes columns.
    ///
    /// Every `(x, a, b)` in the grid spanned by the largest indices must
    /// appear exactly once.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: usize,
            a: usize,
            b: usize,
            value: f64,
        }
        let mut rows = Vec::new();
        for (line, row) in csv::Reader::from_reader(input).deserialize::<Row>().enumerate() {
            rows.push(row.map_err(|e| Error::Parse(format!("correlation CSV record {}: {e}", line + 1)))?);
        }
        if rows.is_empty() {
            return Err(Error::Parse("correlation CSV has no records".into()));
        }
        let m = rows.iter().map(|r| r.x).max().unwrap_or(0) + 1;
        let d = rows.iter().map(|r| r.a.max(r.b)).max().unwrap_or(0) + 1;
        if rows.len() != m * d * d {
            return Err(Error::Parse(format!("expected {} records for d={d}, m={m}, found {}", m * d * d, rows.len())));
        }
        let mut values = vec![f64::NAN; m * d * d];
        for r in &rows {
            let i = (r.x * d + r.a) * d + r.b;
            if !values[i].is_nan() {
                return Err(Error::Parse(format!("duplicate record x={}, a={}, b={}", r.x, r.a, r.b)));
            }
            values[i] = r.value;
        }
        Self::from_raw(d, m, values)
    }
}

/// White-noise mixing parameter `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    None,
    FixedP {
        p: f64,
    },
    /// `p(d) = a d^2 + b d + c`, clamped to `[0, 1]`.
    QuadraticP {
        a: f64,
        b: f64,
        c: f64,
    },
}

impl NoiseModel {
    /// Coefficients fitted to the 2 m fiber.
    pub const FIBER_2M: NoiseModel = NoiseModel::QuadraticP { a: 7.415e-6, b: -2.851e-3, c: 9.864e-1 };
    /// Coefficients fitted to the 5 m fiber.
    pub const FIBER_5M: NoiseModel = NoiseModel::QuadraticP { a: 6.167e-6, b: -2.549e-3, c: 8.769e-1 };

    /// Mixing parameter at subspace dimension `d`.
    pub fn p_at(&self, d: usize) -> Result<f64> {
        match *self {
            NoiseModel::None => Ok(1.0),
            NoiseModel::FixedP { p } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(p)
                } else {
                    Err(Error::invalid(format!("fixed noise parameter p must lie in [0, 1], got {p}")))
                }
            }
            NoiseModel::QuadraticP { a, b, c } => {
                let d = d as f64;
                let p = a * d * d + b * d + c;
                if !p.is_finite() {
                    return Err(Error::invalid("quadratic noise polynomial is not finite"));
                }
                Ok(p.clamp(0.0, 1.0))
            }
        }
    }
}

/// `p C + (1 - p)/d` entrywise, with `p` from the model at the tensor's `d`.
pub fn apply_noise(c: &CorrelationTensor, model: &NoiseModel) -> Result<CorrelationTensor> {
    let p = model.p_at(c.dim)?;
    Ok(mix(c, p))
}

/// `p C + (1 - p)/d` entrywise.
pub fn mix(c: &CorrelationTensor, p: f64) -> CorrelationTensor {
    let floor = (1.0 - p) / c.dim as f64;
    CorrelationTensor { dim: c.dim, num_bases: c.num_bases, values: c.values.iter().map(|v| p * v + floor).collect() }
}

/// Wavelengths per parallel chunk. Fixed so the reduction order, and thus
/// every bit of the result, does not depend on the thread count.
const CHUNK: usize = 8;

/// Spectrally averaged correlations in the MUBs rotated into the given
/// subspace: `C_{a,b|x} ∝ Σ_λ w_λ |<e_{a|x}^out| T(λ) |e_{b|x}^in>|^2`,
/// with `e_{b|x}^in = (input W_x)_b` and likewise for outputs.
pub fn mub_correlations(
    mstm: &Mstm,
    bases: (&ComplexMatrix, &ComplexMatrix),
    mubs: &MubFamily,
) -> Result<CorrelationTensor> {
    let (input, output) = bases;
    let d = mubs.dim();
    let big = mstm.dim();
    for (name, basis) in [("input basis", input), ("output basis", output)] {
        if basis.cols() != d {
            return Err(Error::invalid(format!("{name} has {} columns, MUBs have d={d}", basis.cols())));
        }
        if basis.rows() != big {
            return Err(Error::invalid(format!("{name} has {} rows, channel has {big} modes", basis.rows())));
        }
    }
    let m = mubs.len();
    if d == 1 {
        return Ok(CorrelationTensor::perfect(1, m));
    }

    // Diagonal channels only couple rows where both bases have support.
    let active: Vec<usize> =
        (0..big).filter(|&j| (0..d).any(|c| input[(j, c)].norm() > 0.0 || output[(j, c)].norm() > 0.0)).collect();
    let input_rows = input.select_rows(&active);
    let output_rows_adj = output.select_rows(&active).adjoint();
    let output_adj = output.adjoint();
    let rotations: Vec<(ComplexMatrix, ComplexMatrix)> =
        mubs.matrices().iter().map(|w| (w.adjoint(), w.clone())).collect();

    let stack = mstm.matrices();
    let per_wavelength = |l: usize| -> Vec<f64> {
        // A = out^† T in, then W^† A W per basis
        let a = match stack.diagonal(l) {
            Some(diag) => {
                let scaled = ComplexMatrix::from_fn(active.len(), d, |r, c| diag[active[r]] * input_rows[(r, c)]);
                &output_rows_adj * &scaled
            }
            None => &(&output_adj * &stack.matrix(l)) * input,
        };
        let w = mstm.weights()[l];
        let mut out = vec![0.0; m * d * d];
        for (x, (w_adj, w_x)) in rotations.iter().enumerate() {
            let rotated = &(w_adj * &a) * w_x;
            for i in 0..d {
                for j in 0..d {
                    out[(x * d + i) * d + j] = w * rotated[(i, j)].norm_sqr();
                }
            }
        }
        out
    };

    let n = mstm.len();
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            let mut acc = vec![0.0; m * d * d];
            for l in (k * CHUNK)..((k + 1) * CHUNK).min(n) {
                for (s, v) in acc.iter_mut().zip(per_wavelength(l)) {
                    *s += v;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; m * d * d];
    for chunk in chunks {
        for (s, v) in total.iter_mut().zip(chunk) {
            *s += v;
        }
    }
    CorrelationTensor::from_raw(d, m, total)
}

/// Correlations of a single unitary (or general) matrix `t` in the MUBs,
/// with the subspace given by `bases`.
pub fn matrix_correlations(
    t: &ComplexMatrix,
    bases: (&ComplexMatrix, &ComplexMatrix),
    mubs: &MubFamily,
) -> Result<CorrelationTensor> {
    let dim = t.rows();
    let mstm = Mstm::from_parts(
        None,
        vec![0.0],
        vec![1.0],
        crate::fiber::MatrixStack::Dense { dim, matrices: vec![t.clone()] },
        Vec::new(),
    )?;
    mub_correlations(&mstm, bases, mubs)
}

/// The identity embedding of the first `d` of `big` modes.
pub fn leading_modes(big: usize, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(big, d, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{build_mstm, FiberSpec};
    use crate::numerics::{random_unitary, Rng};
    use crate::tm_estimation::{leading_subspace, spectral_mean_tm};

    fn short_band(spec: FiberSpec) -> FiberSpec {
        FiberSpec { num_wavelengths: 21, ..spec }
    }

    #[test]
    fn monochromatic_fiber_is_perfect_in_every_basis() {
        let mstm = build_mstm(&FiberSpec::graded_2m().monochromatic()).unwrap();
        let approx = spectral_mean_tm(&mstm).unwrap();
        for d in [2usize, 5, 13] {
            let (vin, vout) = leading_subspace(&approx, d).unwrap();
            let mubs = MubFamily::prime_family(d, d + 1).unwrap();
            let c = mub_correlations(&mstm, (&vin, &vout), &mubs).unwrap();
            for x in 0..d + 1 {
                for a in 0..d {
                    for b in 0..d {
                        let target = if a == b { 1.0 } else { 0.0 };
                        assert!((c.get(x, a, b) - target).abs() < 1e-12);
                    }
                }
                assert!((c.diagonal_sum(x) - d as f64).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn columns_are_normalized() {
        let mstm = build_mstm(&short_band(FiberSpec::graded_5m())).unwrap();
        let approx = spectral_mean_tm(&mstm).unwrap();
        let (vin, vout) = leading_subspace(&approx, 7).unwrap();
        let c = mub_correlations(&mstm, (&vin, &vout), &MubFamily::prime_family(7, 8).unwrap()).unwrap();
        assert!(c.normalization_error() <= tolerances::COLUMN_NORMALIZATION);
        assert!(c.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn unitary_channel_diagonal_sums_equal_d() {
        let mut rng = Rng::from_seed(8);
        let t = random_unitary(6, &mut rng).unwrap();
        let out = random_unitary(6, &mut rng).unwrap();
        // output basis T in: the channel acts as the identity between the bases
        let input = ComplexMatrix::identity(6);
        let output = &t * &input;
        let c = matrix_correlations(&t, (&input, &output), &MubFamily::fourier_pair(6).unwrap()).unwrap();
        for x in 0..2 {
            assert!((c.diagonal_sum(x) - 6.0).abs() < 1e-10);
        }
        // a mismatched output basis is still a unitary channel: columns normalized
        let c = matrix_correlations(&t, (&input, &out), &MubFamily::fourier_pair(6).unwrap()).unwrap();
        assert!(c.normalization_error() < 1e-12);
    }

    #[test]
    fn wavelength_order_does_not_matter() {
        let mstm = build_mstm(&short_band(FiberSpec::graded_2m())).unwrap();
        let approx = spectral_mean_tm(&mstm).unwrap();
        let (vin, vout) = leading_subspace(&approx, 5).unwrap();
        let mubs = MubFamily::prime_family(5, 6).unwrap();
        let order: Vec<usize> = (0..mstm.len()).rev().collect();
        let shuffled = mstm.permuted(&order);
        let a = mub_correlations(&mstm, (&vin, &vout), &mubs).unwrap();
        let b = mub_correlations(&shuffled, (&vin, &vout), &mubs).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mstm = build_mstm(&FiberSpec::graded_2m().monochromatic()).unwrap();
        let basis = leading_modes(mstm.dim(), 4);
        let err = mub_correlations(&mstm, (&basis, &basis), &MubFamily::fourier_pair(5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        let short = leading_modes(10, 5);
        assert!(mub_correlations(&mstm, (&short, &short), &MubFamily::fourier_pair(5).unwrap()).is_err());
    }

    #[test]
    fn noise_endpoints() {
        let c = CorrelationTensor::perfect(4, 2);
        assert_eq!(apply_noise(&c, &NoiseModel::FixedP { p: 1.0 }).unwrap(), c);
        assert_eq!(apply_noise(&c, &NoiseModel::None).unwrap(), c);
        let flat = apply_noise(&c, &NoiseModel::FixedP { p: 0.0 }).unwrap();
        assert!(flat.values().iter().all(|v| *v == 0.25));
        assert!(matches!(apply_noise(&c, &NoiseModel::FixedP { p: 1.5 }), Err(Error::InvalidArgument(_))));
        assert!(apply_noise(&c, &NoiseModel::FixedP { p: -0.1 }).is_err());
    }

    #[test]
    fn quadratic_presets() {
        let p = NoiseModel::FIBER_2M.p_at(100).unwrap();
        assert!((p - 0.77545).abs() < 1e-12, "{p}");
        let p5 = NoiseModel::FIBER_5M.p_at(13).unwrap();
        assert!((p5 - (6.167e-6 * 169.0 - 2.549e-3 * 13.0 + 0.8769)).abs() < 1e-15);
        let steep = NoiseModel::QuadraticP { a: 0.0, b: -1.0, c: 0.5 };
        assert_eq!(steep.p_at(10).unwrap(), 0.0);
        let high = NoiseModel::QuadraticP { a: 0.0, b: 0.0, c: 3.0 };
        assert_eq!(high.p_at(10).unwrap(), 1.0);
    }

    #[test]
    fn noise_model_serde_shape() {
        let m: NoiseModel = serde_json::from_str(r#"{"kind":"quadratic_p","a":1.0,"b":2.0,"c":3.0}"#).unwrap();
        assert_eq!(m, NoiseModel::QuadraticP { a: 1.0, b: 2.0, c: 3.0 });
        let m: NoiseModel = serde_json::from_str(r#"{"kind":"none"}"#).unwrap();
        assert_eq!(m, NoiseModel::None);
        assert!(serde_json::from_str::<NoiseModel>(r#"{"kind":"fixed_p","p":0.5,"q":1}"#).is_err());
    }

    #[test]
    fn csv_round_trip_and_normalization() {
        let c = mix(&CorrelationTensor::perfect(3, 2), 0.6);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,a,b,value\n0,0,0,"));
        let back = CorrelationTensor::read_csv(&buf[..]).unwrap();
        for (x, y) in back.values().iter().zip(c.values()) {
            assert!((x - y).abs() < 1e-15);
        }
        // raw counts are normalized on import
        let raw = "x,a,b,value\n0,0,0,30\n0,1,0,10\n0,0,1,0\n0,1,1,5\n";
        let t = CorrelationTensor::read_csv(raw.as_bytes()).unwrap();
        assert_eq!(t.get(0, 0, 0), 0.75);
        assert_eq!(t.get(0, 1, 1), 1.0);
    }

    #[test]
    fn csv_rejects_incomplete_or_duplicate() {
        assert!(CorrelationTensor::read_csv("x,a,b,value\n0,0,0,1\n0,1,1,1\n".as_bytes()).is_err());
        let dup = "x,a,b,value\n0,0,0,1\n0,0,0,1\n0,1,0,1\n0,1,1,1\n";
        assert!(matches!(CorrelationTensor::read_csv(dup.as_bytes()), Err(Error::Parse(_))));
        assert!(CorrelationTensor::read_csv("x,a,b,value\n0,0,0,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn from_normalized_validates() {
        assert!(CorrelationTensor::from_normalized(2, 1, vec![0.5, 0.5, 0.5, 0.5]).is_ok());
        assert!(CorrelationTensor::from_normalized(2, 1, vec![0.5, 0.5, 0.6, 0.5]).is_err());
        assert!(CorrelationTensor::from_normalized(2, 1, vec![0.5, 0.5]).is_err());
        assert!(CorrelationTensor::from_raw(2, 1, vec![0.0, 1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn relabeling_permutes_entries() {
        let c = CorrelationTensor::from_raw(3, 1, (1..=9).map(f64::from).collect()).unwrap();
        let r = c.relabeled(&[2, 0, 1]).unwrap();
        assert_eq!(r.get(0, 2, 0), c.get(0, 0, 1));
        assert!((r.diagonal_sum(0) - c.diagonal_sum(0)).abs() < 1e-15);
        assert!(c.relabeled(&[0, 0, 1]).is_err());
    }
}

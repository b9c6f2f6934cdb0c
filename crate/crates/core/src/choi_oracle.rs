//! Brute-force validation on explicit channels.
//!
//! Channels are given by Kraus operators; their Choi states are built as
//! `ρ = (Λ ⊗ id)(|ψ+><ψ+|)`, `|ψ+> = Σ_i |ii>/√d`, with the channel output as
//! the first tensor factor (vector index `i d + j` for `|i>|j>`). All
//! transposes and conjugates refer to the standard basis.

use nalgebra::linalg::SymmetricEigen;
use serde::Serialize;

use crate::correlations::{mix, CorrelationTensor};
use crate::error::{Error, Result};
use crate::mub::{is_prime, MubFamily};
use crate::numerics::{random_unitary, svd, ComplexMatrix, Rng, C64};
use crate::tolerances;
use crate::witness::{certify, for_each_gamma_index, violates, WitnessKind};

/// Completely positive trace-preserving map `ρ ↦ Σ K ρ K^†`.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    dim: usize,
    kraus: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = kraus
            .first()
            .map(ComplexMatrix::rows)
            .ok_or_else(|| Error::InvalidChannel("at least one Kraus operator is required".into()))?;
        if let Some(k) = kraus.iter().find(|k| k.rows() != dim || k.cols() != dim) {
            return Err(Error::InvalidChannel(format!(
                "Kraus operators must all be {dim}x{dim}, found {}x{}",
                k.rows(),
                k.cols()
            )));
        }
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for k in &kraus {
            sum = &sum + &(&k.adjoint() * k);
        }
        let err = sum.max_abs_diff(&ComplexMatrix::identity(dim));
        if err > tolerances::TRACE_PRESERVATION {
            return Err(Error::InvalidChannel(format!("Σ K^†K deviates from the identity by {err:e}")));
        }
        Ok(Self { dim, kraus })
    }

    pub fn identity(d: usize) -> Self {
        Self { dim: d, kraus: vec![ComplexMatrix::identity(d)] }
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    /// Completely depolarizing channel, Kraus operators `|i><j|/√d`.
    pub fn depolarizing(d: usize) -> Self {
        let s = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        let kraus = (0..d * d)
            .map(|k| {
                let (i, j) = (k / d, k % d);
                ComplexMatrix::from_fn(d, d, |r, c| if r == i && c == j { s } else { C64::new(0.0, 0.0) })
            })
            .collect();
        Self { dim: d, kraus }
    }

    /// Random channel with `r` Kraus operators: blocks of a Haar isometry
    /// `C^d → C^r ⊗ C^d`.
    pub fn random(d: usize, r: usize, rng: &mut Rng) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(Error::invalid("random channel needs d >= 1 and r >= 1"));
        }
        let u = random_unitary(r * d, rng)?;
        let kraus = (0..r).map(|k| ComplexMatrix::from_fn(d, d, |i, j| u[(k * d + i, j)])).collect();
        Self::new(kraus)
    }

    /// Random channel whose Kraus operators all have rank at most `k`, so
    /// its Schmidt number is at most `k`.
    pub fn random_rank_limited(d: usize, k: usize, count: usize, rng: &mut Rng) -> Result<Self> {
        if k == 0 || k > d || count == 0 {
            return Err(Error::invalid(format!("need 1 <= k <= d and count >= 1, got k={k}, d={d}")));
        }
        // Σ B^†B must be invertible, which needs at least d/k operators
        let count = count.max(d.div_ceil(k) + 1);
        let raw: Vec<ComplexMatrix> = (0..count)
            .map(|_| {
                let g = ComplexMatrix::from_fn(d, k, |_, _| rng.complex_normal());
                let h = ComplexMatrix::from_fn(k, d, |_, _| rng.complex_normal());
                &g * &h
            })
            .collect();
        let mut s = ComplexMatrix::zeros(d, d);
        for b in &raw {
            s = &s + &(&b.adjoint() * b);
        }
        let inv_sqrt = hermitian_function(&s, |x| 1.0 / x.sqrt())?;
        Self::new(raw.iter().map(|b| b * &inv_sqrt).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// Largest Kraus-operator rank: an upper bound on the Schmidt number.
    pub fn max_kraus_rank(&self) -> Result<usize> {
        let mut best = 0;
        for k in &self.kraus {
            let s = svd(k)?.singular_values;
            let top = s.first().copied().unwrap_or(0.0);
            best = best.max(s.iter().filter(|v| **v > 1e-9 * top.max(1e-300)).count());
        }
        Ok(best)
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out = &out + &(&(k * rho) * &k.adjoint());
        }
        out
    }

    /// `u ∘ Λ ∘ v`: `ρ ↦ u Λ(v ρ v^†) u^†`.
    pub fn dressed(&self, u: &ComplexMatrix, v: &ComplexMatrix) -> Self {
        Self { dim: self.dim, kraus: self.kraus.iter().map(|k| &(u * k) * v).collect() }
    }

    /// `q Λ + (1 - q) other`.
    pub fn mixed(&self, q: f64, other: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) || other.dim != self.dim {
            return Err(Error::invalid("mixing needs q in [0, 1] and equal dimensions"));
        }
        let a = C64::new(q.sqrt(), 0.0);
        let b = C64::new((1.0 - q).sqrt(), 0.0);
        let mut kraus: Vec<ComplexMatrix> = self.kraus.iter().map(|k| k.scale(a)).collect();
        kraus.extend(other.kraus.iter().map(|k| k.scale(b)));
        Ok(Self { dim: self.dim, kraus })
    }
}

/// `f(H)` for Hermitian `H` via its eigendecomposition.
fn hermitian_function(h: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let eig = SymmetricEigen::new(h.inner().clone());
    let n = h.rows();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure { op: "eigen", rows: n, cols: n, detail: "non-finite eigenvalue".into() });
    }
    let q = ComplexMatrix::from_inner(eig.eigenvectors.clone());
    let diag = ComplexMatrix::from_diagonal(&eig.eigenvalues.iter().map(|&v| C64::new(f(v), 0.0)).collect::<Vec<_>>());
    Ok(&(&q * &diag) * &q.adjoint())
}

/// Channel of Schmidt number exactly `k`: coherent identity on the first `k`
/// levels, full dephasing on the rest. Kraus operators `P_k` and `|j><j|`
/// for `j >= k`.
pub fn known_sn_channel(d: usize, k: usize) -> Result<KrausChannel> {
    if k == 0 || k > d {
        return Err(Error::invalid(format!("Schmidt number k must satisfy 1 <= k <= d = {d}, got {k}")));
    }
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut kraus = vec![ComplexMatrix::from_fn(d, d, |i, j| if i == j && i < k { one } else { zero })];
    for j in k..d {
        kraus.push(ComplexMatrix::from_fn(d, d, |r, c| if r == j && c == j { one } else { zero }));
    }
    KrausChannel::new(kraus)
}

/// Choi state of a `d`-dimensional channel, a `d^2 x d^2` density matrix.
#[derive(Clone, Debug)]
pub struct ChoiState {
    dim: usize,
    matrix: ComplexMatrix,
}

pub fn choi_of(channel: &KrausChannel) -> Result<ChoiState> {
    // re-validate: the fields are private, but a channel may have been mixed
    let channel = KrausChannel::new(channel.kraus.clone())?;
    let d = channel.dim;
    let s = 1.0 / (d as f64).sqrt();
    let mut rho = ComplexMatrix::zeros(d * d, d * d);
    for k in &channel.kraus {
        let v: Vec<C64> = (0..d * d).map(|idx| k[(idx / d, idx % d)] * s).collect();
        rho = &rho + &ComplexMatrix::from_fn(d * d, d * d, |r, c| v[r] * v[c].conj());
    }
    Ok(ChoiState { dim: d, matrix: rho })
}

impl ChoiState {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.matrix.max_abs_diff(&self.matrix.adjoint())
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.matrix.inner().clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|v| **v > tol).count()
    }

    /// Schmidt rank of the state if it is pure.
    pub fn pure_schmidt_rank(&self) -> Result<Option<usize>> {
        if self.rank(1e-9) != 1 {
            return Ok(None);
        }
        let eig = SymmetricEigen::new(self.matrix.inner().clone());
        let top =
            (0..eig.eigenvalues.len()).max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j])).unwrap_or(0);
        let d = self.dim;
        let coeffs = ComplexMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i * d + j, top)]);
        let s = svd(&coeffs)?.singular_values;
        let largest = s.first().copied().unwrap_or(0.0);
        Ok(Some(s.iter().filter(|v| **v > 1e-9 * largest).count()))
    }

    /// `<u ⊗ w| ρ |u ⊗ w>`.
    pub fn expectation(&self, u: &[C64], w: &[C64]) -> f64 {
        let d = self.dim;
        let v: Vec<C64> = (0..d * d).map(|idx| u[idx / d] * w[idx % d]).collect();
        let mut total = C64::new(0.0, 0.0);
        for (r, vr) in v.iter().enumerate() {
            let row: C64 = v.iter().enumerate().map(|(c, vc)| self.matrix[(r, c)] * vc).sum();
            total += vr.conj() * row;
        }
        total.re
    }

    /// `<e_{a|x} e*_{b|x}| ρ |e_{a|x} e*_{b|x}>`.
    fn basis_overlap(&self, mubs: &MubFamily, x: usize, a: usize, b: usize) -> f64 {
        let w = mubs.basis(x);
        let ea = w.column(a);
        let eb_conj: Vec<C64> = w.column(b).iter().map(|z| z.conj()).collect();
        self.expectation(&ea, &eb_conj)
    }
}

/// `C_{a,b|x} = Tr(Λ(|e_b><e_b|) |e_a><e_a|)` with `e = e_{·|x}`.
pub fn channel_correlations(channel: &KrausChannel, mubs: &MubFamily) -> Result<CorrelationTensor> {
    let d = channel.dim;
    if mubs.dim() != d {
        return Err(Error::DimensionMismatch { context: "MUB dimension", expected: d, found: mubs.dim() });
    }
    let m = mubs.len();
    let mut values = vec![0.0; m * d * d];
    for (x, w) in mubs.matrices().iter().enumerate() {
        let w_adj = w.adjoint();
        for k in &channel.kraus {
            let rotated = &(&w_adj * k) * w;
            for a in 0..d {
                for b in 0..d {
                    values[(x * d + a) * d + b] += rotated[(a, b)].norm_sqr();
                }
            }
        }
    }
    CorrelationTensor::from_normalized(d, m, values)
}

/// State form of the two-basis FT witness, bounded by `n + 1`:
/// `Σ_a <aa*|ρ|aa*>_0 + d Σ_a <aa*|ρ|aa*>_1 − Σ γ √(<a'b'*|ρ|a'b'*>_0 <ab*|ρ|ab*>_0)`.
pub fn state_side_ft_form(choi: &ChoiState, mubs: &MubFamily) -> Result<f64> {
    let d = choi.dim;
    if mubs.dim() != d || mubs.len() < 2 {
        return Err(Error::invalid("state-side witness needs two MUBs of the Choi dimension"));
    }
    let df = d as f64;
    let first: f64 = (0..d).map(|a| choi.basis_overlap(mubs, 0, a, a)).sum();
    let second: f64 = (0..d).map(|a| choi.basis_overlap(mubs, 1, a, a)).sum();
    let table: Vec<f64> = (0..d * d).map(|k| choi.basis_overlap(mubs, 0, k / d, k % d).max(0.0)).collect();
    let mut gamma = 0.0;
    for_each_gamma_index(d, |a, a2, b, b2| {
        gamma += (table[a2 * d + b2] * table[a * d + b]).sqrt();
    });
    Ok(first + df * second - gamma)
}

/// [`state_side_ft_form`] scaled by `d`, directly comparable with the
/// channel-side value (bound `d(n + 1)`).
pub fn state_side_ft_value(choi: &ChoiState, mubs: &MubFamily) -> Result<f64> {
    Ok(choi.dim as f64 * state_side_ft_form(choi, mubs)?)
}

/// `d Σ_{x<m} Σ_a <e_{a|x} e*_{a|x}|ρ|e_{a|x} e*_{a|x}>`, the state form of
/// the m-basis FT witness scaled to the channel bound `d + (m − 1)n`.
pub fn state_side_morelli_value(choi: &ChoiState, mubs: &MubFamily, m: usize) -> Result<f64> {
    if mubs.dim() != choi.dim || mubs.len() < m {
        return Err(Error::invalid("state-side witness needs m MUBs of the Choi dimension"));
    }
    let d = choi.dim;
    let total: f64 = (0..m).map(|x| (0..d).map(|a| choi.basis_overlap(mubs, x, a, a)).sum::<f64>()).sum();
    Ok(d as f64 * total)
}

/// Largest `Σ_{x,a} <m_{a|x}| Λ(|e_{a|x}><e_{a|x}|) |m_{a|x}>` found over
/// rank-1 projective measurements `{m_{a|x}}`, for the first two MUBs.
///
/// Starts from the MUBs themselves and from random bases, then hill-climbs
/// with shrinking unitary perturbations.
pub fn pt_measurement_search(channel: &KrausChannel, mubs: &MubFamily, starts: usize, rng: &mut Rng) -> Result<f64> {
    let d = channel.dim;
    if mubs.dim() != d || mubs.len() < 2 {
        return Err(Error::invalid("measurement search needs two MUBs of the channel dimension"));
    }
    let outputs: Vec<Vec<ComplexMatrix>> = (0..2)
        .map(|x| {
            let w = mubs.basis(x);
            (0..d)
                .map(|a| {
                    let e = w.column(a);
                    let proj = ComplexMatrix::from_fn(d, d, |i, j| e[i] * e[j].conj());
                    channel.apply(&proj)
                })
                .collect()
        })
        .collect();
    let score = |x: usize, m: &ComplexMatrix| -> f64 {
        (0..d)
            .map(|a| {
                let v = m.column(a);
                let sv: Vec<C64> = (0..d).map(|i| (0..d).map(|j| outputs[x][a][(i, j)] * v[j]).sum()).collect();
                v.iter().zip(&sv).map(|(p, q)| p.conj() * q).sum::<C64>().re
            })
            .sum()
    };
    let mut total = 0.0;
    for x in 0..2 {
        let mut best = score(x, mubs.basis(x));
        for s in 0..=starts {
            let mut current = if s == 0 { mubs.basis(x).clone() } else { random_unitary(d, rng)? };
            let mut value = score(x, &current);
            let mut step = 0.5;
            let mut budget = 2000;
            while step > 1e-6 && budget > 0 {
                let mut improved = false;
                for _ in 0..20 {
                    budget -= 1;
                    let candidate = &small_unitary(d, step, rng)? * &current;
                    let v = score(x, &candidate);
                    if v > value + 1e-13 {
                        value = v;
                        current = candidate;
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best = best.max(value);
        }
        total += best;
    }
    Ok(total)
}

/// `exp(i ε H)` for a random Hermitian `H` with unit-scale entries.
fn small_unitary(d: usize, eps: f64, rng: &mut Rng) -> Result<ComplexMatrix> {
    let g = ComplexMatrix::from_fn(d, d, |_, _| rng.complex_normal());
    let h = (&g + &g.adjoint()).scale(C64::new(0.5, 0.0));
    let eig = SymmetricEigen::new(h.inner().clone());
    let q = ComplexMatrix::from_inner(eig.eigenvectors.clone());
    let phases: Vec<C64> = eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, eps * l)).collect();
    Ok(&(&q * &ComplexMatrix::from_diagonal(&phases)) * &q.adjoint())
}

/// Witnesses applicable in dimension `d` with the bases available there.
pub fn applicable_witnesses(d: usize) -> Vec<WitnessKind> {
    let mut kinds = vec![WitnessKind::FtBavaresco, WitnessKind::PtSteering, WitnessKind::FtMorelli(2)];
    if is_prime(d) {
        kinds.push(WitnessKind::FtMorelli(3.min(d + 1)));
        if d + 1 > 3 {
            kinds.push(WitnessKind::FtMorelli(d + 1));
        }
    }
    kinds
}

/// MUBs for the witnesses of [`applicable_witnesses`].
pub fn oracle_mubs(d: usize) -> Result<MubFamily> {
    if is_prime(d) {
        MubFamily::prime_family(d, d + 1)
    } else {
        MubFamily::fourier_pair(d)
    }
}

/// Largest certified dimension over all applicable witnesses.
pub fn max_certified(channel: &KrausChannel) -> Result<(usize, WitnessKind)> {
    let mubs = oracle_mubs(channel.dim)?;
    let c = channel_correlations(channel, &mubs)?;
    let mut best = (0, WitnessKind::FtBavaresco);
    for kind in applicable_witnesses(channel.dim) {
        let n = certify(&c.truncated(kind.num_bases())?, kind)?.certified_n;
        if n > best.0 {
            best = (n, kind);
        }
    }
    Ok(best)
}

/// SN-preserving randomization of a channel: local unitaries on both sides,
/// mixed with the completely depolarizing channel.
pub fn noise_dressing(channel: &KrausChannel, rng: &mut Rng) -> Result<KrausChannel> {
    let d = channel.dim;
    let u = random_unitary(d, rng)?;
    let v = random_unitary(d, rng)?;
    let q = rng.uniform();
    channel.dressed(&u, &v).mixed(q, &KrausChannel::depolarizing(d))
}

/// One line of the oracle battery.
#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Sizes of the oracle battery.
#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub equivalence_channels: usize,
    pub soundness_dressings: usize,
    pub pt_channels: usize,
    pub pt_starts: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { equivalence_channels: 100, soundness_dressings: 500, pt_channels: 10, pt_starts: 4, seed: 0 }
    }
}

/// Largest `|channel LHS - state LHS|` over random two-Kraus channels.
pub fn equivalence_check(d: usize, channels: usize, rng: &mut Rng) -> Result<f64> {
    let mubs = MubFamily::fourier_pair(d)?;
    let mut worst: f64 = 0.0;
    for _ in 0..channels {
        let ch = KrausChannel::random(d, 2, rng)?;
        let channel_side = crate::witness::ft_bavaresco_value(&channel_correlations(&ch, &mubs)?)?;
        let state_side = state_side_ft_value(&choi_of(&ch)?, &mubs)?;
        worst = worst.max((channel_side - state_side).abs());
    }
    Ok(worst)
}

/// Count of `(dressing, witness)` pairs certifying above `k`, over dressings
/// of `known_sn_channel(d, k)` and random rank-`k` channels.
pub fn soundness_violations(d: usize, k: usize, dressings: usize, rng: &mut Rng) -> Result<usize> {
    let base = known_sn_channel(d, k)?;
    let mut violations = 0;
    for t in 0..dressings {
        let ch = if t % 2 == 0 {
            noise_dressing(&base, rng)?
        } else {
            let r = KrausChannel::random_rank_limited(d, k, 1 + t % 3, rng)?;
            noise_dressing(&r, rng)?
        };
        let (n, _) = max_certified(&ch)?;
        if n > k {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Runs the full battery and reports one line per check.
pub fn run_oracle_battery(options: &OracleOptions) -> Result<Vec<OracleCheck>> {
    let rng = Rng::from_seed(options.seed);
    let mut checks = Vec::new();

    for d in [2usize, 3, 4, 5] {
        let worst = equivalence_check(d, options.equivalence_channels, &mut rng.fork(d as u64))?;
        checks.push(OracleCheck {
            name: format!("state/channel equivalence d={d}"),
            passed: worst <= 1e-9,
            detail: format!("{} channels, max |Δ| = {worst:.3e}", options.equivalence_channels),
        });
    }

    for d in [2usize, 3, 4] {
        let mubs = MubFamily::fourier_pair(d)?;
        for (name, ch) in [("identity", KrausChannel::identity(d)), ("depolarizing", KrausChannel::depolarizing(d))] {
            let a = crate::witness::ft_bavaresco_value(&channel_correlations(&ch, &mubs)?)?;
            let b = state_side_ft_value(&choi_of(&ch)?, &mubs)?;
            checks.push(OracleCheck {
                name: format!("{name} channel equivalence d={d}"),
                passed: (a - b).abs() <= 1e-9,
                detail: format!("channel {a:.12}, state {b:.12}"),
            });
        }
    }

    for d in 2..=6usize {
        let mut total = 0;
        for k in 1..=d {
            total += soundness_violations(d, k, options.soundness_dressings, &mut rng.fork(100 + (d * 10 + k) as u64))?;
        }
        checks.push(OracleCheck {
            name: format!("soundness d={d}"),
            passed: total == 0,
            detail: format!("{} dressings per k, {total} violations", options.soundness_dressings),
        });
    }

    for d in [2usize, 3] {
        let mubs = MubFamily::fourier_pair(d)?;
        let mut worst_gap = f64::NEG_INFINITY;
        for k in 1..=d {
            let mut r = rng.fork(1000 + (d * 10 + k) as u64);
            for t in 0..options.pt_channels {
                let base = known_sn_channel(d, k)?;
                let ch = if t == 0 { base } else { noise_dressing(&base, &mut r)? };
                let value = pt_measurement_search(&ch, &mubs, options.pt_starts, &mut r)?;
                let bound = WitnessKind::PtSteering.bound(d, k);
                worst_gap = worst_gap.max(value - bound);
                if violates(value, bound) {
                    checks.push(OracleCheck {
                        name: format!("pt measurement search d={d}"),
                        passed: false,
                        detail: format!("k={k}: value {value:.9} exceeds bound {bound:.9}"),
                    });
                }
            }
        }
        if !checks.iter().any(|c| c.name == format!("pt measurement search d={d}")) {
            checks.push(OracleCheck {
                name: format!("pt measurement search d={d}"),
                passed: true,
                detail: format!("max value - B(k) = {worst_gap:.3e}"),
            });
        }
    }

    // Noisy unitary channel reproduces the white-noise tensor.
    let d = 5;
    let mubs = MubFamily::prime_family(d, d + 1)?;
    let u = ComplexMatrix::identity(d);
    let p = 0.37;
    let noisy = KrausChannel::unitary(u)?.mixed(p, &KrausChannel::depolarizing(d))?;
    let c = channel_correlations(&noisy, &mubs)?;
    let expected = mix(&CorrelationTensor::perfect(d, d + 1), p);
    let gap = c.values().iter().zip(expected.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(OracleCheck {
        name: "noisy channel matches white-noise model".into(),
        passed: gap <= 1e-12,
        detail: format!("max |Δ| = {gap:.3e}"),
    });

    Ok(checks)
}

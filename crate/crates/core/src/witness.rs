//! Schmidt-number witnesses on MUB correlation tensors.
//!
//! Each witness is an inequality `lhs <= B(n)` satisfied by every channel of
//! Schmidt number at most `n`; a strict violation certifies `SN > n`.
//!
//! | kind           | lhs                                               | B(n)                     |
//! |----------------|---------------------------------------------------|--------------------------|
//! | `FtBavaresco`  | `Σ_a C_aa|0 + d Σ_a C_aa|1 − Σ γ √(C_a'b'|0 C_ab|0)` | `d(n + 1)`               |
//! | `PtSteering`   | `Σ_{x<2} Σ_a C_aa|x`                               | `2√n(d + √d)/(√n + 1)`   |
//! | `FtMorelli(m)` | `Σ_{x<m} Σ_a C_aa|x`                               | `d + (m − 1)n`           |
//!
//! `γ = 1` when `a ≠ a'`, `a ≠ b`, `b ≠ b'`, `b' ≠ a'` and
//! `a − a' − b + b' ≡ 0 (mod d)`, otherwise 0.

use std::fmt;

use serde::Serialize;

use crate::correlations::CorrelationTensor;
use crate::error::{Error, Result};
use crate::tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WitnessKind {
    /// Fully trusted, two bases.
    FtBavaresco,
    /// Partially trusted (steering), two bases.
    PtSteering,
    /// Fully trusted, `m >= 2` bases.
    FtMorelli(usize),
}

impl WitnessKind {
    pub fn name(&self) -> &'static str {
        match self {
            WitnessKind::FtBavaresco => "ft_bavaresco",
            WitnessKind::PtSteering => "pt_steering",
            WitnessKind::FtMorelli(_) => "ft_morelli",
        }
    }

    /// Number of bases the witness consumes.
    pub fn num_bases(&self) -> usize {
        match self {
            WitnessKind::FtBavaresco | WitnessKind::PtSteering => 2,
            WitnessKind::FtMorelli(m) => *m,
        }
    }

    /// `B(n)` in dimension `d`.
    pub fn bound(&self, d: usize, n: usize) -> f64 {
        let (d, n) = (d as f64, n as f64);
        match self {
            WitnessKind::FtBavaresco => d * (n + 1.0),
            WitnessKind::PtSteering => 2.0 * n.sqrt() * (d + d.sqrt()) / (n.sqrt() + 1.0),
            WitnessKind::FtMorelli(m) => d + (*m as f64 - 1.0) * n,
        }
    }

    /// Witness value on a tensor.
    pub fn value(&self, c: &CorrelationTensor) -> Result<f64> {
        match self {
            WitnessKind::FtBavaresco => ft_bavaresco_value(c),
            WitnessKind::PtSteering => pt_steering_value(c),
            WitnessKind::FtMorelli(m) => ft_morelli_value(c, *m),
        }
    }
}

impl fmt::Display for WitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for WitnessKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// `Σ γ √(C_{a',b'|0} C_{a,b|0})`, grouped by the offset `s = a − b (mod d)`.
///
/// The constraint forces `a' − b' ≡ a − b`, so with `S_ab = √C_ab|0` the sum
/// is `Σ_{s≠0} [(Σ_a S_{a,a−s})^2 − Σ_a S_{a,a−s}^2]`, which is `O(d^2)`.
pub fn bavaresco_gamma_sum(c: &CorrelationTensor) -> f64 {
    let d = c.dim();
    let mut total = 0.0;
    for s in 1..d {
        let mut linear = 0.0;
        let mut square = 0.0;
        for a in 0..d {
            let v = c.get(0, a, (a + d - s) % d);
            linear += v.sqrt();
            square += v;
        }
        total += linear * linear - square;
    }
    total
}

/// Literal `O(d^4)` evaluation of the γ-sum; reference for tests.
pub fn bavaresco_gamma_sum_naive(c: &CorrelationTensor) -> f64 {
    let d = c.dim();
    let mut total = 0.0;
    for_each_gamma_index(d, |a, a2, b, b2| {
        total += (c.get(0, a2, b2) * c.get(0, a, b)).sqrt();
    });
    total
}

/// Calls `f(a, a', b, b')` for every index tuple with `γ = 1`.
pub fn for_each_gamma_index(d: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
    for a in 0..d {
        for a2 in 0..d {
            for b in 0..d {
                for b2 in 0..d {
                    if a != a2 && a != b && b != b2 && b2 != a2 && (a + b2 + 2 * d - a2 - b) % d == 0 {
                        f(a, a2, b, b2);
                    }
                }
            }
        }
    }
}

/// Number of index tuples with `γ = 1`: `d (d − 1)^2` (offset `s ≠ 0`,
/// then `a`, then `a' ≠ a`).
pub fn gamma_index_count(d: usize) -> usize {
    d * d.saturating_sub(1) * d.saturating_sub(1)
}

fn require_bases(c: &CorrelationTensor, m: usize, what: &str) -> Result<()> {
    if c.num_bases() < m {
        return Err(Error::invalid(format!("{what} needs {m} bases, tensor has {}", c.num_bases())));
    }
    Ok(())
}

pub fn ft_bavaresco_value(c: &CorrelationTensor) -> Result<f64> {
    require_bases(c, 2, "ft_bavaresco")?;
    let d = c.dim() as f64;
    Ok(c.diagonal_sum(0) + d * c.diagonal_sum(1) - bavaresco_gamma_sum(c))
}

pub fn pt_steering_value(c: &CorrelationTensor) -> Result<f64> {
    if c.num_bases() != 2 {
        return Err(Error::invalid(format!(
            "pt_steering is defined for exactly 2 bases, tensor has {}",
            c.num_bases()
        )));
    }
    Ok(c.diagonal_sum(0) + c.diagonal_sum(1))
}

pub fn ft_morelli_value(c: &CorrelationTensor, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::invalid(format!("ft_morelli needs m >= 2, got {m}")));
    }
    require_bases(c, m, "ft_morelli")?;
    Ok((0..m).map(|x| c.diagonal_sum(x)).sum())
}

/// Strict violation of `lhs <= bound`, with a relative margin so that
/// rounding at exact equality never certifies.
pub fn violates(lhs: f64, bound: f64) -> bool {
    lhs > bound + tolerances::VIOLATION_MARGIN * bound.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificationResult {
    pub kind: WitnessKind,
    pub dim: usize,
    pub num_bases: usize,
    pub lhs: f64,
    /// `B(n)` for `n = 1..=d`.
    pub bounds: Vec<f64>,
    pub certified_n: usize,
}

impl CertificationResult {
    pub fn bound_at(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.bounds.get(i)).copied()
    }
}

/// Lower bound on the Schmidt number: one more than the largest violated
/// `n` in `1..d`, or 1 if nothing is violated.
pub fn certify(c: &CorrelationTensor, kind: WitnessKind) -> Result<CertificationResult> {
    let tensor = match kind {
        WitnessKind::PtSteering if c.num_bases() > 2 => c.truncated(2)?,
        _ => c.clone(),
    };
    let lhs = kind.value(&tensor)?;
    let d = c.dim();
    let bounds: Vec<f64> = (1..=d).map(|n| kind.bound(d, n)).collect();
    let certified_n = (1..d).rev().find(|&n| violates(lhs, bounds[n - 1])).map_or(1, |n| n + 1);
    Ok(CertificationResult { kind, dim: d, num_bases: kind.num_bases(), lhs, bounds, certified_n })
}

/// Inverts `lhs > B(n)` analytically (same margin as [`violates`]).
pub fn closed_form_certified(kind: WitnessKind, d: usize, lhs: f64) -> usize {
    let eps = 1.0 + tolerances::VIOLATION_MARGIN;
    let df = d as f64;
    // violated iff n < threshold; the largest such integer plus one
    let threshold = match kind {
        WitnessKind::FtBavaresco => lhs / (eps * df) - 1.0,
        WitnessKind::FtMorelli(m) => (lhs / eps - df) / (m as f64 - 1.0),
        WitnessKind::PtSteering => {
            let r = lhs / (eps * 2.0 * (df + df.sqrt()));
            if r >= 1.0 {
                f64::INFINITY
            } else if r <= 0.0 {
                0.0
            } else {
                (r / (1.0 - r)).powi(2)
            }
        }
    };
    if threshold.is_infinite() {
        return d.max(1);
    }
    (threshold.ceil().max(1.0) as usize).clamp(1, d.max(1))
}

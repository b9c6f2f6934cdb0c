use std::cmp::Ordering;

use nalgebra::linalg::SVD;

use super::{ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::tolerances;

const MAX_SWEEPS: usize = 20_000;

/// Singular value decomposition `A = U diag(s) V^†`.
///
/// Conventions, applied after the raw decomposition:
/// * singular values sorted descending (up to the cluster tolerance, since
///   clusters are reordered by the rule below);
/// * every right singular vector is rotated so its largest-modulus entry is
///   real positive, and the matching left vector takes the same phase;
/// * inside a cluster of (numerically) equal singular values, columns are
///   ordered by the row of their dominant entry, then lexicographically.
///
/// Within a degenerate cluster the basis itself is not unique; anything
/// computed downstream must depend only on the spanned subspace.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    /// `U diag(s) V^†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.singular_values.len();
        let us = ComplexMatrix::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)] * self.singular_values[j]);
        &us * &self.v.adjoint()
    }
}

pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NumericFailure {
            op: "svd",
            rows: a.rows(),
            cols: a.cols(),
            detail: "input has non-finite entries".into(),
        });
    }
    let (u, s, v) = if a.is_square() && a.is_diagonal() { diagonal_svd(a) } else { general_svd(a)? };
    Ok(canonicalize(u, s, v))
}

/// Exact decomposition of a square diagonal matrix: `v = 1`, `u_j = phase(a_jj) e_j`.
fn diagonal_svd(a: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
    let n = a.rows();
    let diag = a.diagonal();
    let s: Vec<f64> = diag.iter().map(|z| z.norm()).collect();
    let u = ComplexMatrix::from_diagonal(
        &diag.iter().map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) }).collect::<Vec<_>>(),
    );
    (u, s, ComplexMatrix::identity(n))
}

fn general_svd(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    let (rows, cols) = (a.rows(), a.cols());
    if rows == 0 || cols == 0 {
        return Ok((ComplexMatrix::zeros(rows, 0), Vec::new(), ComplexMatrix::zeros(cols, 0)));
    }
    let dec = SVD::try_new_unordered(a.inner().clone(), true, true, f64::EPSILON, MAX_SWEEPS).ok_or_else(|| {
        Error::NumericFailure { op: "svd", rows, cols, detail: format!("no convergence within {MAX_SWEEPS} sweeps") }
    })?;
    let (Some(u), Some(v_t)) = (dec.u, dec.v_t) else {
        unreachable!("singular vectors were requested");
    };
    Ok((
        ComplexMatrix::from_inner(u),
        dec.singular_values.iter().copied().collect(),
        ComplexMatrix::from_inner(v_t.adjoint()),
    ))
}

fn dominant_row(col: &[C64]) -> usize {
    let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // First row within rounding of the maximum, so near-ties resolve by index.
    col.iter().position(|z| z.norm() >= max - 1e-12 * max.max(1.0)).unwrap_or(0)
}

fn lexicographic(a: &[C64], b: &[C64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.re.total_cmp(&y.re).reverse().then(x.im.total_cmp(&y.im).reverse());
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

fn canonicalize(u: ComplexMatrix, s: Vec<f64>, v: ComplexMatrix) -> Svd {
    let k = s.len();
    let mut us: Vec<Vec<C64>> = (0..k).map(|j| u.column(j)).collect();
    let mut vs: Vec<Vec<C64>> = (0..k).map(|j| v.column(j)).collect();

    for j in 0..k {
        let r = dominant_row(&vs[j]);
        let z = vs[j][r];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            vs[j].iter_mut().for_each(|e| *e *= phase);
            us[j].iter_mut().for_each(|e| *e *= phase);
        }
    }

    // Descending values; ties broken by the cluster rule below.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));

    let scale = s.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && (s[order[end - 1]] - s[order[end]]) <= tolerances::SINGULAR_VALUE_CLUSTER * scale {
            end += 1;
        }
        order[start..end].sort_by(|&i, &j| {
            dominant_row(&vs[i]).cmp(&dominant_row(&vs[j])).then_with(|| lexicographic(&vs[i], &vs[j]))
        });
        start = end;
    }

    let rows_u = u.rows();
    let rows_v = v.rows();
    Svd {
        u: ComplexMatrix::from_fn(rows_u, k, |i, j| us[order[j]][i]),
        singular_values: order.iter().map(|&j| s[j]).collect(),
        v: ComplexMatrix::from_fn(rows_v, k, |i, j| vs[order[j]][i]),
    }
}

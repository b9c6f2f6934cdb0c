//! Numerical tolerances shared by every module.
//!
//! None of these come from the physics; they bound floating-point error in
//! f64 arithmetic on matrices of dimension up to a few hundred.

/// Unitarity of constructed or decomposed matrices, `max |U^†U - 1|`.
pub const UNITARITY: f64 = 1e-10;

/// Relative SVD reconstruction error, `max |A - U S V^†| / max |A|`.
pub const SVD_RECONSTRUCTION: f64 = 1e-8;

/// Relative gap below which two singular values belong to one cluster.
pub const SINGULAR_VALUE_CLUSTER: f64 = 1e-9;

/// Deviation of `|<phi|psi>|^2` from `1/d` across mutually unbiased bases.
pub const UNBIASEDNESS: f64 = 1e-9;

/// Column normalization of correlation tensors.
pub const COLUMN_NORMALIZATION: f64 = 1e-9;

/// Normalization of spectral weights.
pub const WEIGHT_SUM: f64 = 1e-12;

/// Trace preservation `max |sum K^†K - 1|` of Kraus channels, and the
/// Hermiticity/trace/positivity checks of Choi states.
pub const TRACE_PRESERVATION: f64 = 1e-10;

/// Relative margin a witness value must exceed its bound by to count as a
/// violation. Exact ties (and ties up to rounding) certify nothing.
pub const VIOLATION_MARGIN: f64 = 1e-9;

/// Absolute threshold under which matrix entries are treated as zero
/// (diagonality tests, dominant-entry selection).
pub const ZERO: f64 = 1e-14;

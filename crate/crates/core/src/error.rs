use thiserror::Error;

/// Errors produced by the certification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },

    #[error("unsupported dimension {dim}: {constraint}")]
    UnsupportedDimension { dim: usize, constraint: &'static str },

    #[error("numeric failure in {op} on a {rows}x{cols} matrix: {detail}")]
    NumericFailure { op: &'static str, rows: usize, cols: usize, detail: String },

    #[error("mode ({m}, {n}) is not guided at wavelength {wavelength_m:e} m")]
    UnguidedMode { m: u32, n: u32, wavelength_m: f64 },

    #[error("optimization failed after {iterations} iterations (last residual {residual:e})")]
    OptimizationFailure { iterations: usize, residual: f64 },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NumericFailure { .. } | Error::OptimizationFailure { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

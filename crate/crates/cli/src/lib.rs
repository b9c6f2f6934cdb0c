//! Configuration-driven sweeps over subspace dimension and MUB count, with
//! CSV, manifest and SVG outputs.

pub mod config;
pub mod plots;
pub mod sweep;

pub use config::{MubCount, RunConfig, WitnessName};
pub use plots::emit_plots;
pub use sweep::{run_sweep, SweepOptions, SweepRow};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Core(#[from] chancert_core::Error),

    #[error("plot error: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Core(e) if e.is_numeric() => exit::NUMERIC,
            CliError::Core(chancert_core::Error::Parse(_)) | CliError::InvalidArgument(_) => exit::CONFIG,
            _ => exit::FAILURE,
        }
    }
}

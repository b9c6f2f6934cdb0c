//! Certification of channel dimensionality (Schmidt number) from
//! mutually-unbiased-basis correlation measurements on multi-mode fibers.
//!
//! Pipeline: [`fiber`] builds a multi-spectral transmission matrix,
//! [`tm_estimation`] reduces it to a single approximate matrix,
//! [`correlations`] computes measurement statistics in MUBs, and
//! [`witness`] turns those into a lower bound on the Schmidt number.
//! [`choi_oracle`] checks the witnesses against explicit channels.

pub mod choi_oracle;
pub mod correlations;
pub mod error;
pub mod fiber;
pub mod mub;
pub mod numerics;
pub mod tm_estimation;
pub mod tolerances;
pub mod witness;

pub use choi_oracle::{choi_of, known_sn_channel, ChoiState, KrausChannel};
pub use correlations::{apply_noise, CorrelationTensor, NoiseModel};
pub use error::{Error, Result};
pub use fiber::{build_mstm, FiberSpec, MatrixStack, ModeIndex, Mstm};
pub use mub::{MubConstruction, MubDescriptor, MubFamily};
pub use numerics::{svd, ComplexMatrix, Rng, Svd, C64};
pub use tm_estimation::{ApproxTm, TmMethod};
pub use witness::{certify, CertificationResult, WitnessKind};

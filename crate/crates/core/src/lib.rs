//! Simulation and reconstruction pipeline for three-qubit W-state tomography.
//!
//! The crate covers state preparation, the 17-setting three-qubit and
//! 7-setting two-qubit measurement schemes, readout-error simulation and
//! mitigation, spectral positivity correction, reconstruction of a pure
//! three-qubit state from two of its two-qubit marginals, and fidelity
//! reporting.
//!
//! All numerical modules are generic over [`Real`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the pipeline and the
//! file formats use.

pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod metrics;
pub mod mitigation;
pub mod noisesim;
pub mod pipeline;
pub mod qstate;
pub mod scalar;
pub mod tomography;
pub mod wholeparts;

pub use error::{Error, Result};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;

pub type ComplexMatrix = linalg::ComplexMatrix<f64>;
pub type ComplexVector = linalg::ComplexVector<f64>;
pub type EigenSystem = linalg::EigenSystem<f64>;
pub type DensityMatrix = qstate::DensityMatrix<f64>;
pub type Gate = qstate::Gate<f64>;
pub type MeasurementSetting = qstate::MeasurementSetting<f64>;
pub type ProbTable = noisesim::ProbTable<f64>;
pub type CalibrationMatrix = mitigation::CalibrationMatrix<f64>;
pub type TomographyScheme = tomography::TomographyScheme<f64>;
pub type ExtractionRule = tomography::ExtractionRule<f64>;
pub type MarginalPair = wholeparts::MarginalPair<f64>;
pub type ReconstructionResult = wholeparts::ReconstructionResult<f64>;

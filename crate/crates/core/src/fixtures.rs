//! Bundled measured matrices and the regression run against them.
//!
//! The files hold a pair of measured two-qubit marginals, the three-qubit
//! matrix from full tomography of the same run, and the three-qubit matrix
//! reconstructed from the marginals, all as printed (two decimals).

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::qstate::w_state;
use crate::tomography::matrix_from_json;
use crate::wholeparts::{diosi_reconstruct, MarginalPair, ReconstructionResult};

const MEASURED_AB: &str = include_str!("../fixtures/measured_rho_ab.json");
const MEASURED_BC: &str = include_str!("../fixtures/measured_rho_bc.json");
const FULL_TOMOGRAPHY: &str = include_str!("../fixtures/full_tomography_rho.json");
const PARTS_RECONSTRUCTION: &str = include_str!("../fixtures/parts_reconstruction_rho.json");

/// Entrywise tolerance against the printed reconstruction (print precision).
pub const ENTRY_TOLERANCE: f64 = 0.02;
pub const FIDELITY_TARGET: f64 = 0.995;
pub const FIDELITY_TOLERANCE: f64 = 0.01;

fn load(text: &str) -> Result<ComplexMatrix<f64>> {
    let v: Value = serde_json::from_str(text)?;
    matrix_from_json(&v)
}

/// Measured `(rho_AB, rho_BC)` as printed; traces are 0.98.
pub fn measured_marginals() -> Result<(ComplexMatrix<f64>, ComplexMatrix<f64>)> {
    Ok((load(MEASURED_AB)?, load(MEASURED_BC)?))
}

/// Full-tomography matrix as printed. Not Hermitian and not unit trace.
pub fn full_tomography_matrix() -> Result<ComplexMatrix<f64>> {
    load(FULL_TOMOGRAPHY)
}

/// Printed whole-from-parts matrix.
pub fn parts_reconstruction_matrix() -> Result<ComplexMatrix<f64>> {
    load(PARTS_RECONSTRUCTION)
}

/// `sqrt(max(0, Re <psi|m|psi>))` for a matrix that need not be a state.
pub fn raw_fidelity(psi: &ComplexVector<f64>, m: &ComplexMatrix<f64>) -> Result<f64> {
    let v = psi.inner(&m.apply(psi)?).re;
    Ok(v.max(0.0).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureReport {
    #[serde(skip)]
    pub reconstruction: ReconstructionResult<f64>,
    /// Max entry of `| |psi><psi| - printed |`.
    pub max_entry_deviation: f64,
    /// Same against the complex conjugate of the printed matrix.
    pub max_entry_deviation_conjugate: f64,
    /// `|<W|psi>|` of the reconstruction.
    pub fidelity_reconstructed: f64,
    /// `sqrt(<W|m|W>)` of the printed reconstruction.
    pub fidelity_printed_parts: f64,
    /// `sqrt(Re <W|m|W>)` of the printed full-tomography matrix.
    pub fidelity_printed_full: f64,
    /// As above with the `rho_{001;001}` entry read as 0.31 instead of 0.031.
    pub fidelity_printed_full_diag_0_31: f64,
    pub residual_ab: f64,
    pub residual_bc: f64,
    pub truncated_mass_ab: f64,
    pub truncated_mass_bc: f64,
    pub entries_ok: bool,
    pub fidelity_ok: bool,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.entries_ok && self.fidelity_ok
    }
}

/// Reconstructs from the measured marginals and compares with the printed
/// matrices.
pub fn run_fixtures() -> Result<FixtureReport> {
    let (ab, bc) = measured_marginals()?;
    let pair = MarginalPair::experimental(&ab, &bc)?;
    let rec = diosi_reconstruct(&pair)?;
    let rho = rec.density();
    let printed = parts_reconstruction_matrix()?;
    let dev = rho.matrix().max_abs_diff(&printed).expect("8x8");
    let dev_conj = rho.matrix().max_abs_diff(&printed.conj()).expect("8x8");
    let w = w_state::<f64>();
    let f_rec = rec.psi.inner(&w).norm();
    let full = full_tomography_matrix()?;
    let mut full_fixed = full.clone();
    full_fixed[(1, 1)].re = 0.31;
    Ok(FixtureReport {
        max_entry_deviation: dev,
        max_entry_deviation_conjugate: dev_conj,
        fidelity_reconstructed: f_rec,
        fidelity_printed_parts: raw_fidelity(&w, &printed)?,
        fidelity_printed_full: raw_fidelity(&w, &full)?,
        fidelity_printed_full_diag_0_31: raw_fidelity(&w, &full_fixed)?,
        residual_ab: rec.residual_ab,
        residual_bc: rec.residual_bc,
        truncated_mass_ab: rec.truncated_mass_ab,
        truncated_mass_bc: rec.truncated_mass_bc,
        entries_ok: dev <= ENTRY_TOLERANCE,
        fidelity_ok: (f_rec - FIDELITY_TARGET).abs() <= FIDELITY_TOLERANCE,
        reconstruction: rec,
    })
}

//! Fidelity against a pure target, trace distance, and the per-trial report
//! tables.
//!
//! Fidelity uses the square-root convention `F = sqrt(<psi|rho|psi>)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, ComplexVector};
use crate::qstate::DensityMatrix;
use crate::scalar::Real;

/// `sqrt(<psi|rho|psi>)`, clamped into `[0, 1]`.
pub fn fidelity_pure<T: Real>(psi: &ComplexVector<T>, rho: &DensityMatrix<T>) -> Result<T> {
    if psi.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            op: "fidelity_pure",
            left: (psi.dim(), 1),
            right: (rho.dim(), rho.dim()),
        });
    }
    let n = psi.norm();
    if (n - T::one()).abs() > T::tol(1e-8) {
        return Err(Error::NotNormalized { norm: n.as_f64() });
    }
    let ev = psi.inner(&rho.matrix().apply(psi)?).re;
    Ok(ev.max(T::zero()).sqrt().min(T::one()))
}

/// `(1/2) sum |eig(a - b)|`.
pub fn trace_distance<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            op: "trace_distance",
            left: (a.dim(), a.dim()),
            right: (b.dim(), b.dim()),
        });
    }
    let diff = a.matrix() - b.matrix();
    let es = eig_hermitian(&diff)?;
    Ok(es.values.iter().map(|l| l.abs()).sum::<T>() / T::lit(2.0))
}

/// One trial under one mitigation choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub trial: usize,
    /// Shots per circuit; `None` for exact probabilities.
    pub shots: Option<u64>,
    pub mitigated: bool,
    /// Full three-qubit tomography against `|W>`.
    pub f_full: Option<f64>,
    /// Whole-from-parts reconstruction against `|W>`.
    pub f_parts: Option<f64>,
    pub residual_ab: Option<f64>,
    pub residual_bc: Option<f64>,
}

#[derive(Serialize)]
struct LongRow {
    trial: usize,
    shots: Option<u64>,
    mitigated: bool,
    f_full: Option<f64>,
    f_parts: Option<f64>,
}

/// Columns `trial,shots,mitigated,f_full,f_parts`.
pub fn write_long_csv<W: Write>(out: W, reports: &[FidelityReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(LongRow {
            trial: r.trial,
            shots: r.shots,
            mitigated: r.mitigated,
            f_full: r.f_full,
            f_parts: r.f_parts,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the unmitigated/mitigated comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub trial: usize,
    pub shots: Option<u64>,
    pub f_full_unmitigated: Option<f64>,
    pub f_full_mitigated: Option<f64>,
    pub f_parts_unmitigated: Option<f64>,
    pub f_parts_mitigated: Option<f64>,
}

/// Pairs the unmitigated and mitigated reports of each trial, ordered by trial.
pub fn table_rows(reports: &[FidelityReport]) -> Vec<TableRow> {
    let mut trials: Vec<usize> = reports.iter().map(|r| r.trial).collect();
    trials.sort_unstable();
    trials.dedup();
    trials
        .into_iter()
        .map(|t| {
            let pick = |m: bool| reports.iter().find(|r| r.trial == t && r.mitigated == m);
            let (u, m) = (pick(false), pick(true));
            TableRow {
                trial: t,
                shots: u.or(m).and_then(|r| r.shots),
                f_full_unmitigated: u.and_then(|r| r.f_full),
                f_full_mitigated: m.and_then(|r| r.f_full),
                f_parts_unmitigated: u.and_then(|r| r.f_parts),
                f_parts_mitigated: m.and_then(|r| r.f_parts),
            }
        })
        .collect()
}

/// Columns `trial,shots,f_full_unmitigated,f_full_mitigated,f_parts_unmitigated,f_parts_mitigated`;
/// missing values are left blank.
pub fn write_table_csv<W: Write>(out: W, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

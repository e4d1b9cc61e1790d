//! Readout-error mitigation by inverse calibration matrices, and spectral
//! positivity correction.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::linalg::weighted_projectors;
use crate::noisesim::{apply_per_qubit, ProbTable};
use crate::qstate::DensityMatrix;
use crate::scalar::Real;

/// Column-stochastic single-qubit readout matrix
/// `[[p(0|0), p(0|1)], [p(1|0), p(1|1)]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationMatrix<T> {
    m: [[T; 2]; 2],
}

impl<T: Real> CalibrationMatrix<T> {
    pub fn identity() -> Self {
        Self::from_error_rates(T::zero(), T::zero())
    }

    /// `p01 = p(0|1)`, `p10 = p(1|0)`.
    pub fn from_error_rates(p01: T, p10: T) -> Self {
        Self {
            m: [[T::one() - p10, p01], [p10, T::one() - p01]],
        }
    }

    /// Columns are the reading distributions given `|0>` and `|1>`.
    pub fn from_columns(given_zero: [T; 2], given_one: [T; 2]) -> Self {
        Self {
            m: [[given_zero[0], given_one[0]], [given_zero[1], given_one[1]]],
        }
    }

    pub fn from_entries(m: [[T; 2]; 2]) -> Result<Self> {
        if m.iter()
            .flatten()
            .any(|x| !x.is_finite() || *x < T::zero() || *x > T::one())
        {
            return Err(Error::InvalidDistribution(
                "calibration entries must lie in [0, 1]".into(),
            ));
        }
        for col in 0..2 {
            let s = m[0][col] + m[1][col];
            if (s - T::one()).abs() > T::tol(1e-9) {
                return Err(Error::InvalidDistribution(format!(
                    "calibration column {col} sums to {s}"
                )));
            }
        }
        Ok(Self { m })
    }

    pub fn entries(&self) -> [[T; 2]; 2] {
        self.m
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self, qubit: usize) -> Result<[[T; 2]; 2]> {
        let det = self.det();
        if det.abs() <= T::lit(1e-6) {
            return Err(Error::SingularCalibration {
                qubit,
                det: det.as_f64(),
            });
        }
        let m = self.m;
        Ok([
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ])
    }
}

/// `p' = (F_A (x) F_B (x) ...)^{-1} p`, applied as the Kronecker product of
/// the individual inverses. Negative entries are passed through.
pub fn mitigate_probs<T: Real>(
    p: &ProbTable<T>,
    fs: &[CalibrationMatrix<T>],
) -> Result<ProbTable<T>> {
    if fs.len() != p.nqubits {
        return Err(Error::ReadoutModelSize {
            model: fs.len(),
            needed: p.nqubits,
        });
    }
    let inverses = fs
        .iter()
        .enumerate()
        .map(|(q, f)| f.inverse(q))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbTable {
        setting_label: p.setting_label.clone(),
        nqubits: p.nqubits,
        probs: apply_per_qubit(&p.probs, &inverses),
    })
}

/// Clamps negative eigenvalues to zero, rescales the rest to unit sum, and
/// rebuilds the matrix from the original eigenvectors.
pub fn spectral_correct<T: Real>(rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    let es = rho.eigen()?;
    let clamped: Vec<T> = es.values.iter().map(|&l| l.max(T::zero())).collect();
    let total: T = clamped.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::NoPositiveEigenvalues);
    }
    let weights: Vec<T> = clamped.iter().map(|&l| l / total).collect();
    let rebuilt = weighted_projectors(&weights, &es.vectors).hermitian_part();
    let tr = rebuilt.trace().re;
    DensityMatrix::new(rebuilt.scale(T::one() / tr))
}

/// `{label: [[f00, f01], [f10, f11]]}`.
pub fn calibration_to_json(labels: &[String], fs: &[CalibrationMatrix<f64>]) -> Value {
    let mut m = Map::new();
    for (label, f) in labels.iter().zip(fs) {
        let e = f.entries();
        m.insert(
            label.clone(),
            json!([[e[0][0], e[0][1]], [e[1][0], e[1][1]]]),
        );
    }
    Value::Object(m)
}

pub fn calibration_from_json(v: &Value) -> Result<(Vec<String>, Vec<CalibrationMatrix<f64>>)> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Format("calibration file must be an object".into()))?;
    let mut labels = Vec::new();
    let mut fs = Vec::new();
    for (label, entry) in obj {
        let m: [[f64; 2]; 2] = serde_json::from_value(entry.clone())?;
        labels.push(label.clone());
        fs.push(CalibrationMatrix::from_entries(m)?);
    }
    Ok((labels, fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;
    use crate::noisesim::{apply_readout_noise, ReadoutModel};

    #[test]
    fn identity_mitigation_is_noop() {
        let p = ProbTable::new("ZZ", vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let out = mitigate_probs(&p, &[CalibrationMatrix::identity(); 2]).unwrap();
        assert_eq!(out.probs, p.probs);
    }

    #[test]
    fn q97_round_trip() {
        let f = CalibrationMatrix::<f64>::from_entries([[0.977, 0.023], [0.023, 0.977]]).unwrap();
        let p = ProbTable::new("Z", vec![0.8, 0.2]).unwrap();
        let noisy = ProbTable {
            probs: apply_per_qubit(&p.probs, &[f.entries()]),
            ..p.clone()
        };
        let back = mitigate_probs(&noisy, &[f]).unwrap();
        for (a, b) in back.probs.iter().zip(&p.probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_preserves_column_sums() {
        // 1^T F^{-1} = 1^T holds because 1^T F = 1^T.
        for model in [ReadoutModel::osaka_table()] {
            for f in model.calibration_matrices::<f64>() {
                let inv = f.inverse(0).unwrap();
                for col in 0..2 {
                    assert!((inv[0][col] + inv[1][col] - 1.0).abs() < 1e-15);
                }
            }
        }
        let p = ProbTable::<f64>::new("ZZZ", vec![0.05, 0.3, 0.3, 0.02, 0.3, 0.01, 0.01, 0.01])
            .unwrap();
        let noisy = apply_readout_noise(&p, &ReadoutModel::osaka_table()).unwrap();
        let fs = ReadoutModel::osaka_table().calibration_matrices();
        let out = mitigate_probs(&noisy, &fs).unwrap();
        assert!((out.total() - 1.0).abs() < 1e-15);
        for (a, b) in out.probs.iter().zip(&p.probs) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_calibration_rejected() {
        let f = CalibrationMatrix::from_error_rates(0.5, 0.5);
        let p = ProbTable::new("Z", vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            mitigate_probs(&p, &[f]),
            Err(Error::SingularCalibration { qubit: 0, .. })
        ));
    }

    #[test]
    fn calibration_entry_validation() {
        assert!(CalibrationMatrix::from_entries([[0.9, 0.2], [0.2, 0.8]]).is_err());
        assert!(CalibrationMatrix::from_entries([[1.1, 0.0], [-0.1, 1.0]]).is_err());
    }

    #[test]
    fn spectral_correct_clamps_and_renormalizes() {
        // Hand-applied: clamp -0.1 to 0, divide 0.6 and 0.5 by 1.1.
        let rho =
            DensityMatrix::new(ComplexMatrix::<f64>::from_diag(&[0.6, 0.5, -0.1, 0.0])).unwrap();
        let out = spectral_correct(&rho).unwrap();
        let want = ComplexMatrix::from_diag(&[6.0 / 11.0, 5.0 / 11.0, 0.0, 0.0]);
        assert!(out.matrix().max_abs_diff(&want).unwrap() < 1e-12);
        assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_correct_keeps_psd_input() {
        let m = ComplexMatrix::from_parts(
            &[vec![0.7, 0.1], vec![0.1, 0.3]],
            &[vec![0.0, 0.2], vec![-0.2, 0.0]],
        )
        .unwrap();
        let rho = DensityMatrix::new(m).unwrap();
        let out = spectral_correct(&rho).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()).unwrap() < 1e-10);
    }

    #[test]
    fn calibration_json_round_trip() {
        let labels = vec!["q97".to_string(), "q98".to_string()];
        let fs = ReadoutModel::osaka_table().calibration_matrices::<f64>()[..2].to_vec();
        let v = calibration_to_json(&labels, &fs);
        assert_eq!(v["q97"][0][1], json!(0.023));
        let (l2, f2) = calibration_from_json(&v).unwrap();
        assert_eq!(l2, labels);
        assert_eq!(f2, fs);
    }
}

//! Outcome probabilities, readout confusion, and finite-shot sampling.
//!
//! Outcome index `m` uses the same ordering as the density-matrix basis: the
//! bit of qubit `q` is `(m >> (n - 1 - q)) & 1`, so the leftmost character of
//! a bitstring is qubit A.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::mitigation::CalibrationMatrix;
use crate::qstate::{setting_unitary, DensityMatrix, MeasurementSetting};
use crate::scalar::Real;

/// Name of the generator behind every sampled quantity.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent stream `index` of this seed: `seed ^ (index << 32)`.
    pub fn stream(self, index: u64) -> RngSeed {
        RngSeed(self.0 ^ (index << 32))
    }

    fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable<T> {
    pub setting_label: String,
    pub nqubits: usize,
    pub probs: Vec<T>,
}

impl<T: Real> ProbTable<T> {
    pub fn new(setting_label: impl Into<String>, probs: Vec<T>) -> Result<Self> {
        let d = probs.len();
        if d == 0 || !d.is_power_of_two() {
            return Err(Error::InvalidDistribution(format!(
                "length {d} is not a power of two"
            )));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite entry".into()));
        }
        Ok(Self {
            setting_label: setting_label.into(),
            nqubits: d.trailing_zeros() as usize,
            probs,
        })
    }

    pub fn total(&self) -> T {
        self.probs.iter().copied().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    pub setting_label: String,
    pub nqubits: usize,
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl CountsTable {
    pub fn new(setting_label: impl Into<String>, counts: Vec<u64>) -> Result<Self> {
        let d = counts.len();
        if d == 0 || !d.is_power_of_two() {
            return Err(Error::InvalidDistribution(format!(
                "length {d} is not a power of two"
            )));
        }
        let shots = counts.iter().sum();
        if shots == 0 {
            return Err(Error::InvalidShots);
        }
        Ok(Self {
            setting_label: setting_label.into(),
            nqubits: d.trailing_zeros() as usize,
            counts,
            shots,
        })
    }

    /// Relative frequencies.
    pub fn to_probs<T: Real>(&self) -> ProbTable<T> {
        let n = T::lit(self.shots as f64);
        ProbTable {
            setting_label: self.setting_label.clone(),
            nqubits: self.nqubits,
            probs: self.counts.iter().map(|&c| T::lit(c as f64) / n).collect(),
        }
    }
}

/// Readout confusion of one physical qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitReadout {
    #[serde(skip)]
    pub label: String,
    /// Probability of reading 0 when the qubit is in `|1>`.
    pub p01: f64,
    /// Probability of reading 1 when the qubit is in `|0>`.
    pub p10: f64,
}

/// Per-qubit readout confusion, ordered A, B, C.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    pub qubits: Vec<QubitReadout>,
}

impl ReadoutModel {
    pub fn new(qubits: Vec<QubitReadout>) -> Result<Self> {
        for q in &qubits {
            for p in [q.p01, q.p10] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidDistribution(format!(
                        "readout error {p} of {} outside [0, 1]",
                        q.label
                    )));
                }
            }
        }
        Ok(Self { qubits })
    }

    /// Calibration values of q97, q98, q99 on ibm_osaka.
    pub fn osaka_table() -> Self {
        let q = |label: &str, p01, p10| QubitReadout {
            label: label.into(),
            p01,
            p10,
        };
        Self {
            qubits: vec![
                q("q97", 0.023, 0.008),
                q("q98", 0.004, 0.009),
                q("q99", 0.030, 0.034),
            ],
        }
    }

    pub fn noiseless(nqubits: usize) -> Self {
        Self {
            qubits: (0..nqubits)
                .map(|i| QubitReadout {
                    label: ["A", "B", "C", "D"].get(i).unwrap_or(&"Q").to_string(),
                    p01: 0.0,
                    p10: 0.0,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    /// Sub-model for the given qubit positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let qubits = positions
            .iter()
            .map(|&p| {
                self.qubits.get(p).cloned().ok_or(Error::InvalidQubit {
                    index: p,
                    nqubits: self.qubits.len(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { qubits })
    }

    pub fn calibration_matrices<T: Real>(&self) -> Vec<CalibrationMatrix<T>> {
        self.qubits
            .iter()
            .map(|q| CalibrationMatrix::from_error_rates(T::lit(q.p01), T::lit(q.p10)))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for q in &self.qubits {
            m.insert(q.label.clone(), json!({ "p01": q.p01, "p10": q.p10 }));
        }
        Value::Object(m)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Format("noise model must be an object".into()))?;
        let qubits = obj
            .iter()
            .map(|(label, entry)| {
                let mut q: QubitReadout = serde_json::from_value(entry.clone())?;
                q.label = label.clone();
                Ok(q)
            })
            .collect::<Result<_>>()?;
        Self::new(qubits)
    }
}

/// `p[m] = <m| U rho U^dagger |m>` for the setting's unitary `U`.
pub fn exact_probs<T: Real>(
    rho: &DensityMatrix<T>,
    setting: &MeasurementSetting<T>,
) -> Result<ProbTable<T>> {
    if rho.nqubits() != setting.nqubits {
        return Err(Error::DimensionMismatch {
            op: "exact_probs",
            left: (rho.dim(), rho.dim()),
            right: (1 << setting.nqubits, 1 << setting.nqubits),
        });
    }
    let u = setting_unitary(setting)?;
    let rotated = rho.conjugate_by(&u)?;
    Ok(ProbTable {
        setting_label: setting.label.clone(),
        nqubits: setting.nqubits,
        probs: rotated.diagonal().iter().map(|z| z.re).collect(),
    })
}

/// Applies one 2x2 matrix per qubit to a probability vector, i.e. multiplies
/// by their Kronecker product without forming it.
pub(crate) fn apply_per_qubit<T: Real>(probs: &[T], mats: &[[[T; 2]; 2]]) -> Vec<T> {
    let n = mats.len();
    let mut v = probs.to_vec();
    for (q, m) in mats.iter().enumerate() {
        let bit = 1usize << (n - 1 - q);
        for base in 0..v.len() {
            if base & bit != 0 {
                continue;
            }
            let (x0, x1) = (v[base], v[base | bit]);
            v[base] = m[0][0] * x0 + m[0][1] * x1;
            v[base | bit] = m[1][0] * x0 + m[1][1] * x1;
        }
    }
    v
}

/// `p' = (F_A (x) F_B (x) ...) p`.
pub fn apply_readout_noise<T: Real>(
    p: &ProbTable<T>,
    model: &ReadoutModel,
) -> Result<ProbTable<T>> {
    if model.len() != p.nqubits {
        return Err(Error::ReadoutModelSize {
            model: model.len(),
            needed: p.nqubits,
        });
    }
    let mats: Vec<_> = model
        .calibration_matrices::<T>()
        .iter()
        .map(CalibrationMatrix::entries)
        .collect();
    Ok(ProbTable {
        setting_label: p.setting_label.clone(),
        nqubits: p.nqubits,
        probs: apply_per_qubit(&p.probs, &mats),
    })
}

fn checked_distribution(p: &ProbTable<f64>) -> Result<Vec<f64>> {
    if p.probs.iter().any(|x| !x.is_finite() || *x < -1e-9) {
        return Err(Error::InvalidDistribution(format!(
            "{}: negative or non-finite probability",
            p.setting_label
        )));
    }
    let clamped: Vec<f64> = p.probs.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "{}: probabilities sum to {total}",
            p.setting_label
        )));
    }
    Ok(clamped.into_iter().map(|x| x / total).collect())
}

/// Multinomial draw of `shots` outcomes, by sequential conditional binomials.
pub fn sample_shots(p: &ProbTable<f64>, shots: u64, seed: RngSeed) -> Result<CountsTable> {
    if shots == 0 {
        return Err(Error::InvalidShots);
    }
    let probs = checked_distribution(p)?;
    let mut rng = seed.rng();
    let mut counts = vec![0u64; probs.len()];
    let mut left = shots;
    let mut mass = 1.0;
    let last = probs.len() - 1;
    for (i, &pi) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i == last {
            counts[i] = left;
            break;
        }
        let q = if mass > 0.0 {
            (pi / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = Binomial::new(left, q)
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?
            .sample(&mut rng);
        counts[i] = c;
        left -= c;
        mass -= pi;
    }
    Ok(CountsTable {
        setting_label: p.setting_label.clone(),
        nqubits: p.nqubits,
        counts,
        shots,
    })
}

/// Per-shot simulation: draw an ideal outcome, then flip each bit with its
/// qubit's conditional readout error.
pub fn sample_shots_with_flips(
    ideal: &ProbTable<f64>,
    model: &ReadoutModel,
    shots: u64,
    seed: RngSeed,
) -> Result<CountsTable> {
    if shots == 0 {
        return Err(Error::InvalidShots);
    }
    if model.len() != ideal.nqubits {
        return Err(Error::ReadoutModelSize {
            model: model.len(),
            needed: ideal.nqubits,
        });
    }
    let probs = checked_distribution(ideal)?;
    let cumulative: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let n = ideal.nqubits;
    let mut rng = seed.rng();
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.random();
        let mut m = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(probs.len() - 1);
        for (q, readout) in model.qubits.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            let flip = if m & bit == 0 {
                readout.p10
            } else {
                readout.p01
            };
            if rng.random::<f64>() < flip {
                m ^= bit;
            }
        }
        counts[m] += 1;
    }
    Ok(CountsTable {
        setting_label: ideal.setting_label.clone(),
        nqubits: n,
        counts,
        shots,
    })
}

/// Simulates the two calibration circuits per qubit (`|0>` and `|1>`) and
/// returns the empirical confusion matrix of each qubit.
pub fn simulate_calibration(
    model: &ReadoutModel,
    shots: u64,
    seed: RngSeed,
) -> Result<Vec<CalibrationMatrix<f64>>> {
    if shots == 0 {
        return Err(Error::InvalidShots);
    }
    let n = shots as f64;
    model
        .qubits
        .iter()
        .enumerate()
        .map(|(q, r)| {
            let draw = |p: f64, stream: u64| -> Result<u64> {
                let mut rng = seed.stream(stream).rng();
                Ok(Binomial::new(shots, p)
                    .map_err(|e| Error::InvalidDistribution(e.to_string()))?
                    .sample(&mut rng))
            };
            let ones_given_zero = draw(r.p10, 2 * q as u64)?;
            let zeros_given_one = draw(r.p01, 2 * q as u64 + 1)?;
            Ok(CalibrationMatrix::from_columns(
                [
                    (shots - ones_given_zero) as f64 / n,
                    ones_given_zero as f64 / n,
                ],
                [
                    zeros_given_one as f64 / n,
                    (shots - zeros_given_one) as f64 / n,
                ],
            ))
        })
        .collect()
}

pub fn bitstring(m: usize, nqubits: usize) -> String {
    (0..nqubits)
        .map(|q| {
            if (m >> (nqubits - 1 - q)) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

fn parse_bitstring(s: &str) -> Option<usize> {
    if s.is_empty() || !s.chars().all(|c| c == '0' || c == '1') {
        return None;
    }
    usize::from_str_radix(s, 2).ok()
}

/// Contents of a counts file.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsFile {
    pub tables: Vec<CountsTable>,
    pub shots: u64,
    pub seed: u64,
    pub noise: ReadoutModel,
}

impl CountsFile {
    /// `{label: {bitstring: count}, "shots": n, "seed": s, "noise": {...}}`.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for t in &self.tables {
            let mut inner = Map::new();
            for (i, &c) in t.counts.iter().enumerate() {
                inner.insert(bitstring(i, t.nqubits), json!(c));
            }
            m.insert(t.setting_label.clone(), Value::Object(inner));
        }
        m.insert("shots".into(), json!(self.shots));
        m.insert("seed".into(), json!(self.seed));
        m.insert("noise".into(), self.noise.to_json());
        Value::Object(m)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Format("counts file must be an object".into()))?;
        let shots = obj.get("shots").and_then(Value::as_u64).unwrap_or(0);
        let seed = obj.get("seed").and_then(Value::as_u64).unwrap_or(0);
        let noise = match obj.get("noise") {
            Some(n) => ReadoutModel::from_json(n)?,
            None => ReadoutModel { qubits: Vec::new() },
        };
        let mut tables = Vec::new();
        for (label, entry) in obj {
            if matches!(label.as_str(), "shots" | "seed" | "noise") {
                continue;
            }
            let counts_obj = entry
                .as_object()
                .ok_or_else(|| Error::Format(format!("{label}: counts must be an object")))?;
            let width = counts_obj.keys().map(String::len).max().unwrap_or(0);
            let mut counts = vec![0u64; 1 << width];
            for (bits, c) in counts_obj {
                let idx = parse_bitstring(bits)
                    .filter(|_| bits.len() == width)
                    .ok_or_else(|| Error::Format(format!("{label}: bad bitstring {bits:?}")))?;
                counts[idx] = c
                    .as_u64()
                    .ok_or_else(|| Error::Format(format!("{label}: count must be an integer")))?;
            }
            tables.push(CountsTable::new(label.clone(), counts)?);
        }
        Ok(Self {
            tables,
            shots,
            seed,
            noise,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexVector;
    use crate::qstate::{w_state, DensityMatrix};

    type S = MeasurementSetting<f64>;

    fn w_rho() -> DensityMatrix<f64> {
        DensityMatrix::from_pure(&w_state()).unwrap()
    }

    #[test]
    fn exact_probs_basis_state() {
        let rho = DensityMatrix::from_pure(&ComplexVector::<f64>::basis(8, 0)).unwrap();
        let p = exact_probs(&rho, &S::parse("ZZZ").unwrap()).unwrap();
        assert_eq!(p.probs[0], 1.0);
        assert!(p.probs[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn exact_probs_w_z_basis() {
        let p = exact_probs(&w_rho(), &S::parse("ZZZ").unwrap()).unwrap();
        for (m, &x) in p.probs.iter().enumerate() {
            let want = if [1, 2, 4].contains(&m) {
                1.0 / 3.0
            } else {
                0.0
            };
            assert!((x - want).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_probs_w_x_on_a() {
        // Oracle: direct <m|U rho U^dagger|m> with U = H (x) I (x) I written out.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = w_state::<f64>();
        let mut rotated = [0.0f64; 8];
        for m in 0..8 {
            let a = m >> 2;
            let rest = m & 3;
            let sign = if a == 1 { -1.0 } else { 1.0 };
            rotated[m] = s * amps[rest].re + sign * s * amps[4 | rest].re;
        }
        let oracle: Vec<f64> = rotated.iter().map(|x| x * x).collect();
        let p = exact_probs(&w_rho(), &S::parse("XZZ").unwrap()).unwrap();
        for m in 0..8 {
            assert!((p.probs[m] - oracle[m]).abs() < 1e-15);
        }
        assert!((p.probs[0b000] - p.probs[0b100]).abs() < 1e-15);
    }

    #[test]
    fn exact_probs_dimension_mismatch() {
        let err = exact_probs(&w_rho(), &S::parse("ZZ").unwrap()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn readout_noise_examples() {
        let p = ProbTable::new("Z", vec![0.3, 0.7]).unwrap();
        let same = apply_readout_noise(&p, &ReadoutModel::noiseless(1)).unwrap();
        assert_eq!(same.probs, p.probs);

        let q99 = ReadoutModel::osaka_table().select(&[2]).unwrap();
        let p = ProbTable::<f64>::new("Z", vec![1.0, 0.0]).unwrap();
        let noisy = apply_readout_noise(&p, &q99).unwrap();
        assert!((noisy.probs[0] - 0.966).abs() < 1e-15);
        assert!((noisy.probs[1] - 0.034).abs() < 1e-15);

        let p = exact_probs(&w_rho(), &S::parse("XYZ").unwrap()).unwrap();
        let noisy = apply_readout_noise(&p, &ReadoutModel::osaka_table()).unwrap();
        assert!((noisy.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn readout_noise_model_size_checked() {
        let p = ProbTable::new("ZZ", vec![0.25; 4]).unwrap();
        assert!(matches!(
            apply_readout_noise(&p, &ReadoutModel::osaka_table()),
            Err(Error::ReadoutModelSize {
                model: 3,
                needed: 2
            })
        ));
    }

    #[test]
    fn sample_point_mass() {
        let mut probs = vec![0.0; 8];
        probs[0] = 1.0;
        let p = ProbTable::new("ZZZ", probs).unwrap();
        let c = sample_shots(&p, 1234, RngSeed(9)).unwrap();
        assert_eq!(c.counts[0], 1234);
        assert_eq!(c.shots, 1234);
    }

    #[test]
    fn sample_uniform_within_five_sigma() {
        let p = ProbTable::new("ZZZ", vec![0.125; 8]).unwrap();
        let c = sample_shots(&p, 20_000, RngSeed(42)).unwrap();
        let sigma = (20_000.0f64 * 0.125 * 0.875).sqrt();
        for &k in &c.counts {
            assert!((k as f64 - 2500.0).abs() < 5.0 * sigma, "{k}");
        }
        assert_eq!(c.counts.iter().sum::<u64>(), 20_000);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = ProbTable::new("ZZZ", vec![0.1, 0.2, 0.05, 0.15, 0.1, 0.1, 0.2, 0.1]).unwrap();
        let a = sample_shots(&p, 5000, RngSeed(7)).unwrap();
        let b = sample_shots(&p, 5000, RngSeed(7)).unwrap();
        let c = sample_shots(&p, 5000, RngSeed(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_errors() {
        let p = ProbTable::new("Z", vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            sample_shots(&p, 0, RngSeed(1)),
            Err(Error::InvalidShots)
        ));
        let bad = ProbTable::new("Z", vec![0.7, 0.7]).unwrap();
        assert!(sample_shots(&bad, 10, RngSeed(1)).is_err());
        let neg = ProbTable::new("Z", vec![1.1, -0.1]).unwrap();
        assert!(sample_shots(&neg, 10, RngSeed(1)).is_err());
    }

    #[test]
    fn per_shot_flips_match_forward_noise() {
        let p = ProbTable::new("Z", vec![1.0, 0.0]).unwrap();
        let q99 = ReadoutModel::osaka_table().select(&[2]).unwrap();
        let c = sample_shots_with_flips(&p, &q99, 20_000, RngSeed(3)).unwrap();
        let rate = c.counts[1] as f64 / 20_000.0;
        let sigma = (0.034f64 * 0.966 / 20_000.0).sqrt();
        assert!((rate - 0.034).abs() < 5.0 * sigma);
    }

    #[test]
    fn calibration_noiseless_and_q97() {
        let f = simulate_calibration(&ReadoutModel::noiseless(3), 20_000, RngSeed(5)).unwrap();
        for m in &f {
            let e = m.entries();
            assert!((e[0][0] - 1.0).abs() < 0.01 && (e[1][1] - 1.0).abs() < 0.01);
        }
        let f = simulate_calibration(&ReadoutModel::osaka_table(), 20_000, RngSeed(5)).unwrap();
        assert!((f[0].entries()[0][1] - 0.023).abs() < 0.005);
        for m in &f {
            let e = m.entries();
            assert!((e[0][0] + e[1][0] - 1.0).abs() < 1e-15);
            assert!((e[0][1] + e[1][1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn counts_file_json_shape() {
        let t = CountsTable::new("CXZZ_AB", vec![1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let file = CountsFile {
            tables: vec![t],
            shots: 36,
            seed: 11,
            noise: ReadoutModel::osaka_table(),
        };
        let v = file.to_json();
        assert_eq!(v["CXZZ_AB"]["100"], json!(5));
        assert_eq!(v["noise"]["q99"]["p10"], json!(0.034));
        let back = CountsFile::from_json(&v).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn stream_seeds_do_not_collide_with_trial_offsets() {
        let base = RngSeed(1000);
        assert_ne!(base.stream(1), RngSeed(1001));
        assert_eq!(base.stream(0), base);
    }
}

//! End-to-end simulated experiment: prepare W, calibrate, measure the 17
//! three-qubit and 2 x 7 two-qubit settings with readout noise, optionally
//! mitigate, reconstruct, correct, and score against `|W>`.
//!
//! Trial `t` uses seed `seed + t`. Within a trial, streams 0..17 sample the
//! three-qubit settings, 17..24 the AB settings, 24..31 the BC settings and
//! stream 64 seeds the calibration runs (which use sub-streams 64..70).

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::metrics::{fidelity_pure, table_rows, write_long_csv, write_table_csv, FidelityReport};
use crate::mitigation::{calibration_to_json, mitigate_probs, spectral_correct, CalibrationMatrix};
use crate::noisesim::{
    apply_readout_noise, exact_probs, sample_shots, sample_shots_with_flips, simulate_calibration,
    CountsFile, CountsTable, ProbTable, ReadoutModel, RngSeed, RNG_NAME,
};
use crate::qstate::{prepare_w, DensityMatrix};
use crate::tomography::{matrix_to_json, TomographyScheme};
use crate::wholeparts::{diosi_reconstruct, MarginalPair, ReconstructionResult};

const CALIBRATION_STREAM: u64 = 64;
const AB_STREAM: u64 = 17;
const BC_STREAM: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Full3q,
    Parts2q,
    Both,
}

impl SchemeChoice {
    fn full(self) -> bool {
        matches!(self, SchemeChoice::Full3q | SchemeChoice::Both)
    }

    fn parts(self) -> bool {
        matches!(self, SchemeChoice::Parts2q | SchemeChoice::Both)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Shots per circuit, calibration circuits included.
    pub shots: u64,
    pub trials: usize,
    pub seed: u64,
    pub noise: ReadoutModel,
    /// Also produce mitigated reconstructions from the same counts.
    pub mitigate: bool,
    /// Analytic probabilities with the true confusion matrices.
    pub exact: bool,
    /// Flip bits shot by shot instead of sampling the noisy distribution.
    pub per_shot_flips: bool,
    pub scheme: SchemeChoice,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            shots: 20000,
            trials: 5,
            seed: 1,
            noise: ReadoutModel::osaka_table(),
            mitigate: true,
            exact: false,
            per_shot_flips: false,
            scheme: SchemeChoice::Both,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Format("trials must be at least 1".into()));
        }
        if self.shots == 0 && !self.exact {
            return Err(Error::InvalidShots);
        }
        if self.noise.len() != 3 {
            return Err(Error::ReadoutModelSize {
                model: self.noise.len(),
                needed: 3,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "shots": if self.exact { Value::Null } else { json!(self.shots) },
            "trials": self.trials,
            "seed": self.seed,
            "noise": self.noise.to_json(),
            "mitigate": self.mitigate,
            "exact": self.exact,
            "per_shot_flips": self.per_shot_flips,
            "scheme": self.scheme,
        })
    }
}

/// Reconstructions under one mitigation choice.
#[derive(Debug, Clone)]
pub struct Variant {
    pub mitigated: bool,
    pub rho_full: Option<DensityMatrix<f64>>,
    pub rho_ab: Option<DensityMatrix<f64>>,
    pub rho_bc: Option<DensityMatrix<f64>>,
    pub parts: Option<ReconstructionResult<f64>>,
    pub report: FidelityReport,
}

/// Measurement record of one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub counts_3q: Vec<CountsTable>,
    pub counts_ab: Vec<CountsTable>,
    pub counts_bc: Vec<CountsTable>,
    pub calibration: Vec<CalibrationMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub data: Option<TrialData>,
    pub variants: Vec<Variant>,
}

#[derive(Debug)]
pub struct PipelineRun {
    pub config: ExperimentConfig,
    /// One entry per trial in trial order; failures do not stop other trials.
    pub trials: Vec<std::result::Result<TrialOutcome, (usize, Error)>>,
}

impl PipelineRun {
    pub fn reports(&self) -> Vec<FidelityReport> {
        self.trials
            .iter()
            .flatten()
            .flat_map(|t| t.variants.iter().map(|v| v.report.clone()))
            .collect()
    }

    pub fn failures(&self) -> Vec<(usize, String)> {
        self.trials
            .iter()
            .filter_map(|t| t.as_ref().err().map(|(i, e)| (*i, e.to_string())))
            .collect()
    }
}

struct Schemes {
    full: TomographyScheme<f64>,
    pair: TomographyScheme<f64>,
}

pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let schemes = Schemes {
        full: TomographyScheme::three_qubit()?,
        pair: TomographyScheme::two_qubit()?,
    };
    let psi = prepare_w::<f64>();
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &schemes, &psi, t).map_err(|e| (t, e)))
        .collect();
    Ok(PipelineRun {
        config: cfg.clone(),
        trials,
    })
}

/// Noisy readout distributions (exact mode) or sampled counts per setting.
enum Record {
    Exact(Vec<ProbTable<f64>>),
    Sampled(Vec<CountsTable>),
}

impl Record {
    fn probs(&self) -> Vec<ProbTable<f64>> {
        match self {
            Record::Exact(p) => p.clone(),
            Record::Sampled(c) => c.iter().map(CountsTable::to_probs).collect(),
        }
    }

    fn counts(&self) -> Vec<CountsTable> {
        match self {
            Record::Exact(_) => Vec::new(),
            Record::Sampled(c) => c.clone(),
        }
    }
}

fn measure(
    cfg: &ExperimentConfig,
    scheme: &TomographyScheme<f64>,
    rho: &DensityMatrix<f64>,
    model: &ReadoutModel,
    seed: RngSeed,
    first_stream: u64,
) -> Result<Record> {
    let ideal = scheme
        .settings
        .iter()
        .map(|s| exact_probs(rho, s))
        .collect::<Result<Vec<_>>>()?;
    if cfg.exact {
        return Ok(Record::Exact(
            ideal
                .iter()
                .map(|p| apply_readout_noise(p, model))
                .collect::<Result<_>>()?,
        ));
    }
    ideal
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let stream = seed.stream(first_stream + i as u64);
            if cfg.per_shot_flips {
                sample_shots_with_flips(p, model, cfg.shots, stream)
            } else {
                sample_shots(&apply_readout_noise(p, model)?, cfg.shots, stream)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Record::Sampled)
}

fn mitigate_all(
    tables: &[ProbTable<f64>],
    fs: &[CalibrationMatrix<f64>],
) -> Result<Vec<ProbTable<f64>>> {
    tables.iter().map(|p| mitigate_probs(p, fs)).collect()
}

fn run_trial(
    cfg: &ExperimentConfig,
    schemes: &Schemes,
    psi: &ComplexVector<f64>,
    trial: usize,
) -> Result<TrialOutcome> {
    let trial_seed = cfg.seed.wrapping_add(trial as u64);
    let seed = RngSeed(trial_seed);
    let rho = DensityMatrix::from_pure(psi)?;
    let rho_ab = rho.partial_trace(&[0, 1])?;
    let rho_bc = rho.partial_trace(&[1, 2])?;
    let model = &cfg.noise;
    let model_ab = model.select(&[0, 1])?;
    let model_bc = model.select(&[1, 2])?;

    let calibration = if cfg.exact {
        model.calibration_matrices()
    } else {
        simulate_calibration(model, cfg.shots, seed.stream(CALIBRATION_STREAM))?
    };
    let rec_3q = if cfg.scheme.full() {
        Some(measure(cfg, &schemes.full, &rho, model, seed, 0)?)
    } else {
        None
    };
    let recs_2q = if cfg.scheme.parts() {
        Some((
            measure(cfg, &schemes.pair, &rho_ab, &model_ab, seed, AB_STREAM)?,
            measure(cfg, &schemes.pair, &rho_bc, &model_bc, seed, BC_STREAM)?,
        ))
    } else {
        None
    };

    let mut variants = Vec::new();
    let choices: &[bool] = if cfg.mitigate {
        &[false, true]
    } else {
        &[false]
    };
    for &mitigated in choices {
        let prep = |rec: &Record, fs: &[CalibrationMatrix<f64>]| -> Result<Vec<ProbTable<f64>>> {
            let p = rec.probs();
            if mitigated {
                mitigate_all(&p, fs)
            } else {
                Ok(p)
            }
        };
        let rho_full = match &rec_3q {
            Some(rec) => Some(spectral_correct(
                &schemes.full.reconstruct(&prep(rec, &calibration)?)?,
            )?),
            None => None,
        };
        let (m_ab, m_bc, parts) = match &recs_2q {
            Some((ab, bc)) => {
                let fs_ab = [calibration[0], calibration[1]];
                let fs_bc = [calibration[1], calibration[2]];
                let r_ab = spectral_correct(&schemes.pair.reconstruct(&prep(ab, &fs_ab)?)?)?;
                let r_bc = spectral_correct(&schemes.pair.reconstruct(&prep(bc, &fs_bc)?)?)?;
                let pair = MarginalPair::experimental(r_ab.matrix(), r_bc.matrix())?;
                let parts = diosi_reconstruct(&pair)?;
                (Some(r_ab), Some(r_bc), Some(parts))
            }
            None => (None, None, None),
        };
        let f_full = rho_full
            .as_ref()
            .map(|r| fidelity_pure(psi, r))
            .transpose()?;
        let f_parts = parts
            .as_ref()
            .map(|p| fidelity_pure(psi, &p.density()))
            .transpose()?;
        let report = FidelityReport {
            trial,
            shots: (!cfg.exact).then_some(cfg.shots),
            mitigated,
            f_full,
            f_parts,
            residual_ab: parts.as_ref().map(|p| p.residual_ab),
            residual_bc: parts.as_ref().map(|p| p.residual_bc),
        };
        variants.push(Variant {
            mitigated,
            rho_full,
            rho_ab: m_ab,
            rho_bc: m_bc,
            parts,
            report,
        });
    }

    let data = (!cfg.exact).then(|| TrialData {
        counts_3q: rec_3q.as_ref().map(Record::counts).unwrap_or_default(),
        counts_ab: recs_2q.as_ref().map(|r| r.0.counts()).unwrap_or_default(),
        counts_bc: recs_2q.as_ref().map(|r| r.1.counts()).unwrap_or_default(),
        calibration: calibration.clone(),
    });
    Ok(TrialOutcome {
        trial,
        seed: trial_seed,
        data,
        variants,
    })
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `report.csv`, `fidelities.csv`, `run.json` and one directory of
/// matrices and counts per trial.
pub fn write_outputs(run: &PipelineRun, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let reports = run.reports();
    write_table_csv(
        fs::File::create(out.join("report.csv"))?,
        &table_rows(&reports),
    )?;
    write_long_csv(fs::File::create(out.join("fidelities.csv"))?, &reports)?;

    let cfg = &run.config;
    let failures: Vec<Value> = run
        .failures()
        .into_iter()
        .map(|(t, e)| json!({"trial": t, "error": e}))
        .collect();
    write_json(
        &out.join("run.json"),
        &json!({
            "seed": cfg.seed,
            "generator": RNG_NAME,
            "trial_seeds": (0..cfg.trials).map(|t| cfg.seed.wrapping_add(t as u64)).collect::<Vec<_>>(),
            "fidelity_convention": "sqrt(<W|rho|W>)",
            "config": cfg.to_json(),
            "failures": failures,
        }),
    )?;

    let labels: Vec<String> = cfg.noise.qubits.iter().map(|q| q.label.clone()).collect();
    for t in run.trials.iter().flatten() {
        let dir = out.join(format!("trial_{}", t.trial));
        fs::create_dir_all(&dir)?;
        if let Some(data) = &t.data {
            for (name, tables, noise) in [
                ("counts_3q.json", &data.counts_3q, cfg.noise.clone()),
                (
                    "counts_ab.json",
                    &data.counts_ab,
                    cfg.noise.select(&[0, 1])?,
                ),
                (
                    "counts_bc.json",
                    &data.counts_bc,
                    cfg.noise.select(&[1, 2])?,
                ),
            ] {
                if tables.is_empty() {
                    continue;
                }
                let file = CountsFile {
                    tables: tables.clone(),
                    shots: cfg.shots,
                    seed: t.seed,
                    noise,
                };
                write_json(&dir.join(name), &file.to_json())?;
            }
            write_json(
                &dir.join("calibration.json"),
                &calibration_to_json(&labels, &data.calibration),
            )?;
        }
        for v in &t.variants {
            let sub = dir.join(if v.mitigated {
                "mitigated"
            } else {
                "unmitigated"
            });
            fs::create_dir_all(&sub)?;
            let mats = [
                ("rho_full.json", &v.rho_full),
                ("rho_ab.json", &v.rho_ab),
                ("rho_bc.json", &v.rho_bc),
            ];
            for (name, m) in mats {
                if let Some(m) = m {
                    write_json(&sub.join(name), &matrix_to_json(m.matrix()))?;
                }
            }
            if let Some(p) = &v.parts {
                write_json(&sub.join("rho_parts.json"), &p.to_json())?;
            }
        }
    }
    Ok(())
}

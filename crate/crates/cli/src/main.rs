//! `wtomo`: simulated W-state tomography from the command line.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 fixture tolerance failure,
//! 3 reconstruction error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wtomo::fixtures::{run_fixtures, ENTRY_TOLERANCE, FIDELITY_TARGET, FIDELITY_TOLERANCE};
use wtomo::metrics::{fidelity_pure, table_rows, trace_distance};
use wtomo::mitigation::{calibration_from_json, mitigate_probs, spectral_correct};
use wtomo::noisesim::{CountsFile, ReadoutModel};
use wtomo::pipeline::{run_pipeline, write_outputs, ExperimentConfig, SchemeChoice};
use wtomo::qstate::w_state;
use wtomo::tomography::{lsq_reconstruct, matrix_from_json, matrix_to_json, TomographyScheme};
use wtomo::wholeparts::{diosi_reconstruct, MarginalPair, EPS_B_EXPERIMENTAL};
use wtomo::{DensityMatrix, ProbTable};

const EXIT_FIXTURE: u8 = 2;
const EXIT_RECONSTRUCTION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "wtomo",
    version,
    about = "Simulated three-qubit W-state tomography"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate calibration, measurement, mitigation and both reconstructions.
    Pipeline(PipelineArgs),
    /// Reconstruct from the bundled measured marginals and compare with the
    /// bundled printed matrices.
    Fixtures {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Three-qubit reconstruction from a counts file (17 settings).
    Tomo3q(TomoArgs),
    /// Two-qubit reconstruction from a counts file (7 settings).
    Tomo2q(TomoArgs),
    /// Pure three-qubit state from rho_AB and rho_BC matrix files.
    Diosi {
        rho_ab: PathBuf,
        rho_bc: PathBuf,
        /// Allowed mismatch between the two estimates of rho_B.
        #[arg(long, default_value_t = EPS_B_EXPERIMENTAL)]
        eps_b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fidelity sqrt(<W|rho|W>) of a three-qubit matrix file.
    Fidelity {
        rho: PathBuf,
        /// Also report the trace distance to this matrix.
        #[arg(long)]
        against: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Both,
    Full3q,
    Parts2q,
}

#[derive(Args)]
struct PipelineArgs {
    /// Shots per circuit.
    #[arg(long, default_value_t = 20000)]
    shots: u64,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// "table3" (default calibration values), "none", or a JSON file.
    #[arg(long, default_value = "table3")]
    noise: String,
    /// Report mitigated results alongside unmitigated ones (default).
    #[arg(long, overrides_with = "no_mitigate")]
    mitigate: bool,
    #[arg(long)]
    no_mitigate: bool,
    /// Use analytic probabilities and the true confusion matrices.
    #[arg(long)]
    exact: bool,
    /// Simulate readout errors as per-shot bit flips.
    #[arg(long)]
    per_shot_flips: bool,
    #[arg(long, value_enum, default_value_t = SchemeArg::Both)]
    scheme: SchemeArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TomoArgs {
    /// Counts file: {label: {bitstring: count}, "shots", "seed", "noise"}.
    counts: PathBuf,
    /// Calibration file {qubit: [[f00, f01], [f10, f11]]}; enables mitigation.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Least-squares fit instead of the closed-form rules.
    #[arg(long)]
    lsq: bool,
    /// Skip the spectral positivity correction.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure of a reconstruction step, as opposed to bad input.
struct ReconstructionFailure(wtomo::Error);

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(v: &Value, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_noise(choice: &str) -> anyhow::Result<ReadoutModel> {
    Ok(match choice {
        "table3" => ReadoutModel::osaka_table(),
        "none" => ReadoutModel::noiseless(3),
        path => ReadoutModel::from_json(&read_json(Path::new(path))?)?,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn cmd_pipeline(a: PipelineArgs) -> anyhow::Result<ExitCode> {
    let cfg = ExperimentConfig {
        shots: a.shots,
        trials: a.trials,
        seed: a.seed,
        noise: load_noise(&a.noise)?,
        mitigate: !a.no_mitigate || a.mitigate,
        exact: a.exact,
        per_shot_flips: a.per_shot_flips,
        scheme: match a.scheme {
            SchemeArg::Both => SchemeChoice::Both,
            SchemeArg::Full3q => SchemeChoice::Full3q,
            SchemeArg::Parts2q => SchemeChoice::Parts2q,
        },
    };
    let run = run_pipeline(&cfg)?;
    write_outputs(&run, &a.out)?;
    println!("F = sqrt(<W|rho|W>); full = 17-setting tomography, parts = from rho_AB and rho_BC");
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>10}",
        "trial", "full", "full mit", "parts", "parts mit"
    );
    for r in table_rows(&run.reports()) {
        println!(
            "{:>5} {:>10} {:>10} {:>10} {:>10}",
            r.trial,
            fmt_opt(r.f_full_unmitigated),
            fmt_opt(r.f_full_mitigated),
            fmt_opt(r.f_parts_unmitigated),
            fmt_opt(r.f_parts_mitigated)
        );
    }
    let failures = run.failures();
    for (t, e) in &failures {
        eprintln!("trial {t} failed: {e}");
    }
    println!("outputs written to {}", a.out.display());
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RECONSTRUCTION)
    })
}

fn cmd_fixtures(out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let r = match run_fixtures() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("fixture reconstruction failed: {e}");
            return Ok(ExitCode::from(EXIT_RECONSTRUCTION));
        }
    };
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "{} entrywise |psi><psi| vs printed reconstruction: max deviation {:.4} (tolerance {ENTRY_TOLERANCE})",
        verdict(r.entries_ok),
        r.max_entry_deviation
    );
    println!(
        "     same against the conjugated printed matrix: {:.4}",
        r.max_entry_deviation_conjugate
    );
    println!(
        "{} fidelity of reconstruction vs W: {:.4} (target {FIDELITY_TARGET} +- {FIDELITY_TOLERANCE})",
        verdict(r.fidelity_ok),
        r.fidelity_reconstructed
    );
    println!(
        "     fidelity of printed reconstruction vs W: {:.4}",
        r.fidelity_printed_parts
    );
    println!(
        "     fidelity of printed full-tomography matrix vs W: {:.4} ({:.4} with rho_001;001 = 0.31)",
        r.fidelity_printed_full, r.fidelity_printed_full_diag_0_31
    );
    println!(
        "     residuals ab {:.4}, bc {:.4}; truncated mass ab {:.4}, bc {:.4}",
        r.residual_ab, r.residual_bc, r.truncated_mass_ab, r.truncated_mass_bc
    );
    if let Some(dir) = out {
        fs::create_dir_all(&dir)?;
        let mut v = serde_json::to_value(&r)?;
        v["reconstruction"] = r.reconstruction.to_json();
        emit(&v, Some(&dir.join("fixtures.json")))?;
    }
    Ok(if r.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FIXTURE)
    })
}

fn cmd_tomo(a: TomoArgs, three: bool) -> anyhow::Result<Result<Value, ReconstructionFailure>> {
    let counts = CountsFile::from_json(&read_json(&a.counts)?)?;
    let mut tables: Vec<ProbTable> = counts.tables.iter().map(|t| t.to_probs()).collect();
    if let Some(cal) = &a.calibration {
        let (_, fs) = calibration_from_json(&read_json(cal)?)?;
        let n = if three { 3 } else { 2 };
        if fs.len() != n {
            bail!("calibration file has {} qubits, expected {n}", fs.len());
        }
        tables = tables
            .iter()
            .map(|p| mitigate_probs(p, &fs))
            .collect::<wtomo::Result<_>>()?;
    }
    let scheme = if three {
        TomographyScheme::three_qubit()?
    } else {
        TomographyScheme::two_qubit()?
    };
    let rec = (|| -> wtomo::Result<(DensityMatrix, Option<f64>)> {
        let (rho, residual) = if a.lsq {
            let fit = lsq_reconstruct(&scheme, &tables)?;
            (fit.rho, Some(fit.residual))
        } else {
            (scheme.reconstruct(&tables)?, None)
        };
        let rho = if a.raw { rho } else { spectral_correct(&rho)? };
        Ok((rho, residual))
    })();
    let (rho, residual) = match rec {
        Ok(x) => x,
        Err(e) => return Ok(Err(ReconstructionFailure(e))),
    };
    let mut v = matrix_to_json(rho.matrix());
    if let Some(r) = residual {
        v["residual"] = json!(r);
    }
    emit(&v, a.out.as_deref())?;
    Ok(Ok(v))
}

fn cmd_diosi(ab: &Path, bc: &Path, eps_b: f64, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    let rho_ab = matrix_from_json(&read_json(ab)?)?;
    let rho_bc = matrix_from_json(&read_json(bc)?)?;
    let result = MarginalPair::new(&rho_ab, &rho_bc, eps_b).and_then(|p| diosi_reconstruct(&p));
    match result {
        Ok(r) => {
            emit(&r.to_json(), out)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("reconstruction failed: {e}");
            Ok(ExitCode::from(EXIT_RECONSTRUCTION))
        }
    }
}

fn cmd_fidelity(rho: &Path, against: Option<&Path>) -> anyhow::Result<ExitCode> {
    let (rho, tr) = DensityMatrix::normalized(&matrix_from_json(&read_json(rho)?)?)?;
    if (tr - 1.0).abs() > 1e-12 {
        eprintln!("warning: input trace {tr}; rescaled to 1");
    }
    let f = fidelity_pure(&w_state(), &rho)?;
    println!("fidelity sqrt(<W|rho|W>) = {f:.6}");
    if let Some(p) = against {
        let (other, _) = DensityMatrix::normalized(&matrix_from_json(&read_json(p)?)?)?;
        println!("trace distance = {:.6}", trace_distance(&rho, &other)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Fixtures { out } => cmd_fixtures(out),
        Command::Tomo3q(a) => tomo_exit(cmd_tomo(a, true)?),
        Command::Tomo2q(a) => tomo_exit(cmd_tomo(a, false)?),
        Command::Diosi {
            rho_ab,
            rho_bc,
            eps_b,
            out,
        } => cmd_diosi(&rho_ab, &rho_bc, eps_b, out.as_deref()),
        Command::Fidelity { rho, against } => cmd_fidelity(&rho, against.as_deref()),
    }
}

fn tomo_exit(r: Result<Value, ReconstructionFailure>) -> anyhow::Result<ExitCode> {
    match r {
        Ok(_) => Ok(ExitCode::SUCCESS),
        Err(ReconstructionFailure(e)) => {
            eprintln!("reconstruction failed: {e}");
            Ok(ExitCode::from(EXIT_RECONSTRUCTION))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

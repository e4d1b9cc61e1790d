use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("expected {expected} entries, got {got}")]
    InvalidLength { expected: usize, got: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystem(String),
    #[error("zero vector has no projector")]
    ZeroVector,
    #[error("vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("qubit index {index} out of range for {nqubits} qubits")]
    InvalidQubit { index: usize, nqubits: usize },
    #[error("malformed measurement setting: {0}")]
    MalformedSetting(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("shot count must be at least 1")]
    InvalidShots,
    #[error("readout model covers {model} qubits but {needed} are measured")]
    ReadoutModelSize { model: usize, needed: usize },
    #[error("calibration matrix for qubit {qubit} is singular (det {det:e})")]
    SingularCalibration { qubit: usize, det: f64 },
    #[error("no positive eigenvalue left after clamping")]
    NoPositiveEigenvalues,
    #[error("missing probability table for setting {0}")]
    MissingSetting(String),
    #[error("extraction rule for {element} failed validation (error {error:e})")]
    RuleValidation { element: String, error: f64 },
    #[error("normal equations are singular (condition number {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("shared marginal of B inconsistent: deviation {deviation:e} exceeds {tolerance:e}")]
    InconsistentMarginals { deviation: f64, tolerance: f64 },
    #[error("marginal too mixed for a pure-state hypothesis: kept mass {kept}")]
    TooMixed { kept: f64 },
    #[error(
        "single-party spectrum is degenerate (gap {gap:e}); state not determined by its marginals"
    )]
    DegenerateSpectrum { gap: f64 },
    #[error("phase of branch {index} is underdetermined")]
    UnderdeterminedPhase { index: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

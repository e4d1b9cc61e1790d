//! Gates, W-state preparation and the pre-measurement unitaries of the
//! tomography settings.
//!
//! Setting labels follow `<g>..<g>[_<pair>]`: one letter per qubit, `Z` (no
//! gate), `X` (Hadamard) or `Y` (`R_x(pi/2)`), prefixed by `C` and suffixed
//! by a pair (`AB`, `BC`, `AC`) when a CNOT acts first. `CXZZ_AB` is
//! `(H (x) I (x) I) CNOT_AB`. The control of the CNOT is the pair member that
//! carries a basis change (the first member when both or neither do), so
//! `CZZX_AC` uses C as control and A as target.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{self, eig_hermitian, ComplexMatrix, ComplexVector};
use crate::scalar::Real;

/// Three-qubit settings, in table order.
pub const THREE_QUBIT_LABELS: [&str; 17] = [
    "ZZZ", "XZZ", "ZXZ", "ZZX", "YZZ", "ZYZ", "ZZY", "CXZZ_AB", "CZXZ_BC", "CZZX_AC", "CYZZ_AB",
    "CZYZ_BC", "CZZY_AC", "CXXZ_BC", "CYYZ_BC", "CXYZ_BC", "CYXZ_BC",
];

/// Two-qubit settings, in table order.
pub const TWO_QUBIT_LABELS: [&str; 7] = ["ZZ", "XZ", "ZY", "ZX", "YZ", "CXZ_AB", "CYZ_AB"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate<T> {
    I(usize),
    X(usize),
    H(usize),
    Rx { qubit: usize, angle: T },
    Ry { qubit: usize, angle: T },
    Cnot { control: usize, target: usize },
}

impl<T: Real> Gate<T> {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::I(q) | Gate::X(q) | Gate::H(q) => vec![q],
            Gate::Rx { qubit, .. } | Gate::Ry { qubit, .. } => vec![qubit],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    /// The 2x2 matrix of a single-qubit gate; `None` for CNOT.
    pub fn local_matrix(&self) -> Option<ComplexMatrix<T>> {
        let z = Complex::zero();
        let one = Complex::one();
        let r = |x: T| Complex::new(x, T::zero());
        let rows = match *self {
            Gate::I(_) => [[one, z], [z, one]],
            Gate::X(_) => [[z, one], [one, z]],
            Gate::H(_) => {
                let s = T::FRAC_1_SQRT_2();
                [[r(s), r(s)], [r(s), r(-s)]]
            }
            Gate::Rx { angle, .. } => {
                let half = angle / T::lit(2.0);
                let (c, s) = (half.cos(), half.sin());
                let mis = Complex::new(T::zero(), -s);
                [[r(c), mis], [mis, r(c)]]
            }
            Gate::Ry { angle, .. } => {
                let half = angle / T::lit(2.0);
                let (c, s) = (half.cos(), half.sin());
                [[r(c), r(-s)], [r(s), r(c)]]
            }
            Gate::Cnot { .. } => return None,
        };
        Some(
            ComplexMatrix::from_rows(&[rows[0].to_vec(), rows[1].to_vec()])
                .expect("2x2 gate is well formed"),
        )
    }
}

/// Lifts a gate to the full `2^nqubits` register.
pub fn gate_matrix<T: Real>(g: &Gate<T>, nqubits: usize) -> Result<ComplexMatrix<T>> {
    if let Some(&bad) = g.qubits().iter().find(|&&q| q >= nqubits) {
        return Err(Error::InvalidQubit {
            index: bad,
            nqubits,
        });
    }
    if let Gate::Cnot { control, target } = *g {
        if control == target {
            return Err(Error::MalformedSetting("CNOT control equals target".into()));
        }
        let dim = 1usize << nqubits;
        let cbit = 1usize << (nqubits - 1 - control);
        let tbit = 1usize << (nqubits - 1 - target);
        let mut u = ComplexMatrix::zeros(dim, dim);
        for x in 0..dim {
            let y = if x & cbit != 0 { x ^ tbit } else { x };
            u[(y, x)] = Complex::one();
        }
        return Ok(u);
    }
    let local = g.local_matrix().expect("single-qubit gate");
    let q = g.qubits()[0];
    let mut u = ComplexMatrix::identity(1);
    for k in 0..nqubits {
        let factor = if k == q {
            local.clone()
        } else {
            ComplexMatrix::identity(2)
        };
        u = u.kron(&factor);
    }
    Ok(u)
}

/// Product of lifted gates; the first gate in the list acts first.
pub fn circuit_unitary<T: Real>(gates: &[Gate<T>], nqubits: usize) -> Result<ComplexMatrix<T>> {
    gates
        .iter()
        .try_fold(ComplexMatrix::identity(1 << nqubits), |u, g| {
            gate_matrix(g, nqubits)?.matmul(&u)
        })
}

/// Local basis change applied to one qubit before a Z measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'Z' => Some(Basis::Z),
            'X' => Some(Basis::X),
            'Y' => Some(Basis::Y),
            _ => None,
        }
    }

    fn gate<T: Real>(self, qubit: usize) -> Option<Gate<T>> {
        match self {
            Basis::Z => None,
            Basis::X => Some(Gate::H(qubit)),
            Basis::Y => Some(Gate::Rx {
                qubit,
                angle: T::FRAC_PI_2(),
            }),
        }
    }
}

/// A labelled pre-measurement circuit followed by computational-basis
/// readout of every qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting<T> {
    pub label: String,
    pub nqubits: usize,
    /// Applied in order, before measurement.
    pub gates: Vec<Gate<T>>,
    pub bases: Vec<Basis>,
    pub cnot: Option<(usize, usize)>,
}

impl<T: Real> MeasurementSetting<T> {
    pub fn parse(label: &str) -> Result<Self> {
        let bad = |why: &str| Error::MalformedSetting(format!("{label}: {why}"));
        let (body, pair) = match label.split_once('_') {
            Some((b, p)) => {
                let b = b
                    .strip_prefix('C')
                    .ok_or_else(|| bad("CNOT settings start with C"))?;
                (b, Some(p))
            }
            None => (label, None),
        };
        let bases = body
            .chars()
            .map(|c| Basis::from_char(c).ok_or_else(|| bad("basis letters are Z, X, Y")))
            .collect::<Result<Vec<_>>>()?;
        let nqubits = bases.len();
        if !(1..=4).contains(&nqubits) {
            return Err(bad("one to four qubits"));
        }
        let cnot = match pair {
            None => None,
            Some(p) => {
                let q = |c: char| match c {
                    'A' => Some(0usize),
                    'B' => Some(1),
                    'C' => Some(2),
                    _ => None,
                };
                let mut cs = p.chars();
                let (a, b) = match (cs.next().and_then(q), cs.next().and_then(q), cs.next()) {
                    (Some(a), Some(b), None) if a < b && b < nqubits => (a, b),
                    _ => return Err(bad("pair must be AB, BC or AC within the register")),
                };
                let changed = |k: usize| bases[k] != Basis::Z;
                if changed(b) && !changed(a) {
                    Some((b, a))
                } else {
                    Some((a, b))
                }
            }
        };
        let mut gates = Vec::new();
        if let Some((control, target)) = cnot {
            gates.push(Gate::Cnot { control, target });
        }
        gates.extend(bases.iter().enumerate().filter_map(|(q, b)| b.gate(q)));
        Ok(Self {
            label: label.to_string(),
            nqubits,
            gates,
            bases,
            cnot,
        })
    }

    pub fn unitary(&self) -> Result<ComplexMatrix<T>> {
        setting_unitary(self)
    }

    /// Basis-index permutation of the CNOT stage (identity when absent).
    pub fn cnot_permutation(&self) -> Vec<usize> {
        let dim = 1usize << self.nqubits;
        match self.cnot {
            None => (0..dim).collect(),
            Some((control, target)) => {
                let cbit = 1usize << (self.nqubits - 1 - control);
                let tbit = 1usize << (self.nqubits - 1 - target);
                (0..dim)
                    .map(|x| if x & cbit != 0 { x ^ tbit } else { x })
                    .collect()
            }
        }
    }
}

/// `U = (G_A (x) G_B (x) ...) CNOT`, the CNOT acting first on the state.
pub fn setting_unitary<T: Real>(s: &MeasurementSetting<T>) -> Result<ComplexMatrix<T>> {
    circuit_unitary(&s.gates, s.nqubits)
}

pub fn three_qubit_settings<T: Real>() -> Vec<MeasurementSetting<T>> {
    THREE_QUBIT_LABELS
        .iter()
        .map(|l| MeasurementSetting::parse(l).expect("built-in label"))
        .collect()
}

pub fn two_qubit_settings<T: Real>() -> Vec<MeasurementSetting<T>> {
    TWO_QUBIT_LABELS
        .iter()
        .map(|l| MeasurementSetting::parse(l).expect("built-in label"))
        .collect()
}

/// Preparation circuit for `(|100> + |010> + |001>)/sqrt(3)` from `|000>`.
///
/// `R_y(2 acos(1/sqrt 3))` on A, a controlled `R_y(pi/2)` from A to B built
/// from two CNOTs, then `CNOT(B->C)`, `CNOT(A->B)` and `X` on A.
pub fn w_preparation_circuit<T: Real>() -> Vec<Gate<T>> {
    let theta = T::lit(2.0) * (T::one() / T::lit(3.0).sqrt()).acos();
    let quarter = T::FRAC_PI_4();
    vec![
        Gate::Ry {
            qubit: 0,
            angle: theta,
        },
        Gate::Ry {
            qubit: 1,
            angle: quarter,
        },
        Gate::Cnot {
            control: 0,
            target: 1,
        },
        Gate::Ry {
            qubit: 1,
            angle: -quarter,
        },
        Gate::Cnot {
            control: 0,
            target: 1,
        },
        Gate::Cnot {
            control: 1,
            target: 2,
        },
        Gate::Cnot {
            control: 0,
            target: 1,
        },
        Gate::X(0),
    ]
}

/// Closed-form W state.
pub fn w_state<T: Real>() -> ComplexVector<T> {
    let a = T::one() / T::lit(3.0).sqrt();
    let mut amps = [T::zero(); 8];
    for i in [1, 2, 4] {
        amps[i] = a;
    }
    ComplexVector::from_real(&amps)
}

/// Runs the preparation circuit on `|000>` and checks it against the closed
/// form; the result is phase-fixed so the largest amplitude is real positive.
pub fn prepare_w<T: Real>() -> ComplexVector<T> {
    let u = circuit_unitary(&w_preparation_circuit::<T>(), 3).expect("valid circuit");
    let psi = u
        .apply(&ComplexVector::basis(8, 0))
        .expect("dimensions agree")
        .fix_phase();
    debug_assert!((psi.inner(&w_state()).norm() - T::one()).abs() <= T::tol(1e-12));
    psi
}

/// Hermitian, unit-trace matrix on `nqubits` qubits.
///
/// Construction checks Hermiticity and trace only; positivity is checked
/// separately because raw tomographic estimates may carry small negative
/// eigenvalues until spectrally corrected.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    nqubits: usize,
    mat: ComplexMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(mat: ComplexMatrix<T>) -> Result<Self> {
        let nqubits = linalg::qubit_count(&mat)?;
        let dev = mat.hermitian_deviation();
        if dev > T::tol(1e-10) {
            return Err(Error::NotHermitian {
                deviation: dev.as_f64(),
            });
        }
        let tr = mat.trace();
        if (tr.re - T::one()).abs() > T::tol(1e-10) || tr.im.abs() > T::tol(1e-10) {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {} + {}i",
                tr.re, tr.im
            )));
        }
        Ok(Self { nqubits, mat })
    }

    /// Symmetrizes and rescales to unit trace. Returns the matrix and the
    /// original trace.
    pub fn normalized(mat: &ComplexMatrix<T>) -> Result<(Self, T)> {
        let nqubits = linalg::qubit_count(mat)?;
        let dev = mat.hermitian_deviation();
        if dev > T::tol(1e-8) {
            return Err(Error::NotHermitian {
                deviation: dev.as_f64(),
            });
        }
        let h = mat.hermitian_part();
        let tr = h.trace().re;
        if tr <= T::epsilon() {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        Ok((
            Self {
                nqubits,
                mat: h.scale(T::one() / tr),
            },
            tr,
        ))
    }

    pub fn from_pure(psi: &ComplexVector<T>) -> Result<Self> {
        Self::new(linalg::outer(psi)?)
    }

    pub fn maximally_mixed(nqubits: usize) -> Self {
        let d = 1usize << nqubits;
        Self {
            nqubits,
            mat: ComplexMatrix::identity(d).scale(T::one() / T::lit(d as f64)),
        }
    }

    pub fn nqubits(&self) -> usize {
        self.nqubits
    }

    pub fn dim(&self) -> usize {
        1 << self.nqubits
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.mat
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        Ok(Self {
            nqubits: keep.len(),
            mat: linalg::partial_trace(&self.mat, keep)?,
        })
    }

    pub fn eigen(&self) -> Result<linalg::EigenSystem<T>> {
        eig_hermitian(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        Ok(self.eigen()?.min_value())
    }

    /// Errors when the smallest eigenvalue is below `-tol`.
    pub fn check_positive(&self, tol: T) -> Result<()> {
        let m = self.min_eigenvalue()?;
        if m < -tol {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {m:e}"
            )));
        }
        Ok(())
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        u.matmul(&self.mat)?.matmul(&u.dagger())
    }
}

/// Haar-random pure state on `nqubits` qubits (normalized complex Gaussian).
pub fn random_pure_state<T: Real, R: rand::Rng + ?Sized>(
    nqubits: usize,
    rng: &mut R,
) -> ComplexVector<T> {
    use rand_distr::{Distribution, StandardNormal};
    let d = 1usize << nqubits;
    let amps = (0..d)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    ComplexVector::from_vec(amps)
        .normalized()
        .expect("gaussian vector is nonzero")
}

/// Random density matrix of rank at most `rank`: `G G^dagger / Tr` for a
/// `d x rank` complex Gaussian `G`.
pub fn random_density_matrix<T: Real, R: rand::Rng + ?Sized>(
    nqubits: usize,
    rank: usize,
    rng: &mut R,
) -> DensityMatrix<T> {
    let vectors: Vec<ComplexVector<T>> = (0..rank.max(1))
        .map(|_| random_pure_state(nqubits, rng))
        .collect();
    let weights: Vec<T> = (0..vectors.len())
        .map(|_| T::lit(rng.random::<f64>()) + T::lit(1e-3))
        .collect();
    let total: T = weights.iter().copied().sum();
    let weights: Vec<T> = weights.iter().map(|&w| w / total).collect();
    let m = linalg::weighted_projectors(&weights, &vectors).hermitian_part();
    DensityMatrix::normalized(&m).expect("valid mixture").0
}

//! Reconstruction of a three-qubit pure state from its AB and BC marginals.
//!
//! With `rho_A = sum_i lambda_A^i |i;A><i;A|` and the top eigenvectors
//! `|i;BC>` of `rho_BC`, any purification reads
//! `sum_i e^{i alpha_i} sqrt(lambda_A^i) |i;A> (x) |i;BC>`. The same state
//! written from the C side fixes the relative phases: in the product basis
//! `|i;A>|j;B>|k;C>` both expansions must agree, which gives
//! `e^{i alpha_i} sqrt(lambda_A^i) A^i_jk = e^{i gamma_k} sqrt(lambda_C^k) C^k_ij`.

use num_complex::Complex;
use num_traits::Zero;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::qstate::DensityMatrix;
use crate::scalar::Real;
use crate::tomography::matrix_to_json;

/// Default tolerance on the two estimates of `rho_B` for measured data.
pub const EPS_B_EXPERIMENTAL: f64 = 0.05;
/// Default tolerance on the two estimates of `rho_B` for exact data.
pub const EPS_B_EXACT: f64 = 1e-10;
/// Default minimum gap of the `rho_A` spectrum.
pub const DEGENERACY_GAP: f64 = 1e-6;

const MIN_KEPT_MASS: f64 = 0.8;
const NEGLIGIBLE: f64 = 1e-8;

/// Two-qubit marginals sharing qubit B, trace-normalized on construction.
#[derive(Debug, Clone)]
pub struct MarginalPair<T> {
    pub rho_ab: DensityMatrix<T>,
    pub rho_bc: DensityMatrix<T>,
    pub labels: (String, String),
    pub eps_b: T,
    /// Traces of the matrices as given.
    pub input_traces: (T, T),
}

impl<T: Real> MarginalPair<T> {
    /// Rescales each input to unit trace (logging a warning when it was
    /// off) and checks that both give the same `rho_B` within `eps_b`.
    pub fn new(rho_ab: &ComplexMatrix<T>, rho_bc: &ComplexMatrix<T>, eps_b: T) -> Result<Self> {
        let mut halves = Vec::with_capacity(2);
        for (name, m) in [("rho_AB", rho_ab), ("rho_BC", rho_bc)] {
            if m.shape() != (4, 4) {
                return Err(Error::DimensionMismatch {
                    op: "MarginalPair::new",
                    left: m.shape(),
                    right: (4, 4),
                });
            }
            let (dm, tr) = DensityMatrix::normalized(m)?;
            if (tr - T::one()).abs() > T::tol(1e-12) {
                log::warn!("{name} has trace {tr}; rescaled to 1");
            }
            halves.push((dm, tr));
        }
        let (bc, tr_bc) = halves.pop().expect("two inputs");
        let (ab, tr_ab) = halves.pop().expect("two inputs");
        let pair = Self {
            rho_ab: ab,
            rho_bc: bc,
            labels: ("AB".into(), "BC".into()),
            eps_b,
            input_traces: (tr_ab, tr_bc),
        };
        single_party_marginals(&pair)?;
        Ok(pair)
    }

    pub fn exact(rho_ab: &ComplexMatrix<T>, rho_bc: &ComplexMatrix<T>) -> Result<Self> {
        Self::new(rho_ab, rho_bc, T::tol(EPS_B_EXACT))
    }

    pub fn experimental(rho_ab: &ComplexMatrix<T>, rho_bc: &ComplexMatrix<T>) -> Result<Self> {
        Self::new(rho_ab, rho_bc, T::lit(EPS_B_EXPERIMENTAL))
    }

    /// Marginals of a three-qubit state.
    pub fn from_state(rho: &DensityMatrix<T>) -> Result<Self> {
        if rho.nqubits() != 3 {
            return Err(Error::InvalidSubsystem(format!(
                "need a three-qubit state, got {} qubits",
                rho.nqubits()
            )));
        }
        let ab = rho.partial_trace(&[0, 1])?;
        let bc = rho.partial_trace(&[1, 2])?;
        Self::exact(ab.matrix(), bc.matrix())
    }
}

#[derive(Debug, Clone)]
pub struct SinglePartyMarginals<T> {
    pub rho_a: DensityMatrix<T>,
    /// Average of `Tr_A rho_AB` and `Tr_C rho_BC`.
    pub rho_b: DensityMatrix<T>,
    pub rho_c: DensityMatrix<T>,
    /// Max-entry difference of the two `rho_B` estimates.
    pub b_discrepancy: T,
}

pub fn single_party_marginals<T: Real>(pair: &MarginalPair<T>) -> Result<SinglePartyMarginals<T>> {
    let rho_a = pair.rho_ab.partial_trace(&[0])?;
    let b_from_ab = pair.rho_ab.partial_trace(&[1])?;
    let b_from_bc = pair.rho_bc.partial_trace(&[0])?;
    let rho_c = pair.rho_bc.partial_trace(&[1])?;
    let dev = b_from_ab
        .matrix()
        .max_abs_diff(b_from_bc.matrix())
        .expect("both 2x2");
    if dev > pair.eps_b {
        return Err(Error::InconsistentMarginals {
            deviation: dev.as_f64(),
            tolerance: pair.eps_b.as_f64(),
        });
    }
    let avg = (b_from_ab.matrix() + b_from_bc.matrix()).scale(T::lit(0.5));
    Ok(SinglePartyMarginals {
        rho_a,
        rho_b: DensityMatrix::new(avg)?,
        rho_c,
        b_discrepancy: dev,
    })
}

/// Overlap tensors in the eigenbases of `rho_A`, `rho_B`, `rho_C`.
#[derive(Debug, Clone)]
pub struct OverlapTensors<T> {
    /// `A[i][j][k] = <j;B k;C | i;BC>`.
    pub a_tensor: [[[Complex<T>; 2]; 2]; 2],
    /// `C[k][i][j] = <i;A j;B | k;AB>`.
    pub c_tensor: [[[Complex<T>; 2]; 2]; 2],
    pub lambda_a: [T; 2],
    pub lambda_c: [T; 2],
    pub basis_a: [ComplexVector<T>; 2],
    pub basis_b: [ComplexVector<T>; 2],
    pub basis_c: [ComplexVector<T>; 2],
    /// Top two eigenvectors of `rho_BC`, paired with `lambda_a`.
    pub vectors_bc: [ComplexVector<T>; 2],
    /// Top two eigenvectors of `rho_AB`, paired with `lambda_c`.
    pub vectors_ab: [ComplexVector<T>; 2],
    /// `1 - (mu_0 + mu_1)` for the spectra of `rho_AB` and `rho_BC`.
    pub truncated_mass_ab: T,
    pub truncated_mass_bc: T,
}

/// Eigenvectors with the largest component made real positive.
fn gauged_top2<T: Real>(rho: &DensityMatrix<T>) -> Result<([T; 2], [ComplexVector<T>; 2], T)> {
    let es = rho.eigen()?;
    let kept = es.values[0] + es.values[1];
    let v0 = es.vectors[0].fix_phase();
    let v1 = es.vectors[1].fix_phase();
    Ok(([es.values[0], es.values[1]], [v0, v1], T::one() - kept))
}

/// Clamped at zero and rescaled to unit sum.
fn weights<T: Real>(values: [T; 2]) -> [T; 2] {
    let a = values[0].max(T::zero());
    let b = values[1].max(T::zero());
    let s = a + b;
    [a / s, b / s]
}

fn component<T: Real>(
    left: &ComplexVector<T>,
    right: &ComplexVector<T>,
    v: &ComplexVector<T>,
) -> Complex<T> {
    left.kron(right).inner(v)
}

pub fn purify_structures<T: Real>(pair: &MarginalPair<T>) -> Result<OverlapTensors<T>> {
    let sp = single_party_marginals(pair)?;
    let (la, basis_a, _) = gauged_top2(&sp.rho_a)?;
    let (_, basis_b, _) = gauged_top2(&sp.rho_b)?;
    let (lc, basis_c, _) = gauged_top2(&sp.rho_c)?;
    let (_, vectors_bc, trunc_bc) = gauged_top2(&pair.rho_bc)?;
    let (_, vectors_ab, trunc_ab) = gauged_top2(&pair.rho_ab)?;
    let kept = (T::one() - trunc_ab).min(T::one() - trunc_bc);
    if kept < T::lit(MIN_KEPT_MASS) {
        return Err(Error::TooMixed {
            kept: kept.as_f64(),
        });
    }

    let zero = Complex::zero();
    let mut a_tensor = [[[zero; 2]; 2]; 2];
    let mut c_tensor = [[[zero; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                a_tensor[i][j][k] = component(&basis_b[j], &basis_c[k], &vectors_bc[i]);
                c_tensor[k][i][j] = component(&basis_a[i], &basis_b[j], &vectors_ab[k]);
            }
        }
    }
    Ok(OverlapTensors {
        a_tensor,
        c_tensor,
        lambda_a: weights(la),
        lambda_c: weights(lc),
        basis_a,
        basis_b,
        basis_c,
        vectors_bc,
        vectors_ab,
        truncated_mass_ab: trunc_ab,
        truncated_mass_bc: trunc_bc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSolution<T> {
    pub alpha: [T; 2],
    /// `gamma[0] = 0` by gauge.
    pub gamma: [T; 2],
    /// Max over `i, j, k` of the constraint mismatch.
    pub residual: T,
}

/// Solves the phase-matching constraints with gauge `gamma_0 = 0`.
pub fn solve_phases<T: Real>(t: &OverlapTensors<T>, gap_tol: T) -> Result<PhaseSolution<T>> {
    let gap = (t.lambda_a[0] - t.lambda_a[1]).abs();
    if gap <= gap_tol {
        return Err(Error::DegenerateSpectrum { gap: gap.as_f64() });
    }
    // The C-side Schmidt basis is arbitrary inside a degenerate eigenspace,
    // so the pairing with rho_AB is equally ambiguous.
    let gap_c = (t.lambda_c[0] - t.lambda_c[1]).abs();
    if gap_c <= gap_tol {
        return Err(Error::DegenerateSpectrum {
            gap: gap_c.as_f64(),
        });
    }
    let sa = t.lambda_a.map(|l| l.sqrt());
    let sc = t.lambda_c.map(|l| l.sqrt());

    // M[i][k] = sum_j c_ijk conj(a_ijk) ~ e^{i(alpha_i - gamma_k)} |.|
    let mut m = [[Complex::<T>::zero(); 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (k, mik) in row.iter_mut().enumerate() {
            for j in 0..2 {
                let a = t.a_tensor[i][j][k] * sa[i];
                let c = t.c_tensor[k][i][j] * sc[k];
                *mik += c * a.conj();
            }
        }
    }
    let negligible = T::lit(NEGLIGIBLE);
    let link: Complex<T> = (0..2).map(|i| m[i][0] * m[i][1].conj()).sum();
    let gamma1 = if link.norm() > negligible {
        link.arg()
    } else {
        T::zero()
    };
    let gamma = [T::zero(), gamma1];
    let mut alpha = [T::zero(); 2];
    for i in 0..2 {
        let s: Complex<T> = (0..2)
            .map(|k| Complex::from_polar(T::one(), gamma[k]) * m[i][k])
            .sum();
        if s.norm() <= negligible {
            if t.lambda_a[i] > negligible {
                return Err(Error::UnderdeterminedPhase { index: i });
            }
            continue;
        }
        alpha[i] = s.arg();
    }

    let mut residual = T::zero();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let lhs = Complex::from_polar(sa[i], alpha[i]) * t.a_tensor[i][j][k];
                let rhs = Complex::from_polar(sc[k], gamma[k]) * t.c_tensor[k][i][j];
                residual = residual.max((lhs - rhs).norm());
            }
        }
    }
    Ok(PhaseSolution {
        alpha,
        gamma,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult<T> {
    /// Unit norm, largest amplitude real positive.
    pub psi: ComplexVector<T>,
    /// `max |Tr_C |psi><psi| - rho_AB|` against the normalized input.
    pub residual_ab: T,
    /// `max |Tr_A |psi><psi| - rho_BC|` against the normalized input.
    pub residual_bc: T,
    pub truncated_mass_ab: T,
    pub truncated_mass_bc: T,
    pub phases: PhaseSolution<T>,
    pub b_discrepancy: T,
}

impl<T: Real> ReconstructionResult<T> {
    pub fn density(&self) -> DensityMatrix<T> {
        DensityMatrix::from_pure(&self.psi).expect("psi is normalized")
    }
}

impl ReconstructionResult<f64> {
    /// The density-matrix JSON of `|psi><psi|` with residual fields added.
    pub fn to_json(&self) -> Value {
        let mut v = matrix_to_json(self.density().matrix());
        let obj = v.as_object_mut().expect("object");
        obj.insert(
            "psi".into(),
            json!({
                "re": self.psi.as_slice().iter().map(|z| z.re).collect::<Vec<_>>(),
                "im": self.psi.as_slice().iter().map(|z| z.im).collect::<Vec<_>>(),
            }),
        );
        obj.insert("residual_ab".into(), json!(self.residual_ab));
        obj.insert("residual_bc".into(), json!(self.residual_bc));
        obj.insert(
            "truncated_mass".into(),
            json!({"ab": self.truncated_mass_ab, "bc": self.truncated_mass_bc}),
        );
        v
    }
}

pub fn diosi_reconstruct<T: Real>(pair: &MarginalPair<T>) -> Result<ReconstructionResult<T>> {
    diosi_reconstruct_with(pair, T::tol(DEGENERACY_GAP))
}

pub fn diosi_reconstruct_with<T: Real>(
    pair: &MarginalPair<T>,
    gap_tol: T,
) -> Result<ReconstructionResult<T>> {
    let t = purify_structures(pair)?;
    let phases = solve_phases(&t, gap_tol)?;
    let mut amps = vec![Complex::<T>::zero(); 8];
    for i in 0..2 {
        let branch = t.basis_a[i].kron(&t.vectors_bc[i]);
        let w = Complex::from_polar(t.lambda_a[i].sqrt(), phases.alpha[i]);
        for (a, b) in amps.iter_mut().zip(branch.as_slice()) {
            *a += b * w;
        }
    }
    let psi = ComplexVector::new(amps)?.normalized()?.fix_phase();
    let rho = DensityMatrix::from_pure(&psi)?;
    let residual_ab = rho
        .partial_trace(&[0, 1])?
        .matrix()
        .max_abs_diff(pair.rho_ab.matrix())
        .expect("4x4");
    let residual_bc = rho
        .partial_trace(&[1, 2])?
        .matrix()
        .max_abs_diff(pair.rho_bc.matrix())
        .expect("4x4");
    let sp_dev = single_party_marginals(pair)?.b_discrepancy;
    Ok(ReconstructionResult {
        psi,
        residual_ab,
        residual_bc,
        truncated_mass_ab: t.truncated_mass_ab,
        truncated_mass_bc: t.truncated_mass_bc,
        phases,
        b_discrepancy: sp_dev,
    })
}

/// `|<a|b>|` for unit vectors.
pub fn overlap<T: Real>(a: &ComplexVector<T>, b: &ComplexVector<T>) -> T {
    a.inner(b).norm()
}

/// Applies `u_A (x) u_B (x) u_C` to a three-qubit vector.
pub fn local_unitary<T: Real>(
    u: [&ComplexMatrix<T>; 3],
    psi: &ComplexVector<T>,
) -> Result<ComplexVector<T>> {
    u[0].kron(u[1]).kron(u[2]).apply(psi)
}

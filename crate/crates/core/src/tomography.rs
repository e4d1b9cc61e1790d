//! Closed-form state reconstruction for the 17-setting three-qubit scheme and
//! the 7-setting two-qubit scheme, plus a least-squares fit over the full
//! linear measurement map.
//!
//! Extraction formulas are derived from the setting unitaries, not typed in.
//! Settings sharing a CNOT and a set of basis-changed qubits `S` are grouped.
//! For each outcome `r` of the other qubits, the parity-signed sum
//! `E_s(r) = sum_y (-1)^|y| P_s(y, r)` equals
//! `sum_x K_s(x) rho'_{(x,r);(xbar,r)}` with `K_s(x) = prod_q O_q[xbar_q, x_q]`
//! and `O_q = G_q^dagger Z G_q`, where `rho'` is the state after the CNOT.
//! Each group gives a square real system in the real and imaginary parts of
//! those coherences; its inverse yields the rule coefficients. Every rule set
//! is then checked against exact probabilities of a fixed test state.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex;
use num_traits::One;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, invert_real, solve_real, ComplexMatrix};
use crate::noisesim::{exact_probs, ProbTable};
use crate::qstate::{
    three_qubit_settings, two_qubit_settings, Basis, DensityMatrix, Gate, MeasurementSetting,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    Re,
    Im,
    Diag,
}

/// A density-matrix element targeted by a rule (`row <= col`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Target {
    pub element: (usize, usize),
    pub part: Part,
}

impl Target {
    fn display(&self, nqubits: usize) -> String {
        let b = |i| crate::noisesim::bitstring(i, nqubits);
        let (r, c) = self.element;
        match self.part {
            Part::Diag => format!("rho_{{{};{}}}", b(r), b(c)),
            Part::Re => format!("Re rho_{{{};{}}}", b(r), b(c)),
            Part::Im => format!("Im rho_{{{};{}}}", b(r), b(c)),
        }
    }
}

/// One summand of a rule: `coeff * P_setting(outcome)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleTerm<T> {
    /// Index into the scheme's settings.
    pub setting: usize,
    pub outcome: usize,
    pub coeff: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionRule<T> {
    /// The setting whose table row lists this element.
    pub setting_label: String,
    pub element: (usize, usize),
    pub part: Part,
    pub terms: Vec<RuleTerm<T>>,
}

impl<T: Real> ExtractionRule<T> {
    pub fn target(&self) -> Target {
        Target {
            element: self.element,
            part: self.part,
        }
    }

    /// Evaluates the rule on probability vectors indexed like the settings.
    pub fn apply(&self, probs: &[&[T]]) -> T {
        self.terms
            .iter()
            .map(|t| t.coeff * probs[t.setting][t.outcome])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeName {
    TwoQubit7,
    ThreeQubit17,
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeName::TwoQubit7 => f.write_str("two-qubit, 7 settings"),
            SchemeName::ThreeQubit17 => f.write_str("three-qubit, 17 settings"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TomographyScheme<T> {
    pub name: SchemeName,
    pub settings: Vec<MeasurementSetting<T>>,
    pub rules: Vec<ExtractionRule<T>>,
}

impl<T: Real> TomographyScheme<T> {
    pub fn new(name: SchemeName) -> Result<Self> {
        let settings = match name {
            SchemeName::ThreeQubit17 => three_qubit_settings(),
            SchemeName::TwoQubit7 => two_qubit_settings(),
        };
        let rules = derive_rules(name, &settings)?;
        Ok(Self {
            name,
            settings,
            rules,
        })
    }

    pub fn three_qubit() -> Result<Self> {
        Self::new(SchemeName::ThreeQubit17)
    }

    pub fn two_qubit() -> Result<Self> {
        Self::new(SchemeName::TwoQubit7)
    }

    pub fn nqubits(&self) -> usize {
        self.settings[0].nqubits
    }

    pub fn rules_for(&self, label: &str) -> impl Iterator<Item = &ExtractionRule<T>> {
        let label = label.to_string();
        self.rules.iter().filter(move |r| r.setting_label == label)
    }

    /// Applies the rules to one table per setting (any order, matched by
    /// label) and fills the lower triangle by conjugation.
    pub fn reconstruct(&self, tables: &[ProbTable<T>]) -> Result<DensityMatrix<T>> {
        let probs = self.match_tables(tables)?;
        let d = 1usize << self.nqubits();
        let mut m = ComplexMatrix::zeros(d, d);
        for rule in &self.rules {
            let v = rule.apply(&probs);
            let (r, c) = rule.element;
            match rule.part {
                Part::Diag => m[(r, r)] = Complex::new(v, T::zero()),
                Part::Re => {
                    m[(r, c)].re = v;
                    m[(c, r)].re = v;
                }
                Part::Im => {
                    m[(r, c)].im = v;
                    m[(c, r)].im = -v;
                }
            }
        }
        let tr = m.trace().re;
        if tr <= T::zero() {
            return Err(Error::InvalidDistribution(
                "diagonal setting has no probability mass".into(),
            ));
        }
        DensityMatrix::new(m.scale(T::one() / tr))
    }

    fn match_tables<'a>(&self, tables: &'a [ProbTable<T>]) -> Result<Vec<&'a [T]>> {
        let n = self.nqubits();
        self.settings
            .iter()
            .map(|s| {
                let t = tables
                    .iter()
                    .find(|t| t.setting_label == s.label)
                    .ok_or_else(|| Error::MissingSetting(s.label.clone()))?;
                if t.nqubits != n || t.probs.len() != 1 << n {
                    return Err(Error::InvalidLength {
                        expected: 1 << n,
                        got: t.probs.len(),
                    });
                }
                if t.probs.iter().any(|p| !p.is_finite()) {
                    return Err(Error::NonFinite);
                }
                let total = t.total();
                if (total - T::one()).abs() > T::tol(1e-6) {
                    return Err(Error::InvalidDistribution(format!(
                        "{}: probabilities sum to {total}",
                        s.label
                    )));
                }
                Ok(t.probs.as_slice())
            })
            .collect()
    }
}

pub fn reconstruct_3q<T: Real>(tables: &[ProbTable<T>]) -> Result<DensityMatrix<T>> {
    TomographyScheme::three_qubit()?.reconstruct(tables)
}

pub fn reconstruct_2q<T: Real>(tables: &[ProbTable<T>]) -> Result<DensityMatrix<T>> {
    TomographyScheme::two_qubit()?.reconstruct(tables)
}

/// Elements each setting is listed as determining. For the two-qubit ZX, ZY
/// and YZ settings this is the assignment the unitaries actually support.
fn listed_targets(name: SchemeName) -> Vec<(&'static str, Vec<Target>)> {
    let rows: &[(&str, &str)] = match name {
        SchemeName::ThreeQubit17 => &[
            ("XZZ", "Re 000;100 Re 001;101 Re 010;110 Re 011;111"),
            ("ZXZ", "Re 000;010 Re 001;011 Re 100;110 Re 101;111"),
            ("ZZX", "Re 000;001 Re 010;011 Re 100;101 Re 110;111"),
            ("YZZ", "Im 000;100 Im 001;101 Im 010;110 Im 011;111"),
            ("ZYZ", "Im 000;010 Im 001;011 Im 100;110 Im 101;111"),
            ("ZZY", "Im 000;001 Im 010;011 Im 100;101 Im 110;111"),
            ("CXZZ_AB", "Re 000;110 Re 001;111 Re 010;100 Re 011;101"),
            ("CZXZ_BC", "Re 000;011 Re 001;010 Re 100;111 Re 101;110"),
            ("CZZX_AC", "Re 000;101 Re 001;100 Re 010;111 Re 011;110"),
            ("CYZZ_AB", "Im 000;110 Im 001;111 Im 010;100 Im 011;101"),
            ("CZYZ_BC", "Im 000;011 Im 001;010 Im 100;111 Im 101;110"),
            ("CZZY_AC", "Im 000;101 Im 001;100 Im 010;111 Im 011;110"),
            ("CXXZ_BC", "Re 000;111 Re 011;100"),
            ("CYYZ_BC", "Re 001;110 Re 010;101"),
            ("CXYZ_BC", "Im 011;100 Im 000;111"),
            ("CYXZ_BC", "Im 001;110 Im 010;101"),
        ],
        SchemeName::TwoQubit7 => &[
            ("XZ", "Re 00;10 Re 01;11"),
            ("ZY", "Im 00;01 Im 10;11"),
            ("ZX", "Re 00;01 Re 10;11"),
            ("YZ", "Im 00;10 Im 01;11"),
            ("CXZ_AB", "Re 00;11 Re 01;10"),
            ("CYZ_AB", "Im 00;11 Im 01;10"),
        ],
    };
    let (diag_label, n) = match name {
        SchemeName::ThreeQubit17 => ("ZZZ", 3),
        SchemeName::TwoQubit7 => ("ZZ", 2),
    };
    let diag = (0..1usize << n)
        .map(|i| Target {
            element: (i, i),
            part: Part::Diag,
        })
        .collect();
    let mut out = vec![(diag_label, diag)];
    for (label, spec) in rows {
        let words: Vec<&str> = spec.split_whitespace().collect();
        let targets = words
            .chunks(2)
            .map(|w| {
                let part = if w[0] == "Re" { Part::Re } else { Part::Im };
                let (a, b) = w[1].split_once(';').expect("row;col");
                let idx = |s: &str| usize::from_str_radix(s, 2).expect("binary index");
                Target {
                    element: (idx(a), idx(b)),
                    part,
                }
            })
            .collect();
        out.push((*label, targets));
    }
    out
}

/// Places the bits of `bits` (first listed qubit most significant) at the
/// given qubit positions of an `n`-qubit basis index.
fn scatter(bits: usize, positions: &[usize], n: usize) -> usize {
    let k = positions.len();
    positions
        .iter()
        .enumerate()
        .filter(|(i, _)| (bits >> (k - 1 - i)) & 1 == 1)
        .fold(0, |acc, (_, &q)| acc | 1 << (n - 1 - q))
}

/// `G^dagger Z G` for the basis-change gate of one qubit.
fn signed_observable<T: Real>(basis: Basis, qubit: usize) -> ComplexMatrix<T> {
    let g = match basis {
        Basis::Z => Gate::I(qubit),
        Basis::X => Gate::H(qubit),
        Basis::Y => Gate::Rx {
            qubit,
            angle: T::FRAC_PI_2(),
        },
    }
    .local_matrix()
    .expect("single-qubit gate");
    let z = ComplexMatrix::from_diag(&[T::one(), -T::one()]);
    g.dagger()
        .matmul(&z)
        .and_then(|zg| zg.matmul(&g))
        .expect("2x2 product")
}

/// Derives and validates the extraction rules of a scheme.
///
/// Fails with [`Error::RuleValidation`] when a group's system is singular,
/// when a derived element is not listed for any setting of its group, when
/// coverage of the matrix is not exactly once per element, or when a rule
/// misreproduces the test state.
pub fn derive_rules<T: Real>(
    name: SchemeName,
    settings: &[MeasurementSetting<T>],
) -> Result<Vec<ExtractionRule<T>>> {
    let n = settings
        .first()
        .map(|s| s.nqubits)
        .ok_or_else(|| Error::MalformedSetting("scheme has no settings".into()))?;
    let listed = listed_targets(name);
    let mut owner: HashMap<Target, &str> = HashMap::new();
    for (label, targets) in &listed {
        for t in targets {
            owner.insert(*t, label);
        }
    }
    let fail = |t: Target, why: f64| Error::RuleValidation {
        element: t.display(n),
        error: why,
    };

    // Group settings by (CNOT, basis-changed qubits).
    let mut groups: Vec<(Option<(usize, usize)>, Vec<usize>, Vec<usize>)> = Vec::new();
    for (idx, s) in settings.iter().enumerate() {
        let support: Vec<usize> = (0..n).filter(|&q| s.bases[q] != Basis::Z).collect();
        match groups
            .iter_mut()
            .find(|(c, sup, _)| *c == s.cnot && *sup == support)
        {
            Some(g) => g.2.push(idx),
            None => groups.push((s.cnot, support, vec![idx])),
        }
    }

    let d = 1usize << n;
    let mut rules = Vec::new();
    for (_, support, members) in &groups {
        if support.is_empty() {
            let idx = members[0];
            for i in 0..d {
                rules.push(ExtractionRule {
                    setting_label: settings[idx].label.clone(),
                    element: (i, i),
                    part: Part::Diag,
                    terms: vec![RuleTerm {
                        setting: idx,
                        outcome: i,
                        coeff: T::one(),
                    }],
                });
            }
            continue;
        }
        let k = support.len();
        let rest: Vec<usize> = (0..n).filter(|q| !support.contains(q)).collect();
        let full = (1usize << k) - 1;
        let reps: Vec<usize> = (0..1usize << (k - 1)).collect();

        // Row s, columns (Re, Im) per representative x: 2 Re(K_s(x) rho'_{x;xbar}).
        let system: Vec<Vec<T>> = members
            .iter()
            .map(|&idx| {
                let obs: Vec<ComplexMatrix<T>> = support
                    .iter()
                    .map(|&q| signed_observable(settings[idx].bases[q], q))
                    .collect();
                reps.iter()
                    .flat_map(|&x| {
                        let xbar = x ^ full;
                        let kx = obs.iter().enumerate().fold(Complex::one(), |acc, (i, o)| {
                            let bit = |v: usize| (v >> (k - 1 - i)) & 1;
                            acc * o[(bit(xbar), bit(x))]
                        });
                        let two = T::lit(2.0);
                        [two * kx.re, -two * kx.im]
                    })
                    .collect()
            })
            .collect();
        let label_of = |t: Target| t.display(n);
        let inverse = if system.len() == 2 * reps.len() {
            invert_real(&system, T::tol(1e-9))
        } else {
            None
        };
        let inverse = inverse.ok_or_else(|| Error::RuleValidation {
            element: format!("system of settings {:?}", members_labels(settings, members)),
            error: f64::NAN,
        })?;
        let perm = settings[members[0]].cnot_permutation();

        for r in 0..1usize << rest.len() {
            let r_idx = scatter(r, &rest, n);
            for (j, &x) in reps.iter().enumerate() {
                let a = perm[scatter(x, support, n) | r_idx];
                let b = perm[scatter(x ^ full, support, n) | r_idx];
                let (row, col, flip) = if a < b { (a, b, false) } else { (b, a, true) };
                for (part, unknown) in [(Part::Re, 2 * j), (Part::Im, 2 * j + 1)] {
                    let sign = if flip && part == Part::Im {
                        -T::one()
                    } else {
                        T::one()
                    };
                    let mut terms = Vec::new();
                    for (si, &idx) in members.iter().enumerate() {
                        let c = sign * inverse[unknown][si];
                        if c.abs() <= T::tol(1e-12) {
                            continue;
                        }
                        for y in 0..1usize << k {
                            let parity = if y.count_ones() % 2 == 0 { c } else { -c };
                            terms.push(RuleTerm {
                                setting: idx,
                                outcome: scatter(y, support, n) | r_idx,
                                coeff: parity,
                            });
                        }
                    }
                    let target = Target {
                        element: (row, col),
                        part,
                    };
                    let nominal = owner
                        .get(&target)
                        .copied()
                        .filter(|l| members.iter().any(|&m| settings[m].label == *l));
                    let nominal = nominal.ok_or_else(|| Error::RuleValidation {
                        element: format!(
                            "{} (derived from {:?}, not listed for them)",
                            label_of(target),
                            members_labels(settings, members)
                        ),
                        error: f64::NAN,
                    })?;
                    rules.push(ExtractionRule {
                        setting_label: nominal.to_string(),
                        element: (row, col),
                        part,
                        terms,
                    });
                }
            }
        }
    }

    check_coverage(n, &rules).map_err(|t| fail(t, f64::NAN))?;
    validate_rules(settings, &rules, n)?;
    Ok(rules)
}

fn members_labels<T>(settings: &[MeasurementSetting<T>], members: &[usize]) -> Vec<String> {
    members.iter().map(|&m| settings[m].label.clone()).collect()
}

/// Every diagonal element and the real and imaginary part of every
/// upper-triangle element, each exactly once. Returns the first offender.
fn check_coverage<T>(n: usize, rules: &[ExtractionRule<T>]) -> std::result::Result<(), Target> {
    let d = 1usize << n;
    let mut seen: HashMap<Target, usize> = HashMap::new();
    for r in rules {
        *seen
            .entry(Target {
                element: r.element,
                part: r.part,
            })
            .or_default() += 1;
    }
    for row in 0..d {
        for col in row..d {
            let parts: &[Part] = if row == col {
                &[Part::Diag]
            } else {
                &[Part::Re, Part::Im]
            };
            for &part in parts {
                let t = Target {
                    element: (row, col),
                    part,
                };
                if seen.remove(&t) != Some(1) {
                    return Err(t);
                }
            }
        }
    }
    match seen.into_keys().next() {
        Some(extra) => Err(extra),
        None => Ok(()),
    }
}

/// Full-rank state with every entry nonzero and no special symmetry.
fn validation_state<T: Real>(n: usize) -> DensityMatrix<T> {
    let d = 1usize << n;
    let mut m = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let (rf, cf) = (r as f64, c as f64);
            m[(r, c)] = Complex::new(
                T::lit((1.3 * rf + 0.7 * cf + 0.1).sin()),
                T::lit((0.9 * rf - 1.1 * cf + 0.4).cos()),
            );
        }
    }
    let g = m.matmul(&m.dagger()).expect("square").hermitian_part();
    DensityMatrix::normalized(&g).expect("positive trace").0
}

fn validate_rules<T: Real>(
    settings: &[MeasurementSetting<T>],
    rules: &[ExtractionRule<T>],
    n: usize,
) -> Result<()> {
    let rho = validation_state::<T>(n);
    let tables = settings
        .iter()
        .map(|s| exact_probs(&rho, s))
        .collect::<Result<Vec<_>>>()?;
    let probs: Vec<&[T]> = tables.iter().map(|t| t.probs.as_slice()).collect();
    let tol = T::tol(1e-10).max(T::epsilon().sqrt() * T::lit(1e-2));
    for rule in rules {
        let z = rho.matrix()[rule.element];
        let want = match rule.part {
            Part::Diag | Part::Re => z.re,
            Part::Im => z.im,
        };
        let err = (rule.apply(&probs) - want).abs();
        if !(err <= tol) {
            return Err(Error::RuleValidation {
                element: rule.target().display(n),
                error: err.as_f64(),
            });
        }
    }
    Ok(())
}

/// Least-squares fit over the measurement map.
#[derive(Debug, Clone)]
pub struct LsqFit<T> {
    pub rho: DensityMatrix<T>,
    /// Euclidean norm of the probability residual over all settings.
    pub residual: T,
    /// Condition number of the normal matrix.
    pub condition: T,
}

/// Minimizes `sum_s |p_s - diag(U_s rho U_s^dagger)|^2` over Hermitian
/// unit-trace `rho = I/d + sum_k x_k B_k` (`B_k` a traceless Hermitian basis)
/// by the normal equations.
pub fn lsq_reconstruct<T: Real>(
    scheme: &TomographyScheme<T>,
    tables: &[ProbTable<T>],
) -> Result<LsqFit<T>> {
    let probs = scheme.match_tables(tables)?;
    let n = scheme.nqubits();
    let d = 1usize << n;
    let dt = T::lit(d as f64);
    let npar = d * d - 1;

    let mut rows: Vec<Vec<T>> = Vec::with_capacity(scheme.settings.len() * d);
    let mut rhs: Vec<T> = Vec::with_capacity(rows.capacity());
    for (s, p) in scheme.settings.iter().zip(&probs) {
        let u = s.unitary()?;
        for (m, &pm) in p.iter().enumerate() {
            let mut row = Vec::with_capacity(npar);
            for a in 0..d {
                for b in (a + 1)..d {
                    let z = u[(m, a)] * u[(m, b)].conj();
                    row.push(T::lit(2.0) * z.re);
                    row.push(-T::lit(2.0) * z.im);
                }
            }
            let last = u[(m, d - 1)].norm_sqr();
            for kk in 0..d - 1 {
                row.push(u[(m, kk)].norm_sqr() - last);
            }
            rows.push(row);
            rhs.push(pm - T::one() / dt);
        }
    }

    let mut normal = vec![vec![T::zero(); npar]; npar];
    let mut atb = vec![T::zero(); npar];
    for (row, &y) in rows.iter().zip(&rhs) {
        for i in 0..npar {
            if row[i] == T::zero() {
                continue;
            }
            atb[i] += row[i] * y;
            for j in 0..npar {
                normal[i][j] += row[i] * row[j];
            }
        }
    }
    let zeros = vec![vec![T::zero(); npar]; npar];
    let spectrum = eig_hermitian(&ComplexMatrix::from_parts(&normal, &zeros)?)?;
    let lmax = spectrum.values[0];
    let lmin = spectrum.min_value();
    let condition = if lmin > T::zero() {
        lmax / lmin
    } else {
        T::infinity()
    };
    if !(lmin > lmax * T::tol(1e-12)) {
        return Err(Error::SingularSystem {
            condition: condition.as_f64(),
        });
    }
    let x = solve_real(&normal, &atb, lmax * T::tol(1e-14)).ok_or(Error::SingularSystem {
        condition: condition.as_f64(),
    })?;

    let residual = rows
        .iter()
        .zip(&rhs)
        .map(|(row, &y)| {
            let fit: T = row.iter().zip(&x).map(|(&a, &b)| a * b).sum();
            (fit - y) * (fit - y)
        })
        .sum::<T>()
        .sqrt();

    let mut m = ComplexMatrix::identity(d).scale(T::one() / dt);
    let mut it = x.iter().copied();
    for a in 0..d {
        for b in (a + 1)..d {
            let re = it.next().expect("parameter count");
            let im = it.next().expect("parameter count");
            m[(a, b)] = Complex::new(re, im);
            m[(b, a)] = Complex::new(re, -im);
        }
    }
    let mut last = T::one() / dt;
    for kk in 0..d - 1 {
        let y = it.next().expect("parameter count");
        m[(kk, kk)].re += y;
        last -= y;
    }
    m[(d - 1, d - 1)] = Complex::new(last, T::zero());
    Ok(LsqFit {
        rho: DensityMatrix::new(m)?,
        residual,
        condition,
    })
}

/// `{"nqubits": n, "re": [[..]], "im": [[..]]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub nqubits: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

pub fn matrix_to_json(m: &ComplexMatrix<f64>) -> Value {
    let nqubits = m.rows().trailing_zeros() as usize;
    serde_json::to_value(MatrixJson {
        nqubits,
        re: m.re_rows(),
        im: m.im_rows(),
    })
    .expect("plain numbers serialize")
}

/// Parses the matrix without normalizing or validating it as a state.
pub fn matrix_from_json(v: &Value) -> Result<ComplexMatrix<f64>> {
    let j: MatrixJson = serde_json::from_value(v.clone())?;
    let d = 1usize
        .checked_shl(j.nqubits as u32)
        .filter(|_| j.nqubits <= 16)
        .ok_or_else(|| Error::Format(format!("nqubits {} out of range", j.nqubits)))?;
    let square = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
    if !square(&j.re) || !square(&j.im) {
        return Err(Error::Format(format!(
            "\"re\" and \"im\" must be {d}x{d} for nqubits = {}",
            j.nqubits
        )));
    }
    ComplexMatrix::from_parts(&j.re, &j.im)
}

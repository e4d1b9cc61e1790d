//! Dense complex linear algebra for registers of at most a few qubits.
//!
//! Basis index convention: qubit 0 is the most significant bit, so for three
//! qubits index `4*a + 2*b + c` labels `|a b c>`.

use std::ops::{Add, Index, IndexMut, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(d, T::zero());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::InvalidLength {
                expected: ncols,
                got: bad.len(),
            });
        }
        Self::new(rows.len(), ncols, rows.concat())
    }

    /// Builds a matrix from separate real and imaginary row-major parts.
    pub fn from_parts(re: &[Vec<T>], im: &[Vec<T>]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::InvalidLength {
                expected: re.len(),
                got: im.len(),
            });
        }
        let rows = re
            .iter()
            .zip(im)
            .map(|(r, i)| {
                if r.len() != i.len() {
                    return Err(Error::InvalidLength {
                        expected: r.len(),
                        got: i.len(),
                    });
                }
                Ok(r.iter().zip(i).map(|(&a, &b)| Complex::new(a, b)).collect())
            })
            .collect::<Result<Vec<Vec<_>>>>()?;
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn re_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)].re).collect())
            .collect()
    }

    pub fn im_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)].im).collect())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)];
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        self.diagonal()
            .into_iter()
            .fold(Complex::zero(), |a, b| a + b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: Complex<T>) -> Self {
        self.map(|z| z * s)
    }

    fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        matmul(self, other)
    }

    pub fn kron(&self, other: &Self) -> Self {
        kron(self, other)
    }

    pub fn apply(&self, v: &ComplexVector<T>) -> Result<ComplexVector<T>> {
        if self.cols != v.dim() {
            return Err(Error::DimensionMismatch {
                op: "apply",
                left: self.shape(),
                right: (v.dim(), 1),
            });
        }
        let out = (0..self.rows)
            .map(|r| (0..self.cols).fold(Complex::zero(), |acc, c| acc + self[(r, c)] * v[c]))
            .collect();
        Ok(ComplexVector::from_vec(out))
    }

    /// Largest entrywise modulus of `self - other`; `None` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> Option<T> {
        if self.shape() != other.shape() {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (*a - *b).norm())
                .fold(T::zero(), T::max),
        )
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// `max |h - h^dagger|` for square matrices.
    pub fn hermitian_deviation(&self) -> T {
        debug_assert!(self.is_square());
        let mut dev = T::zero();
        for r in 0..self.rows {
            for c in r..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// `(h + h^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(r, c)] = (self[(r, c)] + self[(c, r)].conj()) * half;
            }
        }
        out
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_deviation(&self) -> T {
        let prod = matmul(&self.dagger(), self).expect("square");
        prod.max_abs_diff(&Self::identity(self.cols))
            .expect("same shape")
    }

    pub fn cast<U: Real>(&self) -> ComplexMatrix<U> {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())))
                .collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[r * self.cols + c]
    }
}

// Elementwise sum and difference. Panics on shape mismatch.
impl<T: Real> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix add: shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<T: Real> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix sub: shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector<T> {
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexVector<T> {
    pub fn new(data: Vec<Complex<T>>) -> Result<Self> {
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { data })
    }

    pub(crate) fn from_vec(data: Vec<Complex<T>>) -> Self {
        Self { data }
    }

    pub fn from_real(data: &[T]) -> Self {
        Self {
            data: data.iter().map(|&x| Complex::new(x, T::zero())).collect(),
        }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut data = vec![Complex::zero(); dim];
        data[index] = Complex::one();
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.data
            .iter()
            .zip(&other.data)
            .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= T::epsilon() {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            data: self.data.iter().map(|z| z / n).collect(),
        })
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Self { data }
    }

    /// Index of the largest-modulus component (first one on ties).
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        for (i, z) in self.data.iter().enumerate() {
            if z.norm() > self.data[best].norm() {
                best = i;
            }
        }
        best
    }

    /// Multiplies by a global phase so the largest-modulus component is real
    /// and positive.
    pub fn fix_phase(&self) -> Self {
        let k = self.argmax_abs();
        let z = self.data[k];
        let n = z.norm();
        if n == T::zero() {
            return self.clone();
        }
        self.scale(z.conj() / n)
    }

    pub fn outer(&self) -> Result<ComplexMatrix<T>> {
        outer(self)
    }
}

impl<T> Index<usize> for ComplexVector<T> {
    type Output = Complex<T>;

    fn index(&self, i: usize) -> &Complex<T> {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for ComplexVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut Complex<T> {
        &mut self.data[i]
    }
}

/// Spectrum of a Hermitian matrix, eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct EigenSystem<T> {
    pub values: Vec<T>,
    pub vectors: Vec<ComplexVector<T>>,
}

impl<T: Real> EigenSystem<T> {
    /// `sum_i lambda_i v_i v_i^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        weighted_projectors(&self.values, &self.vectors)
    }

    pub fn min_value(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }
}

pub(crate) fn weighted_projectors<T: Real>(
    weights: &[T],
    vectors: &[ComplexVector<T>],
) -> ComplexMatrix<T> {
    let n = vectors.first().map_or(0, ComplexVector::dim);
    let mut out = ComplexMatrix::zeros(n, n);
    for (&w, v) in weights.iter().zip(vectors) {
        if w == T::zero() {
            continue;
        }
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] += v[r] * v[c].conj() * w;
            }
        }
    }
    out
}

pub fn matmul<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for r in 0..a.rows {
        for k in 0..a.cols {
            let x = a[(r, k)];
            if x.is_zero() {
                continue;
            }
            for c in 0..b.cols {
                out[(r, c)] += x * b[(k, c)];
            }
        }
    }
    Ok(out)
}

/// Kronecker product; `a` supplies the most significant index block.
pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let (p, q) = b.shape();
    let mut out = ComplexMatrix::zeros(a.rows * p, a.cols * q);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            for br in 0..p {
                for bc in 0..q {
                    out[(ar * p + br, ac * q + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// Rank-one projector `v v^dagger` of a unit vector.
pub fn outer<T: Real>(v: &ComplexVector<T>) -> Result<ComplexMatrix<T>> {
    let n = v.norm();
    if n <= T::epsilon() {
        return Err(Error::ZeroVector);
    }
    if (n - T::one()).abs() > T::tol(1e-10) {
        return Err(Error::NotNormalized { norm: n.as_f64() });
    }
    Ok(weighted_projectors(&[T::one()], std::slice::from_ref(v)))
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// The input is symmetrized before iterating. Sweeps stop once the
/// off-diagonal Frobenius norm drops to `1e-12` (relative to the matrix
/// scale when that exceeds one).
pub fn eig_hermitian<T: Real>(h: &ComplexMatrix<T>) -> Result<EigenSystem<T>> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            op: "eig_hermitian",
            left: h.shape(),
            right: (h.cols, h.rows),
        });
    }
    let dev = h.hermitian_deviation();
    if dev > T::tol(1e-8) {
        return Err(Error::NotHermitian {
            deviation: dev.as_f64(),
        });
    }
    let n = h.rows;
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::<T>::identity(n);
    let threshold = T::tol(1e-12) * h.frobenius_norm().max(T::one());

    let off_norm = |a: &ComplexMatrix<T>| {
        let mut s = T::zero();
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += a[(r, c)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off_norm(&a).as_f64(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut pairs: Vec<(T, ComplexVector<T>)> = (0..n)
        .map(|i| {
            let col = (0..n).map(|r| v[(r, i)]).collect();
            (a[(i, i)].re, ComplexVector::from_vec(col))
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(EigenSystem { values, vectors })
}

/// One Jacobi step annihilating `a[(p, q)]`: `a <- J^dagger a J`, `v <- v J`.
fn rotate<T: Real>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag <= T::min_positive_value().sqrt() {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Real symmetric rotation on the dephased 2x2 block, then D = diag(1, e^{-i phi}).
    let tau = (aqq - app) / (T::lit(2.0) * mag);
    let t = if tau >= T::zero() {
        T::one() / (tau + (T::one() + tau * tau).sqrt())
    } else {
        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = t * c;
    let phase = apq.conj() / mag; // e^{-i phi}
    let j_pp = Complex::new(c, T::zero());
    let j_pq = Complex::new(s, T::zero());
    let j_qp = phase * (-s);
    let j_qq = phase * c;

    let n = a.rows;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * j_pp + akq * j_qp;
        a[(k, q)] = akp * j_pq + akq * j_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = j_pp.conj() * apk + j_qp.conj() * aqk;
        a[(q, k)] = j_pq.conj() * apk + j_qq.conj() * aqk;
    }
    a[(p, q)] = Complex::zero();
    a[(q, p)] = Complex::zero();
    a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
    a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * j_pp + vkq * j_qp;
        v[(k, q)] = vkp * j_pq + vkq * j_qq;
    }
}

/// Number of qubits of a `2^n`-dimensional square matrix.
pub fn qubit_count<T: Real>(m: &ComplexMatrix<T>) -> Result<usize> {
    let d = m.rows;
    if !m.is_square() || d == 0 || !d.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            op: "qubit_count",
            left: m.shape(),
            right: (d.next_power_of_two(), d.next_power_of_two()),
        });
    }
    Ok(d.trailing_zeros() as usize)
}

/// Traces out every qubit not in `keep`. Kept qubits retain their relative
/// order; qubit 0 is the most significant.
pub fn partial_trace<T: Real>(m: &ComplexMatrix<T>, keep: &[usize]) -> Result<ComplexMatrix<T>> {
    let n = qubit_count(m)?;
    if keep.is_empty() {
        return Err(Error::InvalidSubsystem("empty keep set".into()));
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() {
        return Err(Error::InvalidSubsystem(format!(
            "duplicate qubit in {keep:?}"
        )));
    }
    if let Some(&bad) = sorted.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidQubit {
            index: bad,
            nqubits: n,
        });
    }
    let traced: Vec<usize> = (0..n).filter(|q| !sorted.contains(q)).collect();
    let bit = |q: usize| 1usize << (n - 1 - q);
    let spread = |local: usize, qubits: &[usize]| -> usize {
        let k = qubits.len();
        qubits
            .iter()
            .enumerate()
            .filter(|(pos, _)| local >> (k - 1 - pos) & 1 == 1)
            .fold(0, |acc, (_, &q)| acc | bit(q))
    };

    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for r in 0..dk {
        let rbase = spread(r, &sorted);
        for c in 0..dk {
            let cbase = spread(c, &sorted);
            let mut acc = Complex::zero();
            for t in 0..dt {
                let off = spread(t, &traced);
                acc += m[(rbase | off, cbase | off)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Solves the square real system `a x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot falls below `pivot_tol`.
pub fn solve_real<T: Real>(a: &[Vec<T>], b: &[T], pivot_tol: T) -> Option<Vec<T>> {
    let n = b.len();
    let mut m: Vec<Vec<T>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| {
            m[x][col]
                .abs()
                .partial_cmp(&m[y][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv][col].abs() <= pivot_tol {
            return None;
        }
        m.swap(col, piv);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..=n {
                let delta = f * m[col][k];
                m[r][k] -= delta;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s = ((r + 1)..n).fold(m[r][n], |acc, k| acc - m[r][k] * x[k]);
        x[r] = s / m[r][r];
    }
    Some(x)
}

/// Inverse of a square real matrix, column by column.
pub fn invert_real<T: Real>(a: &[Vec<T>], pivot_tol: T) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        cols.push(solve_real(a, &e, pivot_tol)?);
    }
    Some(
        (0..n)
            .map(|r| (0..n).map(|c| cols[c][r]).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn hadamard() -> M {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        M::from_rows(&[vec![c(s, 0.0), c(s, 0.0)], vec![c(s, 0.0), c(-s, 0.0)]]).unwrap()
    }

    fn cnot() -> M {
        let mut m = M::zeros(4, 4);
        for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(r, col)] = c(1.0, 0.0);
        }
        m
    }

    fn w_amplitudes() -> [f64; 8] {
        let a = 1.0 / 3f64.sqrt();
        [0.0, a, a, 0.0, a, 0.0, 0.0, 0.0]
    }

    fn w_projector() -> M {
        outer(&ComplexVector::from_real(&w_amplitudes())).unwrap()
    }

    #[test]
    fn matmul_identities() {
        let h = hadamard();
        assert!(M::identity(2).matmul(&h).unwrap().max_abs_diff(&h).unwrap() < 1e-15);
        assert!(h.matmul(&h).unwrap().max_abs_diff(&M::identity(2)).unwrap() < 1e-15);
        let cx = cnot();
        assert_eq!(cx.matmul(&cx).unwrap(), M::identity(4));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let err = M::zeros(2, 3).matmul(&M::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn new_rejects_nan_and_bad_length() {
        assert!(matches!(
            M::new(1, 1, vec![c(f64::NAN, 0.0)]),
            Err(Error::NonFinite)
        ));
        assert!(matches!(
            M::new(2, 2, vec![c(0.0, 0.0)]),
            Err(Error::InvalidLength { .. })
        ));
    }

    #[test]
    fn kron_small_cases() {
        assert_eq!(M::identity(2).kron(&M::identity(2)), M::identity(4));
        let p0 = M::from_diag(&[1.0, 0.0]);
        assert_eq!(p0.kron(&p0), M::from_diag(&[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn kron_of_stochastic_matrices_is_stochastic() {
        let fa = M::from_rows(&[
            vec![c(0.992, 0.0), c(0.023, 0.0)],
            vec![c(0.008, 0.0), c(0.977, 0.0)],
        ])
        .unwrap();
        let fb = M::from_rows(&[
            vec![c(0.991, 0.0), c(0.004, 0.0)],
            vec![c(0.009, 0.0), c(0.996, 0.0)],
        ])
        .unwrap();
        let f = fa.kron(&fb);
        for col in 0..4 {
            let s: f64 = (0..4).map(|r| f[(r, col)].re).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn outer_examples() {
        let e0 = ComplexVector::<f64>::basis(4, 0);
        assert_eq!(outer(&e0).unwrap(), M::from_diag(&[1.0, 0.0, 0.0, 0.0]));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = ComplexVector::from_real(&[s, s]);
        let p = outer(&plus).unwrap();
        for r in 0..2 {
            for col in 0..2 {
                assert!((p[(r, col)] - c(0.5, 0.0)).norm() < 1e-15);
            }
        }
        let w = w_projector();
        for r in 0..8 {
            for col in 0..8 {
                let expect = if [1, 2, 4].contains(&r) && [1, 2, 4].contains(&col) {
                    1.0 / 3.0
                } else {
                    0.0
                };
                assert!((w[(r, col)] - c(expect, 0.0)).norm() < 1e-15);
            }
        }
        assert!((w.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outer_rejects_zero_and_unnormalized() {
        assert!(matches!(
            outer(&ComplexVector::<f64>::from_real(&[0.0, 0.0])),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            outer(&ComplexVector::<f64>::from_real(&[1.0, 1.0])),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn eig_diagonal_and_pauli_x() {
        let es = eig_hermitian(&M::from_diag(&[1.0 / 3.0, 2.0 / 3.0])).unwrap();
        assert!((es.values[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((es.values[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((es.vectors[0][1].norm() - 1.0).abs() < 1e-15);

        let x = M::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let es = eig_hermitian(&x).unwrap();
        assert!((es.values[0] - 1.0).abs() < 1e-14);
        assert!((es.values[1] + 1.0).abs() < 1e-14);
        let v = &es.vectors[0];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].norm() - s).abs() < 1e-14);
        assert!((v[0] - v[1]).norm() < 1e-14);
    }

    /// Determinant by Laplace expansion, used as an independent
    /// characteristic-polynomial oracle.
    fn det(m: &[Vec<f64>]) -> f64 {
        if m.len() == 1 {
            return m[0][0];
        }
        (0..m.len())
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, &x)| x)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * det(&minor)
            })
            .sum()
    }

    #[test]
    fn eig_of_w_two_qubit_marginal() {
        // Oracle: partial trace by direct amplitude sums, then roots of the
        // characteristic polynomial checked by Laplace determinants.
        let a = w_amplitudes();
        let mut rab = vec![vec![0.0; 4]; 4];
        for r in 0..4 {
            for col in 0..4 {
                rab[r][col] = (0..2).map(|k| a[2 * r + k] * a[2 * col + k]).sum();
            }
        }
        for lambda in [2.0 / 3.0, 1.0 / 3.0, 0.0] {
            let shifted: Vec<Vec<f64>> = (0..4)
                .map(|r| {
                    (0..4)
                        .map(|col| rab[r][col] - if r == col { lambda } else { 0.0 })
                        .collect()
                })
                .collect();
            assert!(det(&shifted).abs() < 1e-15);
        }

        let reduced = partial_trace(&w_projector(), &[0, 1]).unwrap();
        let es = eig_hermitian(&reduced).unwrap();
        let expect = [2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0];
        for (got, want) in es.values.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = M::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_works_in_f32() {
        let m = ComplexMatrix::<f32>::from_rows(&[
            vec![Complex::new(2.0, 0.0), Complex::new(0.0, 1.0)],
            vec![Complex::new(0.0, -1.0), Complex::new(2.0, 0.0)],
        ])
        .unwrap();
        let es = eig_hermitian(&m).unwrap();
        assert!((es.values[0] - 3.0).abs() < 1e-5);
        assert!((es.values[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn partial_trace_of_w() {
        // Oracle: direct sums over the amplitudes of the W state.
        let a = w_amplitudes();
        let w = w_projector();
        let ra = partial_trace(&w, &[0]).unwrap();
        for r in 0..2 {
            for col in 0..2 {
                let want: f64 = (0..4).map(|t| a[4 * r + t] * a[4 * col + t]).sum();
                assert!((ra[(r, col)] - c(want, 0.0)).norm() < 1e-15);
            }
        }
        assert!((ra[(0, 0)].re - 2.0 / 3.0).abs() < 1e-15);
        assert!((ra[(1, 1)].re - 1.0 / 3.0).abs() < 1e-15);

        let rab = partial_trace(&w, &[0, 1]).unwrap();
        let third = 1.0 / 3.0;
        let expect = M::from_rows(&[
            vec![c(third, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(third, 0.0), c(third, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(third, 0.0), c(third, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert!(rab.max_abs_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let ra = M::from_rows(&[
            vec![c(0.7, 0.0), c(0.1, 0.2)],
            vec![c(0.1, -0.2), c(0.3, 0.0)],
        ])
        .unwrap();
        let rb = M::from_rows(&[
            vec![c(0.4, 0.0), c(0.0, -0.1)],
            vec![c(0.0, 0.1), c(0.6, 0.0)],
        ])
        .unwrap();
        let prod = ra.kron(&rb);
        assert!(
            partial_trace(&prod, &[0])
                .unwrap()
                .max_abs_diff(&ra)
                .unwrap()
                < 1e-15
        );
        assert!(
            partial_trace(&prod, &[1])
                .unwrap()
                .max_abs_diff(&rb)
                .unwrap()
                < 1e-15
        );
    }

    #[test]
    fn partial_trace_errors() {
        let w = w_projector();
        assert!(matches!(
            partial_trace(&w, &[]),
            Err(Error::InvalidSubsystem(_))
        ));
        assert!(matches!(
            partial_trace(&w, &[3]),
            Err(Error::InvalidQubit { .. })
        ));
        assert!(matches!(
            partial_trace(&w, &[1, 1]),
            Err(Error::InvalidSubsystem(_))
        ));
    }

    #[test]
    fn real_solver_and_inverse() {
        let a: Vec<Vec<f64>> = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_real(&a, &[3.0, 5.0], 1e-12).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        let inv = invert_real(&a, 1e-12).unwrap();
        assert!((inv[0][0] - 0.6).abs() < 1e-15);
        assert!(solve_real(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 2.0], 1e-12).is_none());
    }
}

//! Pauli strings, dense operators on `n` qubits, Hermitian eigensystems and
//! the handful of matrix kernels (exponentials, trace norm, vectorization)
//! shared by every other module.
//!
//! Basis convention: qubit 0 is the leftmost tensor factor, i.e. the most
//! significant bit of a basis index. `|0>` is the `Z = +1` state, so spin
//! `+1` corresponds to bit 0.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;

/// Default cap on qubits for dense operators.
pub const MAX_OPERATOR_QUBITS: usize = 14;
/// Default cap on qubits for dense superoperators (`4^n` by `4^n`).
pub const MAX_SUPEROPERATOR_QUBITS: usize = 7;
/// Default cap on spins for exhaustive configuration enumeration.
pub const MAX_ENUMERATION_SPINS: usize = 25;

static OPERATOR_CAP: AtomicUsize = AtomicUsize::new(MAX_OPERATOR_QUBITS);
static SUPEROP_CAP: AtomicUsize = AtomicUsize::new(MAX_SUPEROPERATOR_QUBITS);
static ENUMERATION_CAP: AtomicUsize = AtomicUsize::new(MAX_ENUMERATION_SPINS);

/// Process-wide resource caps; the CLI sets these from its configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub operator_qubits: usize,
    pub superop_qubits: usize,
    pub enumeration_spins: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            operator_qubits: MAX_OPERATOR_QUBITS,
            superop_qubits: MAX_SUPEROPERATOR_QUBITS,
            enumeration_spins: MAX_ENUMERATION_SPINS,
        }
    }
}

impl Caps {
    pub fn current() -> Caps {
        Caps {
            operator_qubits: OPERATOR_CAP.load(Ordering::Relaxed),
            superop_qubits: SUPEROP_CAP.load(Ordering::Relaxed),
            enumeration_spins: ENUMERATION_CAP.load(Ordering::Relaxed),
        }
    }

    pub fn install(self) {
        OPERATOR_CAP.store(self.operator_qubits, Ordering::Relaxed);
        SUPEROP_CAP.store(self.superop_qubits, Ordering::Relaxed);
        ENUMERATION_CAP.store(self.enumeration_spins, Ordering::Relaxed);
    }
}

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

fn check_cap(what: &'static str, n: usize, cap: &AtomicUsize) -> Result<()> {
    let cap = cap.load(Ordering::Relaxed);
    if n > cap {
        return Err(Error::DimensionCap { what, qubits: n, cap });
    }
    Ok(())
}

pub fn check_operator_cap(n: usize) -> Result<()> {
    check_cap("dense operators", n, &OPERATOR_CAP)
}

pub fn check_superop_cap(n: usize) -> Result<()> {
    check_cap("dense superoperators", n, &SUPEROP_CAP)
}

pub fn check_enumeration_cap(n: usize) -> Result<()> {
    check_cap("exhaustive enumeration", n, &ENUMERATION_CAP)
}

#[inline]
pub fn bit_of(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

#[inline]
pub fn qubit_mask(qubit: usize, n: usize) -> usize {
    1 << (n - 1 - qubit)
}

/// Spin value (+1 / -1) of `qubit` in basis state `index`.
#[inline]
pub fn spin_of(index: usize, qubit: usize, n: usize) -> i8 {
    1 - 2 * bit_of(index, qubit, n) as i8
}

pub fn spins_of(index: usize, n: usize) -> Vec<i8> {
    (0..n).map(|q| spin_of(index, q, n)).collect()
}

pub fn index_of_spins(spins: &[i8]) -> usize {
    let n = spins.len();
    spins
        .iter()
        .enumerate()
        .fold(0, |acc, (q, &s)| if s < 0 { acc | qubit_mask(q, n) } else { acc })
}

// ---------------------------------------------------------------------------
// Pauli algebra
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' | 'i' | '_' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn from_xz(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// `self * other = i^k * result`; returns `(k, result)`.
    pub fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    pub fn matrix(self) -> CMat {
        let m = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        CMat::from_row_slice(2, 2, &m)
    }
}

/// Phase `i^k`, `k` taken mod 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Phase(pub u8);

impl Phase {
    pub fn value(self) -> C64 {
        match self.0 % 4 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        }
    }

    pub fn times(self, k: u8) -> Phase {
        Phase((self.0 + k) % 4)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    letters: Vec<Pauli>,
    phase: Phase,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, phase: Phase) -> Self {
        PauliString { letters, phase }
    }

    pub fn identity(n: usize) -> Self {
        PauliString::new(vec![Pauli::I; n], Phase(0))
    }

    /// Single-qubit Pauli `p` acting on `qubit` of an `n`-qubit register.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Result<Self> {
        if qubit >= n {
            return Err(Error::QubitOutOfRange { index: qubit, n });
        }
        let mut letters = vec![Pauli::I; n];
        letters[qubit] = p;
        Ok(PauliString::new(letters, Phase(0)))
    }

    /// Product of `p` on every listed qubit.
    pub fn on_sites(n: usize, sites: &[usize], p: Pauli) -> Result<Self> {
        let mut letters = vec![Pauli::I; n];
        for &q in sites {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n });
            }
            letters[q] = p;
        }
        Ok(PauliString::new(letters, Phase(0)))
    }

    /// Parses strings such as `XZZXI`, `-YI`, `+iZZ`, `-iX`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        let (phase, body) = if let Some(r) = t.strip_prefix("-i") {
            (Phase(3), r)
        } else if let Some(r) = t.strip_prefix("+i") {
            (Phase(1), r)
        } else if let Some(r) = t.strip_prefix('-') {
            (Phase(2), r)
        } else if let Some(r) = t.strip_prefix('+') {
            (Phase(0), r)
        } else {
            (Phase(0), t)
        };
        if body.is_empty() {
            return Err(Error::Parse(format!("empty Pauli string '{s}'")));
        }
        let letters = body
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli letter '{c}' in '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::new(letters, phase))
    }

    pub fn n(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&q| self.letters[q] != Pauli::I).collect()
    }

    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        let mut phase = Phase((self.phase.0 + other.phase.0) % 4);
        let letters = self
            .letters
            .iter()
            .zip(&other.letters)
            .map(|(&a, &b)| {
                let (k, p) = a.mul(b);
                phase = phase.times(k);
                p
            })
            .collect();
        Ok(PauliString::new(letters, phase))
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }

    fn masks(&self) -> (usize, usize, u8) {
        let n = self.n();
        let mut xm = 0;
        let mut zm = 0;
        let mut ny = 0u8;
        for (q, &p) in self.letters.iter().enumerate() {
            if p.has_x() {
                xm |= qubit_mask(q, n);
            }
            if p.has_z() {
                zm |= qubit_mask(q, n);
            }
            if p == Pauli::Y {
                ny += 1;
            }
        }
        (xm, zm, ny)
    }

    /// Nonzero entries `(row, col, value)`; one per column.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        let dim = 1usize << self.n();
        let (xm, zm, ny) = self.masks();
        let base = self.phase.times(ny % 4);
        (0..dim)
            .map(|j| {
                let sign = if (j & zm).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                (j ^ xm, j, base.value() * sign)
            })
            .collect()
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        check_operator_cap(self.n())?;
        let dim = 1usize << self.n();
        let mut m = CMat::zeros(dim, dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        let mut op = DenseOperator::from_matrix_unchecked(self.n(), m);
        op.flags.hermitian = self.phase.0 % 2 == 0;
        Ok(op)
    }

    pub fn to_sparse(&self) -> SparseOp {
        SparseOp::from_entries(1 << self.n(), self.entries())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase.0 % 4 {
            0 => "",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        let body: String = self.letters.iter().map(|p| p.to_char()).collect();
        write!(f, "{prefix}{body}")
    }
}

// ---------------------------------------------------------------------------
// Dense operators
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpFlags {
    pub hermitian: bool,
    pub projector: bool,
    pub density: bool,
}

/// A `2^n x 2^n` complex matrix with verified structural flags.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    n_qubits: usize,
    mat: CMat,
    flags: OpFlags,
}

impl DenseOperator {
    pub fn new(n_qubits: usize, mat: CMat) -> Result<Self> {
        check_operator_cap(n_qubits)?;
        let dim = 1usize << n_qubits;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(DenseOperator {
            n_qubits,
            mat,
            flags: OpFlags::default(),
        })
    }

    /// Infers the qubit count from the matrix dimension.
    pub fn from_matrix(mat: CMat) -> Result<Self> {
        let dim = mat.nrows();
        if dim == 0 || !dim.is_power_of_two() || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim.next_power_of_two(),
                got: dim,
            });
        }
        DenseOperator::new(dim.trailing_zeros() as usize, mat)
    }

    pub(crate) fn from_matrix_unchecked(n_qubits: usize, mat: CMat) -> Self {
        DenseOperator {
            n_qubits,
            mat,
            flags: OpFlags::default(),
        }
    }

    pub fn from_real(n_qubits: usize, m: &DMatrix<f64>) -> Result<Self> {
        DenseOperator::new(n_qubits, m.map(|x| C64::new(x, 0.0)))
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_operator_cap(n)?;
        let d = 1 << n;
        let mut op = DenseOperator::from_matrix_unchecked(n, CMat::identity(d, d));
        op.flags.hermitian = true;
        op.flags.projector = true;
        Ok(op)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        check_operator_cap(n)?;
        let d = 1 << n;
        Ok(DenseOperator::from_matrix_unchecked(n, CMat::zeros(d, d)))
    }

    pub fn diagonal(n: usize, diag: &[f64]) -> Result<Self> {
        check_operator_cap(n)?;
        let d = 1 << n;
        if diag.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: diag.len(),
            });
        }
        let mut m = CMat::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        let mut op = DenseOperator::from_matrix_unchecked(n, m);
        op.flags.hermitian = true;
        Ok(op)
    }

    /// Projector onto the span of the given computational basis states.
    pub fn basis_projector(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        check_operator_cap(n)?;
        let d = 1 << n;
        let mut m = CMat::zeros(d, d);
        for i in members {
            if i >= d {
                return Err(Error::InvalidParameter(format!("basis index {i} >= {d}")));
            }
            m[(i, i)] = ONE;
        }
        let mut op = DenseOperator::from_matrix_unchecked(n, m);
        op.flags.hermitian = true;
        op.flags.projector = true;
        Ok(op)
    }

    pub fn pure_state(n: usize, psi: &DVector<C64>) -> Result<Self> {
        check_operator_cap(n)?;
        let nrm = psi.norm();
        if nrm == 0.0 {
            return Err(Error::NotDensity("zero vector".into()));
        }
        let v = psi / C64::new(nrm, 0.0);
        let mut op = DenseOperator::new(n, &v * v.adjoint())?;
        op.flags.hermitian = true;
        op.flags.projector = true;
        op.flags.density = true;
        Ok(op)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn flags(&self) -> OpFlags {
        self.flags
    }

    pub fn dagger(&self) -> DenseOperator {
        DenseOperator {
            n_qubits: self.n_qubits,
            mat: self.mat.adjoint(),
            flags: self.flags,
        }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn scale(&self, s: C64) -> DenseOperator {
        DenseOperator::from_matrix_unchecked(self.n_qubits, &self.mat * s)
    }

    pub fn add(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.same_dim(other)?;
        Ok(DenseOperator::from_matrix_unchecked(self.n_qubits, &self.mat + &other.mat))
    }

    pub fn sub(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.same_dim(other)?;
        Ok(DenseOperator::from_matrix_unchecked(self.n_qubits, &self.mat - &other.mat))
    }

    pub fn matmul(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.same_dim(other)?;
        Ok(DenseOperator::from_matrix_unchecked(self.n_qubits, &self.mat * &other.mat))
    }

    fn same_dim(&self, other: &DenseOperator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Largest entry of `A - A^dagger`, relative to `max(1, max|A_ij|)`.
    pub fn hermiticity_residual(&self) -> f64 {
        let scale = self.mat.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let d = self.dim();
        let mut r = 0.0f64;
        for i in 0..d {
            for j in i..d {
                r = r.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        r / scale
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    pub fn into_hermitian(mut self, tol: f64) -> Result<Self> {
        let r = self.hermiticity_residual();
        if r > tol {
            return Err(Error::NotHermitian { residual: r });
        }
        self.flags.hermitian = true;
        Ok(self)
    }

    pub fn into_projector(mut self, tol: f64) -> Result<Self> {
        let r = self.hermiticity_residual();
        if r > tol {
            return Err(Error::NotHermitian { residual: r });
        }
        let sq = &self.mat * &self.mat;
        let res = (&sq - &self.mat).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if res > tol {
            return Err(Error::NotProjector { residual: res });
        }
        self.flags.hermitian = true;
        self.flags.projector = true;
        Ok(self)
    }

    pub fn into_density(mut self, tol: f64) -> Result<Self> {
        let r = self.hermiticity_residual();
        if r > tol {
            return Err(Error::NotHermitian { residual: r });
        }
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::NotDensity(format!("trace {tr}")));
        }
        let es = eig_hermitian(&self.clone().into_hermitian(tol)?)?;
        let min = es.values.first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(Error::Positivity(min));
        }
        self.flags.hermitian = true;
        self.flags.density = true;
        Ok(self)
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        op_norm(&self.mat)
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| i == j || self.mat[(i, j)] == ZERO))
    }

    pub fn diag_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

pub fn trace_real(m: &CMat) -> f64 {
    m.trace().re
}

/// Trace norm. Hermitian inputs use the eigenvalues, others the singular values.
pub fn trace_norm(m: &CMat) -> f64 {
    let d = m.nrows();
    if d == 0 {
        return 0.0;
    }
    let scale = max_abs(m).max(1e-300);
    let herm = (0..d).all(|i| (i..d).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= 1e-13 * scale));
    if herm {
        let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        hermitian_eigenvalues(&h).iter().map(|x| x.abs()).sum()
    } else {
        m.clone().svd(false, false).singular_values.iter().sum()
    }
}

/// Eigenvalues of a Hermitian matrix, unsorted. Uses a real solver when possible.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.iter().all(|z| z.im == 0.0) {
        let r = m.map(|z| z.re);
        r.symmetric_eigenvalues().iter().copied().collect()
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    }
}

// ---------------------------------------------------------------------------
// Eigensystems
// ---------------------------------------------------------------------------

/// Ascending eigenvalues with orthonormal eigenvectors (columns) and the
/// index ranges of degenerate clusters.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub n_qubits: usize,
    pub values: Vec<f64>,
    pub vectors: CMat,
    pub clusters: Vec<std::ops::Range<usize>>,
    pub degeneracy_tol: f64,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V f(Lambda) V^dagger`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> CMat {
        let d = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..d {
            let s = f(self.values[j]);
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMat {
        self.apply_fn(|x| C64::new(x, 0.0))
    }

    /// Writes an operator in the eigenbasis: `V^dagger A V`.
    pub fn to_eigenbasis(&self, a: &CMat) -> CMat {
        self.vectors.adjoint() * a * &self.vectors
    }

    pub fn from_eigenbasis(&self, a: &CMat) -> CMat {
        &self.vectors * a * self.vectors.adjoint()
    }

    pub fn cluster_of(&self) -> Vec<usize> {
        let mut c = vec![0; self.dim()];
        for (k, r) in self.clusters.iter().enumerate() {
            for i in r.clone() {
                c[i] = k;
            }
        }
        c
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Minimal eigenvalue.
    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }
}

pub fn degeneracy_tolerance(norm: f64) -> f64 {
    1e-9 * norm.max(1.0)
}

/// Hermitian eigendecomposition. Diagonal inputs keep the computational
/// basis as eigenbasis (ties broken by basis index), so classical
/// Hamiltonians have permutation eigenvectors.
pub fn eig_hermitian(h: &DenseOperator) -> Result<EigenSystem> {
    let r = h.hermiticity_residual();
    if r > 1e-9 {
        return Err(Error::NotHermitian { residual: r });
    }
    let d = h.dim();
    let n = h.n_qubits();
    let (values, vectors) = if h.is_diagonal() {
        let diag = h.diag_real();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
        let mut v = CMat::zeros(d, d);
        for (col, &i) in order.iter().enumerate() {
            v[(i, col)] = ONE;
        }
        (order.iter().map(|&i| diag[i]).collect::<Vec<_>>(), v)
    } else if h.mat.iter().all(|z| z.im == 0.0) {
        let re = h.mat.map(|z| z.re);
        let re = (&re + re.transpose()) * 0.5;
        let se = re.symmetric_eigen();
        sort_eigen(se.eigenvalues.as_slice(), &se.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let m = (&h.mat + h.mat.adjoint()) * C64::new(0.5, 0.0);
        let se = m.symmetric_eigen();
        sort_eigen(se.eigenvalues.as_slice(), &se.eigenvectors)
    };
    let norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = degeneracy_tolerance(norm);
    let clusters = cluster_sorted(&values, tol);
    let mut es = EigenSystem {
        n_qubits: n,
        values,
        vectors,
        clusters,
        degeneracy_tol: tol,
    };
    reorthonormalize(&mut es);
    Ok(es)
}

fn sort_eigen(vals: &[f64], vecs: &CMat) -> (Vec<f64>, CMat) {
    let d = vals.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut v = CMat::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        v.set_column(col, &vecs.column(k));
    }
    (order.iter().map(|&k| vals[k]).collect(), v)
}

/// Groups an ascending list into runs whose consecutive gaps are `<= tol`.
pub fn cluster_sorted(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn reorthonormalize(es: &mut EigenSystem) {
    for r in es.clusters.clone() {
        if r.len() < 2 {
            continue;
        }
        for j in r.clone() {
            let mut v = es.vectors.column(j).clone_owned();
            for k in r.start..j {
                let u = es.vectors.column(k);
                let ov = u.dotc(&v);
                v -= u * ov;
            }
            let nrm = v.norm();
            es.vectors.set_column(j, &(v / C64::new(nrm, 0.0)));
        }
    }
}

/// `exp(s H)` for Hermitian `H`.
///
/// Large arguments are evaluated as `exp(s (H - c)) * exp(s c)` with `c`
/// the extremal eigenvalue; fails if the rescaling factor overflows.
pub fn exp_hermitian(h: &DenseOperator, s: f64) -> Result<DenseOperator> {
    let es = eig_hermitian(h)?;
    exp_from_eigen(&es, s)
}

pub fn exp_from_eigen(es: &EigenSystem, s: f64) -> Result<DenseOperator> {
    let (m, log_scale) = exp_scaled(es, s);
    if log_scale > 700.0 {
        return Err(Error::Overflow(format!("exp scale factor e^{log_scale:.1}")));
    }
    let mut op = DenseOperator::from_matrix_unchecked(es.n_qubits, m * C64::new(log_scale.exp(), 0.0));
    op.flags.hermitian = true;
    Ok(op)
}

/// Returns `(M, c)` with `exp(s H) = M * e^c` and `max eig(M) = 1`.
pub fn exp_scaled(es: &EigenSystem, s: f64) -> (CMat, f64) {
    let shift = es
        .values
        .iter()
        .map(|&v| s * v)
        .fold(f64::NEG_INFINITY, f64::max);
    (es.apply_fn(|x| C64::new((s * x - shift).exp(), 0.0)), shift)
}

/// Gibbs state `exp(-beta H) / Tr exp(-beta H)`.
pub fn gibbs_state(es: &EigenSystem, beta: f64) -> DenseOperator {
    let (m, _) = exp_scaled(es, -beta);
    let z = trace_real(&m);
    let mut op = DenseOperator::from_matrix_unchecked(es.n_qubits, m / C64::new(z, 0.0));
    op.flags.hermitian = true;
    op.flags.density = true;
    op
}

/// `exp(-i H t)`.
pub fn unitary_evolution(es: &EigenSystem, t: f64) -> CMat {
    es.apply_fn(|x| C64::from_polar(1.0, -x * t))
}

/// Principal square root of a positive semidefinite Hermitian operator.
pub fn psd_sqrt(es: &EigenSystem) -> CMat {
    es.apply_fn(|x| C64::new(x.max(0.0).sqrt(), 0.0))
}

// ---------------------------------------------------------------------------
// Superoperators
// ---------------------------------------------------------------------------

/// Column-stacking vectorization: `vec(A X B) = (B^T (x) A) vec(X)`.
pub fn vec_of(m: &CMat) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<C64>, d: usize) -> CMat {
    CMat::from_column_slice(d, d, v.as_slice())
}

/// Superoperator matrix `sum_k conj(K_k) (x) K_k` of a Kraus family.
pub fn vectorize_superop(kraus: &[CMat]) -> Result<CMat> {
    let d = kraus.first().map(|k| k.nrows()).unwrap_or(1);
    let n = d.trailing_zeros() as usize;
    check_superop_cap(n)?;
    let mut s = CMat::zeros(d * d, d * d);
    for k in kraus {
        if k.nrows() != d || k.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: k.nrows(),
            });
        }
        s += k.map(|z| z.conj()).kronecker(k);
    }
    Ok(s)
}

/// Applies a Kraus family directly: `sum_k K rho K^dagger`.
pub fn apply_kraus(kraus: &[CMat], rho: &CMat) -> CMat {
    let mut out = CMat::zeros(rho.nrows(), rho.ncols());
    for k in kraus {
        out += k * rho * k.adjoint();
    }
    out
}

// ---------------------------------------------------------------------------
// Sparse operators
// ---------------------------------------------------------------------------

/// Coordinate-format sparse matrix used for fast channel application.
#[derive(Clone, Debug)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_entries(dim: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != ZERO);
        SparseOp { dim, entries: merged }
    }

    pub fn from_dense(m: &CMat, tol: f64) -> Self {
        let d = m.nrows();
        let mut e = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let v = m[(i, j)];
                if v.norm() > tol {
                    e.push((i, j, v));
                }
            }
        }
        SparseOp::from_entries(d, e)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `A rho A^dagger`, accumulated into `out` with weight `w`.
    pub fn sandwich_into(&self, rho: &CMat, w: f64, out: &mut CMat) {
        for &(i, j, a) in &self.entries {
            let a = a * w;
            for &(l, m, b) in &self.entries {
                out[(i, l)] += a * rho[(j, m)] * b.conj();
            }
        }
    }

    /// `A rho` accumulated into `out` with coefficient `w`.
    pub fn left_mul_into(&self, rho: &CMat, w: C64, out: &mut CMat) {
        let d = rho.ncols();
        for &(i, j, a) in &self.entries {
            let aw = a * w;
            for c in 0..d {
                out[(i, c)] += aw * rho[(j, c)];
            }
        }
    }

    /// `rho A` accumulated into `out` with coefficient `w`.
    pub fn right_mul_into(&self, rho: &CMat, w: C64, out: &mut CMat) {
        let d = rho.nrows();
        for &(j, c, a) in &self.entries {
            let aw = a * w;
            for r in 0..d {
                out[(r, c)] += rho[(r, j)] * aw;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

pub fn random_complex_matrix(d: usize, rng: &mut crate::rng::Rng) -> CMat {
    CMat::from_fn(d, d, |_, _| {
        C64::new(gauss(rng), gauss(rng))
    })
}

pub(crate) fn gauss(rng: &mut crate::rng::Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_hermitian(n: usize, rng: &mut crate::rng::Rng) -> Result<DenseOperator> {
    check_operator_cap(n)?;
    let g = random_complex_matrix(1 << n, rng);
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    DenseOperator::new(n, h)?.into_hermitian(1e-12)
}

/// Haar-ish random pure state.
pub fn random_pure_state(n: usize, rng: &mut crate::rng::Rng) -> Result<DenseOperator> {
    let d = 1 << n;
    let v = DVector::from_fn(d, |_, _| C64::new(gauss(rng), gauss(rng)));
    DenseOperator::pure_state(n, &v)
}

/// Random full-rank density matrix `G G^dagger / Tr`.
pub fn random_density(n: usize, rng: &mut crate::rng::Rng) -> Result<DenseOperator> {
    check_operator_cap(n)?;
    let g = random_complex_matrix(1 << n, rng);
    let m = &g * g.adjoint();
    let tr = trace_real(&m);
    let mut op = DenseOperator::new(n, m / C64::new(tr, 0.0))?;
    op.flags.hermitian = true;
    op.flags.density = true;
    Ok(op)
}

//! Dense complex matrices and the density-matrix type.
//!
//! Every Hilbert space in this crate is small (at most a few dozen states),
//! so matrices are stored densely in row-major order and all operations are
//! straightforward loops.

use std::fmt::Write as _;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on `‖ρ − ρ†‖_max` accepted by [`DensityMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `|Tr ρ − 1|` accepted by [`DensityMatrix::new`].
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted by [`DensityMatrix::new`].
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix has {rows}x{cols} shape but {len} entries")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("not Hermitian (max |ρ − ρ†| = {0:e})")]
    NotHermitian(f64),
    #[error("trace is not 1 (got {0})")]
    TraceNotUnit(f64),
    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("dimension {dim} does not factor as {factors:?}")]
    Factorization { dim: usize, factors: Vec<usize> },
    #[error("integration drift beyond tolerance {tol:e}: anti-Hermitian part {hermitian:e}, trace error {trace:e}")]
    DriftExceeded { hermitian: f64, trace: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![ONE; dim])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::BadShape {
                rows: r,
                cols: c,
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::new(r, c, rows.concat())
    }

    /// `|i⟩⟨j|` in a `dim`-dimensional space.
    pub fn basis_operator(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        m[(i, j)] = ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `‖M − M†‖_max`
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn try_matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(self.zip_with(rhs, |a, b| a + b))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(self.zip_with(rhs, |a, b| a - b))
    }

    /// Hermitian eigenvalues in ascending order. Only the Hermitian part of
    /// `self` is used.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()));
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        Ok(eig)
    }

    /// Text dump: one row per line, tab-separated `re+imj` entries with 17
    /// significant digits.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    out.push('\t');
                }
                let z = self[(i, j)];
                let sign = if z.im.is_sign_negative() { '-' } else { '+' };
                let _ = write!(out, "{:.16e}{}{:.16e}j", z.re, sign, z.im.abs());
            }
            out.push('\n');
        }
        out
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

// Operator impls panic on shape mismatch; the `try_*` methods are the
// fallible counterparts.

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.scale(-ONE)
    }
}

/// `AB − BA`
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare(a.rows, a.cols));
    }
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    (a * b).try_sub(&(b * a))
}

/// Tensor (Kronecker) product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    ComplexMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Traces out the trailing `traced` factor of a `kept·traced` dimensional
/// square matrix.
pub fn partial_trace_trailing(m: &ComplexMatrix, kept: usize, traced: usize) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.rows, m.cols));
    }
    if kept == 0 || traced == 0 || kept * traced != m.rows {
        return Err(LinalgError::Factorization {
            dim: m.rows,
            factors: vec![kept, traced],
        });
    }
    Ok(ComplexMatrix::from_fn(kept, kept, |i, j| {
        (0..traced).map(|f| m[(i * traced + f, j * traced + f)]).sum()
    }))
}

/// Reduces an atom ⊗ mode-a ⊗ mode-b state to the atom. `dims` are
/// `[atom_dim, mode_a_dim, mode_b_dim]`, i.e. photon cutoffs plus one.
pub fn partial_trace_field(rho: &DensityMatrix, dims: [usize; 3]) -> Result<DensityMatrix> {
    let [atom, na, nb] = dims;
    if dims.contains(&0) || atom * na * nb != rho.dim() {
        return Err(LinalgError::Factorization {
            dim: rho.dim(),
            factors: dims.to_vec(),
        });
    }
    let reduced = partial_trace_trailing(rho.matrix(), atom, na * nb)?;
    Ok(DensityMatrix { matrix: reduced })
}

/// Size of the drift removed by [`hermitize_and_check`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DriftCorrection {
    /// `‖m − m†‖_max / 2`, the anti-Hermitian part that was discarded.
    pub anti_hermitian: f64,
    /// `|Tr m − 1|` before renormalization.
    pub trace_error: f64,
}

/// Projects `m` onto the Hermitian unit-trace matrices when the drift is
/// below `tol`.
///
/// Positivity is not checked here; integrators call this at every output and
/// run eigenvalue checks separately at checkpoints.
pub fn hermitize_and_check(m: &ComplexMatrix, tol: f64) -> Result<(DensityMatrix, DriftCorrection)> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.rows, m.cols));
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let anti_hermitian = 0.5 * m.hermiticity_defect();
    let tr = m.trace();
    let trace_error = (tr - ONE).norm();
    if anti_hermitian > tol || trace_error > tol {
        return Err(LinalgError::DriftExceeded {
            hermitian: anti_hermitian,
            trace: trace_error,
            tol,
        });
    }
    let norm = tr.re;
    let h = ComplexMatrix::from_fn(m.rows, m.cols, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()) / norm);
    Ok((
        DensityMatrix { matrix: h },
        DriftCorrection {
            anti_hermitian,
            trace_error,
        },
    ))
}

/// Hermitian unit-trace state.
///
/// [`DensityMatrix::new`] additionally requires positivity; states obtained
/// from [`hermitize_and_check`] carry only the Hermitian/trace guarantee and
/// their positivity is reported by [`DensityMatrix::min_eigenvalue`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(LinalgError::NotSquare(matrix.rows, matrix.cols));
        }
        if !matrix.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let defect = matrix.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian(defect));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(LinalgError::TraceNotUnit(tr.re));
        }
        let rho = Self { matrix };
        let min = rho.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(LinalgError::NotPositive(min));
        }
        Ok(rho)
    }

    /// `|k⟩⟨k|`
    pub fn basis_state(dim: usize, k: usize) -> Self {
        Self {
            matrix: ComplexMatrix::basis_operator(dim, k, k),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0)),
        }
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if psi.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(LinalgError::Empty);
        }
        let n = psi.len();
        Ok(Self {
            matrix: ComplexMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / norm),
        })
    }

    /// `ρ_A ⊗ ρ_B`
    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            matrix: kron(&self.matrix, &other.matrix),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn population(&self, k: usize) -> f64 {
        self.matrix[(k, k)].re
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `Tr ρ²`
    pub fn purity(&self) -> f64 {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.hermitian_eigenvalues().map(|e| e[0]).unwrap_or(f64::NAN)
    }

    /// `Tr(ρ O)`
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<Complex64> {
        Ok(self.matrix.try_matmul(op)?.trace())
    }
}

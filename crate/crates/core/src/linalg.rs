//! Dense complex linear algebra for desk-scale Riccati and Lyapunov work.
//!
//! Everything here operates on [`ComplexMatrix`], a thin newtype over a
//! dynamically sized `nalgebra` matrix of `Complex64`. Dimensions in this
//! crate rarely exceed 16, so the Lyapunov solver builds the full Kronecker
//! operator and hands it to an LU factorization.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Relative pivot threshold for LU solves: a pivot smaller than this times the
/// largest entry of the matrix is treated as zero.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Smallest admissible diagonal entry of a Cholesky factor.
pub const CHOLESKY_MIN_PIVOT: f64 = 1e-10;

/// Relative tolerance used when a Hermitian input is required.
pub const HERMITIAN_TOL: f64 = 1e-9;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:e} against scale {scale:e})")]
    Singular { pivot: f64, scale: f64 },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not Hermitian (relative deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
}

/// Dense complex matrix. Constructors reject NaN and infinite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from entries listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::DimMismatch(format!("{} entries for a {rows}x{cols} matrix", entries.len())));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::DimMismatch("ragged rows".into()));
        }
        let entries = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, entries)
    }

    /// Real-valued convenience constructor, mostly for tests and fixed models.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.as_ref().iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self, LinalgError> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Square diagonal matrix.
    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { C64::new(0.0, 0.0) }))
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let e: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&e)
    }

    /// The signature matrix `diag(I_n, -I_n)`.
    pub fn signature(n: usize) -> Self {
        let mut d = vec![1.0; n];
        d.extend(std::iter::repeat_n(-1.0, n));
        Self::diag_real(&d)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    /// Assembles a block matrix. Every block in a block-row must share its
    /// row count and every block in a block-column its column count.
    pub fn from_blocks(blocks: &[&[&ComplexMatrix]]) -> Result<Self, LinalgError> {
        let Some(first) = blocks.first() else {
            return Ok(Self::zeros(0, 0));
        };
        let col_widths: Vec<usize> = first.iter().map(|b| b.cols()).collect();
        let mut heights = Vec::with_capacity(blocks.len());
        for (bi, row) in blocks.iter().enumerate() {
            if row.len() != col_widths.len() {
                return Err(LinalgError::DimMismatch(format!("block row {bi} has {} blocks", row.len())));
            }
            let h = row.first().map_or(0, |b| b.rows());
            for (bj, b) in row.iter().enumerate() {
                if b.rows() != h || b.cols() != col_widths[bj] {
                    return Err(LinalgError::DimMismatch(format!(
                        "block ({bi}, {bj}) is {}x{}, expected {h}x{}",
                        b.rows(),
                        b.cols(),
                        col_widths[bj]
                    )));
                }
            }
            heights.push(h);
        }
        let total_rows: usize = heights.iter().sum();
        let total_cols: usize = col_widths.iter().sum();
        let mut out = DMatrix::zeros(total_rows, total_cols);
        let mut r0 = 0;
        for (row, h) in blocks.iter().zip(&heights) {
            let mut c0 = 0;
            for (b, w) in row.iter().zip(&col_widths) {
                out.view_mut((r0, c0), (*h, *w)).copy_from(&b.0);
                c0 += w;
            }
            r0 += h;
        }
        Ok(Self(out))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    /// Returns a copy with one entry replaced.
    pub fn with_entry(&self, row: usize, col: usize, value: C64) -> Self {
        let mut m = self.0.clone();
        m[(row, col)] = value;
        Self(m)
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        (0..self.rows()).flat_map(|i| (0..self.cols()).map(move |j| (i, j))).map(|(i, j)| self.0[(i, j)]).collect()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `(A + A†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Copy of the sub-block starting at `(row, col)`.
    pub fn block(&self, row: usize, col: usize, rows: usize, cols: usize) -> Self {
        Self(self.0.view((row, col), (rows, cols)).into_owned())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, " ")?;
            for j in 0..self.cols() {
                let z = self.get(i, j);
                write!(f, " {:+.6e}{:+.6e}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $tr<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(self.0 $op rhs.0)
            }
        }
        impl $tr<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(self.0 $op &rhs.0)
            }
        }
        impl $tr<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(&self.0 $op rhs.0)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);
forward_binop!(Mul, mul, *);

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-self.0)
    }
}

fn require_square(a: &ComplexMatrix) -> Result<usize, LinalgError> {
    if a.is_square() {
        Ok(a.rows())
    } else {
        Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() })
    }
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// Solves `A X = B` by LU with partial pivoting.
///
/// Fails with [`LinalgError::Singular`] when the smallest pivot falls below
/// [`PIVOT_RTOL`] times the largest entry of `A`.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let n = require_square(a)?;
    if b.rows() != n {
        return Err(LinalgError::DimMismatch(format!("solve: A is {n}x{n}, B has {} rows", b.rows())));
    }
    if n == 0 {
        return Ok(b.clone());
    }
    let scale = a.max_abs();
    let lu = a.0.clone().lu();
    let min_pivot = lu.u().diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if scale == 0.0 || min_pivot < PIVOT_RTOL * scale {
        return Err(LinalgError::Singular { pivot: min_pivot, scale });
    }
    let x = lu.solve(&b.0).ok_or(LinalgError::Singular { pivot: min_pivot, scale })?;
    ComplexMatrix::from_dmatrix(x)
}

pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let n = require_square(a)?;
    solve_linear(a, &ComplexMatrix::identity(n))
}

/// Solves `A X + X A† + Q = 0` for Hermitian `X`.
///
/// The equation is vectorized as `(I ⊗ A + conj(A) ⊗ I) vec(X) = -vec(Q)`
/// with column-major `vec`, and the result is symmetrized.
pub fn lyapunov_solve(a: &ComplexMatrix, q: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let n = require_square(a)?;
    if q.rows() != n || q.cols() != n {
        return Err(LinalgError::DimMismatch(format!("lyapunov: A is {n}x{n}, Q is {}x{}", q.rows(), q.cols())));
    }
    let dev = hermitian_deviation(q);
    if dev > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian { deviation: dev });
    }
    let eye = ComplexMatrix::identity(n);
    let op = kron(&eye, a) + kron(&a.conj(), &eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, q.0.as_slice()).map(|z| -z);
    let v = solve_linear(&op, &ComplexMatrix(rhs))?;
    let x = DMatrix::from_column_slice(n, n, v.0.as_slice());
    Ok(ComplexMatrix(x).hermitian_part())
}

/// `‖A − A†‖_F / (1 + ‖A‖_F)`; infinite for non-square input.
pub fn hermitian_deviation(a: &ComplexMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    (a - &a.adjoint()).frobenius_norm() / (1.0 + a.frobenius_norm())
}

pub fn is_hermitian(a: &ComplexMatrix, tol: f64) -> bool {
    hermitian_deviation(a) <= tol
}

/// Diagonal of the Cholesky factor of a Hermitian matrix, or `None` when the
/// factorization breaks down.
/// Diagonal of the Cholesky factor of the Hermitian part of `A`, or `None` as
/// soon as a pivot is not strictly positive.
fn cholesky_pivots(a: &ComplexMatrix) -> Option<Vec<f64>> {
    let h = a.hermitian_part().0;
    let n = h.nrows();
    let mut l = DMatrix::<C64>::zeros(n, n);
    let mut pivots = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d.is_finite() && d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        pivots.push(ljj);
        for i in j + 1..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(pivots)
}

/// True iff the Cholesky factorization of `A` succeeds with every pivot above
/// [`CHOLESKY_MIN_PIVOT`].
pub fn is_positive_definite(a: &ComplexMatrix) -> Result<bool, LinalgError> {
    require_square(a)?;
    let dev = hermitian_deviation(a);
    if dev > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian { deviation: dev });
    }
    Ok(match cholesky_pivots(a) {
        Some(p) => p.iter().all(|&d| d > CHOLESKY_MIN_PIVOT),
        None => false,
    })
}

/// Positive semidefiniteness up to a relative tolerance: `A + tol·(1+‖A‖_F)·I`
/// must admit a Cholesky factorization.
pub fn is_positive_semidefinite(a: &ComplexMatrix, tol: f64) -> Result<bool, LinalgError> {
    let n = require_square(a)?;
    let dev = hermitian_deviation(a);
    if dev > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian { deviation: dev });
    }
    let shift = tol * (1.0 + a.frobenius_norm());
    let shifted = a + &ComplexMatrix::identity(n).scale_real(shift);
    Ok(cholesky_pivots(&shifted).is_some_and(|p| p.iter().all(|&d| d > 0.0)))
}

/// Hurwitz test without eigenvalues: `A` is Hurwitz iff `A X + X A† + I = 0`
/// has a unique positive-definite solution.
pub fn is_hurwitz(a: &ComplexMatrix) -> bool {
    let Ok(n) = require_square(a) else {
        return false;
    };
    match lyapunov_solve(a, &ComplexMatrix::identity(n)) {
        Ok(x) => is_positive_definite(&x).unwrap_or(false),
        Err(_) => false,
    }
}

/// Counts of positive, negative and (numerically) zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Inertia of a Hermitian matrix by symmetric-indefinite `L D L†`
/// factorization with Bunch–Parlett complete pivoting.
///
/// Entries of the trailing Schur complement below `tol` times the largest
/// entry of `A` count as zero eigenvalues.
pub fn inertia(a: &ComplexMatrix, tol: f64) -> Result<Inertia, LinalgError> {
    require_square(a)?;
    let dev = hermitian_deviation(a);
    if dev > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian { deviation: dev });
    }
    let mut out = Inertia { positive: 0, negative: 0, zero: 0 };
    let floor = tol * a.max_abs().max(f64::MIN_POSITIVE);
    let mut s = a.hermitian_part().0;
    // Bunch–Parlett growth constant.
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;

    while s.nrows() > 0 {
        let k = s.nrows();
        let (mut dmax, mut di) = (0.0, 0);
        for i in 0..k {
            let v = s[(i, i)].re.abs();
            if v > dmax {
                dmax = v;
                di = i;
            }
        }
        let (mut omax, mut oi, mut oj) = (0.0, 0, 0);
        for j in 0..k {
            for i in (j + 1)..k {
                let v = s[(i, j)].norm();
                if v > omax {
                    omax = v;
                    oi = i;
                    oj = j;
                }
            }
        }
        if dmax.max(omax) <= floor {
            out.zero += k;
            break;
        }
        if dmax >= alpha * omax {
            let d = s[(di, di)].re;
            if d > 0.0 {
                out.positive += 1;
            } else {
                out.negative += 1;
            }
            let col = s.column(di).into_owned();
            let rest: Vec<usize> = (0..k).filter(|&i| i != di).collect();
            s = DMatrix::from_fn(rest.len(), rest.len(), |i, j| {
                let (ri, rj) = (rest[i], rest[j]);
                s[(ri, rj)] - col[ri] * col[rj].conj() / d
            });
        } else {
            let (p, q) = (oj, oi);
            let e11 = s[(p, p)].re;
            let e22 = s[(q, q)].re;
            let e12 = s[(p, q)];
            let det = e11 * e22 - e12.norm_sqr();
            // Off-diagonal dominance guarantees det < 0 in exact arithmetic.
            if det < 0.0 {
                out.positive += 1;
                out.negative += 1;
            } else if e11 + e22 > 0.0 {
                out.positive += 2;
            } else {
                out.negative += 2;
            }
            let inv = [[C64::new(e22 / det, 0.0), -e12 / det], [-e12.conj() / det, C64::new(e11 / det, 0.0)]];
            let rest: Vec<usize> = (0..k).filter(|&i| i != p && i != q).collect();
            let pair = [p, q];
            s = DMatrix::from_fn(rest.len(), rest.len(), |i, j| {
                let (ri, rj) = (rest[i], rest[j]);
                let mut acc = s[(ri, rj)];
                for (u, &pu) in pair.iter().enumerate() {
                    for (v, &pv) in pair.iter().enumerate() {
                        acc -= s[(ri, pu)] * inv[u][v] * s[(pv, rj)];
                    }
                }
                acc
            });
        }
    }
    Ok(out)
}

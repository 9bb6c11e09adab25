//! Small dense linear algebra over real and complex scalars.
//!
//! Everything here is sized for the matrices the ensembles produce (a few
//! dozen rows at most): LU with partial pivoting, multi right-hand-side
//! solves with one step of iterative refinement, log-domain determinants,
//! Cholesky log-determinants for SPD/HPD matrices and one-sided Jacobi
//! singular values.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Relative pivot ratio at or below which a factorization is flagged as
/// near-singular.
pub const NEAR_SINGULAR_RATIO: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("matrix is singular (zero pivot in column {column})")]
    SingularMatrix { column: usize },
    #[error("matrix is near-singular (pivot ratio {ratio:e} <= {NEAR_SINGULAR_RATIO:e})")]
    NearSingular { ratio: f64 },
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Field element usable as a matrix entry.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    /// Modulus.
    fn modulus(self) -> f64;
    fn modulus_sqr(self) -> f64;
    /// Real part (the whole value for real scalars).
    fn re(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn modulus_sqr(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn modulus_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn re(self) -> f64 {
        self.re
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = Matrix<f64>;
pub type ComplexMatrix = Matrix<Complex64>;

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatError> {
        if data.len() != rows * cols {
            return Err(MatError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(MatError::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Conjugate transpose (plain transpose for real matrices).
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] = out.data[i * rhs.cols + j] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    /// `I + Z Z†`, the Gram-type matrix whose determinant drives the
    /// universal densities.
    pub fn identity_plus_gram(&self) -> Self {
        let mut g = self.matmul(&self.adjoint());
        for i in 0..self.rows {
            g[(i, i)] = g[(i, i)] + T::one();
        }
        g
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_sqr()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sqr().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.modulus()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Rows permuted so that row `i` of the output is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(perm[i], j)])
    }

    /// Columns gathered in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self::from_fn(self.rows, columns.len(), |i, j| self[(i, columns[j])])
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Result of `P·B = L·U` with partial pivoting. `L` and `U` share storage.
#[derive(Debug, Clone)]
pub struct LuFactors<T: Scalar> {
    perm: Vec<usize>,
    lu: Matrix<T>,
    sign: f64,
    pivot_ratio: f64,
}

impl<T: Scalar> LuFactors<T> {
    /// Row permutation: row `i` of `P·B` is row `perm()[i]` of `B`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Parity of the permutation, ±1.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Unit lower-triangular factor.
    pub fn lower(&self) -> Matrix<T> {
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[(i, j)],
            std::cmp::Ordering::Equal => T::one(),
            std::cmp::Ordering::Less => T::zero(),
        })
    }

    pub fn upper(&self) -> Matrix<T> {
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| if i <= j { self.lu[(i, j)] } else { T::zero() })
    }

    /// `min |U_ii| / max |U_jj|`.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn is_near_singular(&self) -> bool {
        self.pivot_ratio <= NEAR_SINGULAR_RATIO
    }

    /// Solves `B·Z = X` column by column using the stored factors.
    pub fn solve(&self, rhs: &Matrix<T>) -> Matrix<T> {
        let n = self.dim();
        assert_eq!(rhs.rows, n, "right-hand side row count");
        let mut out = rhs.permute_rows(&self.perm);
        for c in 0..rhs.cols {
            for i in 0..n {
                let mut acc = out[(i, c)];
                for k in 0..i {
                    acc = acc - self.lu[(i, k)] * out[(k, c)];
                }
                out[(i, c)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = out[(i, c)];
                for k in i + 1..n {
                    acc = acc - self.lu[(i, k)] * out[(k, c)];
                }
                out[(i, c)] = acc / self.lu[(i, i)];
            }
        }
        out
    }

    pub fn log_abs_det(&self) -> LogDet<T> {
        let mut log_abs = 0.0;
        let mut phase = T::from_real(self.sign);
        for i in 0..self.dim() {
            let u = self.lu[(i, i)];
            let r = u.modulus();
            log_abs += r.ln();
            phase = phase * (u / T::from_real(r));
        }
        LogDet { log_abs, sign: phase }
    }
}

/// LU factorization with partial pivoting.
pub fn lu_factor<T: Scalar>(b: &Matrix<T>) -> Result<LuFactors<T>, MatError> {
    if !b.is_square() {
        return Err(MatError::DimensionMismatch(format!(
            "LU needs a square matrix, got {}x{}",
            b.rows, b.cols
        )));
    }
    let n = b.rows;
    let mut lu = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let (p, best) = (k..n)
            .map(|i| (i, lu[(i, k)].modulus()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == 0.0 {
            return Err(MatError::SingularMatrix { column: k });
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor == T::zero() {
                continue;
            }
            for j in k + 1..n {
                lu[(i, j)] = lu[(i, j)] - factor * lu[(k, j)];
            }
        }
    }
    let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let d = lu[(i, i)].modulus();
        (lo.min(d), hi.max(d))
    });
    let pivot_ratio = if n == 0 { 1.0 } else { lo / hi };
    Ok(LuFactors {
        perm,
        lu,
        sign,
        pivot_ratio,
    })
}

/// Solves `B·Z = X` for a multi-column right-hand side, with one step of
/// iterative refinement. Near-singular `B` is rejected.
pub fn solve_multi<T: Scalar>(b: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>, MatError> {
    if x.rows != b.rows {
        return Err(MatError::DimensionMismatch(format!(
            "B is {}x{}, X has {} rows",
            b.rows, b.cols, x.rows
        )));
    }
    let lu = lu_factor(b)?;
    if lu.is_near_singular() {
        return Err(MatError::NearSingular {
            ratio: lu.pivot_ratio(),
        });
    }
    let mut z = lu.solve(x);
    let residual = x.sub(&b.matmul(&z));
    let correction = lu.solve(&residual);
    for (zi, ci) in z.data.iter_mut().zip(correction.data) {
        *zi = *zi + ci;
    }
    Ok(z)
}

/// `log |det B|` together with the unit-modulus sign (±1 for real
/// matrices, a phase for complex ones). Singular input gives
/// `log_abs = -inf` and `sign = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet<T> {
    pub log_abs: f64,
    pub sign: T,
}

impl<T: Scalar> LogDet<T> {
    pub fn is_singular(&self) -> bool {
        self.log_abs == f64::NEG_INFINITY
    }
}

pub fn log_abs_det<T: Scalar>(b: &Matrix<T>) -> LogDet<T> {
    assert!(b.is_square(), "determinant of a non-square matrix");
    match lu_factor(b) {
        Ok(lu) => lu.log_abs_det(),
        Err(_) => LogDet {
            log_abs: f64::NEG_INFINITY,
            sign: T::zero(),
        },
    }
}

/// Lower Cholesky factor of a symmetric (Hermitian) positive definite
/// matrix. Only the lower triangle of `s` is read.
pub fn cholesky<T: Scalar>(s: &Matrix<T>) -> Result<Matrix<T>, MatError> {
    if !s.is_square() {
        return Err(MatError::DimensionMismatch(format!(
            "Cholesky needs a square matrix, got {}x{}",
            s.rows, s.cols
        )));
    }
    let n = s.rows;
    let mut l: Matrix<T> = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)].re();
        for k in 0..j {
            d -= l[(j, k)].modulus_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(MatError::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = T::from_real(djj);
        for i in j + 1..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc = acc - l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / T::from_real(djj);
        }
    }
    Ok(l)
}

/// Solves `L·Y = R` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &Matrix<T>, rhs: &Matrix<T>) -> Matrix<T> {
    let n = l.rows;
    assert_eq!(rhs.rows, n);
    let mut out = rhs.clone();
    for c in 0..rhs.cols {
        for i in 0..n {
            let mut acc = out[(i, c)];
            for k in 0..i {
                acc = acc - l[(i, k)] * out[(k, c)];
            }
            out[(i, c)] = acc / l[(i, i)];
        }
    }
    out
}

/// `log det S` for SPD (HPD) `S` via Cholesky.
pub fn spd_logdet<T: Scalar>(s: &Matrix<T>) -> Result<f64, MatError> {
    let l = cholesky(s)?;
    Ok(2.0 * (0..l.rows).map(|i| l[(i, i)].re().ln()).sum::<f64>())
}

/// Singular values in descending order, by one-sided Jacobi on the
/// columns of the taller orientation.
pub fn singular_values<T: Scalar>(b: &Matrix<T>) -> Result<Vec<f64>, MatError> {
    if !b.is_finite() {
        let k = b.data.iter().position(|x| !x.is_finite()).unwrap_or(0);
        return Err(MatError::NonFinite {
            row: k / b.cols.max(1),
            col: k % b.cols.max(1),
        });
    }
    // Work on columns of an (r x c) matrix with r >= c.
    let work = if b.rows >= b.cols { b.clone() } else { b.adjoint() };
    let (r, c) = (work.rows, work.cols);
    let mut cols: Vec<Vec<T>> = (0..c).map(|j| work.column(j)).collect();
    let eps = f64::EPSILON;

    let mut converged = c < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha: f64 = cols[p].iter().map(|x| x.modulus_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|x| x.modulus_sqr()).sum();
                let gamma = cols[p]
                    .iter()
                    .zip(&cols[q])
                    .fold(T::zero(), |acc, (&a, &b)| acc + a.conj() * b);
                let g = gamma.modulus();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate the phase of column q so that <a_p, a_q> is real
                // and positive; singular values are unaffected.
                let phase = (gamma / T::from_real(g)).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..r {
                    let ap = cols[p][i];
                    let aq = cols[q][i] * phase;
                    cols[p][i] = T::from_real(cs) * ap - T::from_real(sn) * aq;
                    cols[q][i] = T::from_real(sn) * ap + T::from_real(cs) * aq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(MatError::ConvergenceFailure {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|x| x.modulus_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

//! Dense real linear algebra for small symmetric problems.
//!
//! Everything here is self-contained: a row-major [`Matrix`], a symmetric
//! [`SymMatrix`] newtype, a cyclic Jacobi eigensolver, SPD matrix powers and
//! the trace-minimization bound over symmetric matrices with a prescribed
//! spectrum.

use crate::error::{Error, Result};
use std::ops::{Index, IndexMut};

/// Off-diagonal Frobenius norm must fall below this multiple of the
/// diagonal norm for the Jacobi iteration to stop.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

/// Sweep cap for the Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Relative eigenvalue floor: eigenvalues at or below `1e-10 * tr(M)/N`
/// make a matrix numerically singular.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

/// Components with magnitude at or below this are skipped when fixing
/// eigenvector signs.
const SIGN_EPS: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix data has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::InvalidInput(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    cols
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.row_iter().map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::InvalidInput(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::InvalidInput(format!(
                "vector of length {} does not match {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok(self.row_iter().map(|row| dot(row, v)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidInput("matrix shapes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Square matrix with `m[i][j] == m[j][i]` exactly.
///
/// Construction averages the two triangles, so the invariant holds bitwise
/// regardless of round-off in whatever produced the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::InvalidInput(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        if m.rows == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        let mut m = m;
        let n = m.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::from_matrix(Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::diagonal(&vec![s; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.to_rows()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        Ok(dot(v, &self.0.matvec(v)?))
    }

    /// `self + c·v·vᵀ`.
    pub fn rank_one_update(&self, v: &[f64], c: f64) -> Result<SymMatrix> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::InvalidInput(format!(
                "vector of length {} does not match dimension {}",
                v.len(),
                n
            )));
        }
        let mut m = self.0.clone();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += c * v[i] * v[j];
            }
        }
        SymMatrix::from_matrix(m)
    }

    /// Floor below which an eigenvalue counts as zero: `1e-10 * tr(M)/N`.
    pub fn eigenvalue_floor(&self) -> f64 {
        EIGENVALUE_FLOOR * self.trace() / self.dim() as f64
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Spectral decomposition `M = U·diag(λ)·Uᵀ` of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U·diag(f(λ))·Uᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.dim();
        let u = &self.eigenvectors;
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for (k, &w) in mapped.iter().enumerate() {
                    acc += u[(i, k)] * w * u[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        SymMatrix(out)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_spectrum(|l| l)
    }

    /// `U·diag(λᵗ)·Uᵀ` without any floor check.
    pub fn power(&self, t: f64) -> SymMatrix {
        self.map_spectrum(|l| l.powf(t))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Stops once the off-diagonal Frobenius norm drops below
/// [`JACOBI_TOLERANCE`] times the diagonal norm. Eigenvalues come back
/// descending; each eigenvector's first component with magnitude above
/// `1e-12` is made positive.
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenDecomposition> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.dim();
    let mut a = m.0.clone();
    let mut vt = Matrix::identity(n);

    let mut converged = false;
    for _ in 0..=JACOBI_MAX_SWEEPS {
        let (off, diag) = off_and_diag_norms(&a);
        if off <= JACOBI_TOLERANCE * diag {
            converged = true;
            break;
        }
        jacobi_sweep(&mut a, &mut vt);
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));

    let eigenvalues = order.iter().map(|&k| a[(k, k)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let sign = vt
            .row(k)
            .iter()
            .find(|x| x.abs() > SIGN_EPS)
            .map_or(1.0, |x| x.signum());
        for (i, x) in vt.row(k).iter().enumerate() {
            eigenvectors[(i, col)] = sign * x;
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_and_diag_norms(a: &Matrix) -> (f64, f64) {
    let n = a.rows;
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)] * a[(i, j)];
            if i == j {
                diag += x;
            } else {
                off += x;
            }
        }
    }
    (off.sqrt(), diag.sqrt())
}

/// One cyclic sweep over all `(p, q)` pairs. `a` stays symmetric, so each
/// rotation updates rows `p` and `q` and mirrors them into the columns.
/// `vt` holds the eigenvectors as rows.
fn jacobi_sweep(a: &mut Matrix, vt: &mut Matrix) {
    let n = a.rows;
    let a = &mut a.data;
    let vt = &mut vt.data;
    for p in 0..n {
        for q in (p + 1)..n {
            let apq = a[p * n + q];
            if apq == 0.0 {
                continue;
            }
            let app = a[p * n + p];
            let aqq = a[q * n + q];
            let theta = (aqq - app) / (2.0 * apq);
            let t = if theta.abs() > 1e150 {
                0.5 / theta
            } else {
                theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;

            for k in 0..n {
                if k == p || k == q {
                    continue;
                }
                let apk = a[p * n + k];
                let aqk = a[q * n + k];
                let new_p = c * apk - s * aqk;
                let new_q = s * apk + c * aqk;
                a[p * n + k] = new_p;
                a[k * n + p] = new_p;
                a[q * n + k] = new_q;
                a[k * n + q] = new_q;
            }
            a[p * n + p] = app - t * apq;
            a[q * n + q] = aqq + t * apq;
            a[p * n + q] = 0.0;
            a[q * n + p] = 0.0;

            let (head, tail) = vt.split_at_mut(q * n);
            let row_p = &mut head[p * n..(p + 1) * n];
            let row_q = &mut tail[..n];
            for (vp, vq) in row_p.iter_mut().zip(row_q.iter_mut()) {
                let (x, y) = (*vp, *vq);
                *vp = c * x - s * y;
                *vq = s * x + c * y;
            }
        }
    }
}

/// Checks that a decomposition describes an SPD matrix above the floor.
pub fn check_spd(eig: &EigenDecomposition, trace: f64) -> Result<()> {
    let floor = EIGENVALUE_FLOOR * trace / eig.dim() as f64;
    let min = eig.min_eigenvalue();
    if !(min > floor) || !(floor >= 0.0) {
        return Err(Error::SingularMatrix {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// `Mᵗ = U·diag(λᵗ)·Uᵀ` for SPD `M`.
///
/// Fails with [`Error::SingularMatrix`] when the smallest eigenvalue is at
/// or below `1e-10 * tr(M)/N`.
pub fn spd_power(m: &SymMatrix, t: f64) -> Result<SymMatrix> {
    let eig = sym_eigen(m)?;
    check_spd(&eig, m.trace())?;
    Ok(eig.power(t))
}

/// Minimum of `tr(A·B)` over symmetric `A` with spectrum `lambdas`.
///
/// `lambdas` must be ascending and positive, `B` nonnegative definite. The
/// minimum pairs the smallest `λ` with the largest eigenvalue of `B`:
/// `Σ λᵢ βᵢ` with `β` sorted descending.
pub fn min_trace_assignment(lambdas: &[f64], b: &SymMatrix) -> Result<f64> {
    if lambdas.len() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "{} eigenvalues supplied for a {}x{} matrix",
            lambdas.len(),
            b.dim(),
            b.dim()
        )));
    }
    if lambdas.iter().any(|l| !l.is_finite() || *l <= 0.0) {
        return Err(Error::InvalidInput("eigenvalues must be positive and finite".into()));
    }
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("eigenvalues must be ascending".into()));
    }
    let eig = sym_eigen(b)?;
    if eig.min_eigenvalue() < -1e-10 {
        return Err(Error::InvalidInput(format!(
            "matrix is not nonnegative definite (eigenvalue {:e})",
            eig.min_eigenvalue()
        )));
    }
    Ok(lambdas.iter().zip(&eig.eigenvalues).map(|(l, b)| l * b).sum())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_cov() -> SymMatrix {
        SymMatrix::from_rows(&[[1.0, 0.3], [0.3, 0.6]]).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn symmetrizes_on_construction() {
        let m = SymMatrix::from_rows(&[[1.0, 2.0], [4.0, 1.0]]).unwrap();
        assert_eq!(m[(0, 1)], 3.0);
        assert_eq!(m[(1, 0)], 3.0);
    }

    #[test]
    fn rejects_non_square() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert!(matches!(SymMatrix::from_matrix(m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn eigen_identity() {
        let eig = sym_eigen(&SymMatrix::identity(2)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0]);
        assert_eq!(eig.eigenvectors, Matrix::identity(2));
    }

    #[test]
    fn eigen_diagonal() {
        let eig = sym_eigen(&SymMatrix::diagonal(&[2.0, 1.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![2.0, 1.0]);
        assert_eq!(eig.eigenvectors, Matrix::identity(2));
    }

    #[test]
    fn eigen_diagonal_reorders_ascending_input() {
        let eig = sym_eigen(&SymMatrix::diagonal(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![3.0, 2.0, 1.0]);
        assert_eq!(eig.eigenvectors.column(0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn eigen_example_covariance() {
        // characteristic polynomial λ² - 1.6λ + 0.51
        let disc = (1.6f64 * 1.6 - 4.0 * 0.51).sqrt();
        let l1 = 0.5 * (1.6 + disc);
        let l2 = 0.5 * (1.6 - disc);
        let eig = sym_eigen(&example_cov()).unwrap();
        assert_close(eig.eigenvalues[0], l1, 1e-14);
        assert_close(eig.eigenvalues[1], l2, 1e-14);
        assert_close(eig.eigenvalues[0], 1.1606, 1e-4);
        assert_close(eig.eigenvalues[1], 0.4394, 1e-4);
        assert_close(eig.eigenvalues[0] * eig.eigenvalues[1], 0.51, 1e-14);
        assert_close(eig.eigenvalues[0] + eig.eigenvalues[1], 1.6, 1e-14);
        for col in 0..2 {
            let first = eig.eigenvectors.column(col)[0];
            assert!(first > 0.0);
        }
    }

    #[test]
    fn eigen_rejects_nan() {
        let m = SymMatrix::from_rows(&[[1.0, f64::NAN], [f64::NAN, 1.0]]).unwrap();
        assert!(matches!(sym_eigen(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn eigen_zero_matrix() {
        let eig = sym_eigen(&SymMatrix::diagonal(&[0.0, 0.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![0.0, 0.0]);
    }

    #[test]
    fn power_examples() {
        let inv_root = spd_power(&SymMatrix::identity(3), -0.5).unwrap();
        assert_eq!(inv_root, SymMatrix::identity(3));

        let root = spd_power(&SymMatrix::diagonal(&[4.0, 9.0]), 0.5).unwrap();
        assert_close(root[(0, 0)], 2.0, 1e-15);
        assert_close(root[(1, 1)], 3.0, 1e-15);
        assert_eq!(root[(0, 1)], 0.0);

        let inv = spd_power(&example_cov(), -1.0).unwrap();
        let expected = [[0.6 / 0.51, -0.3 / 0.51], [-0.3 / 0.51, 1.0 / 0.51]];
        for i in 0..2 {
            for j in 0..2 {
                assert_close(inv[(i, j)], expected[i][j], 1e-12);
            }
        }
    }

    #[test]
    fn power_rejects_singular() {
        let m = SymMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        match spd_power(&m, -1.0) {
            Err(Error::SingularMatrix { min_eigenvalue }) => {
                assert!(min_eigenvalue.abs() < 1e-12)
            }
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
        // floor is relative to tr/N, so a tiny but well-scaled matrix passes
        let tiny = SymMatrix::diagonal(&[1e-20, 2e-20]);
        assert!(spd_power(&tiny, -1.0).is_ok());
        let skewed = SymMatrix::diagonal(&[1.0, 1e-11]);
        assert!(matches!(
            spd_power(&skewed, -0.5),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn trace_assignment_examples() {
        let b = example_cov();
        assert_close(min_trace_assignment(&[1.0, 1.0], &b).unwrap(), b.trace(), 1e-14);

        let b = SymMatrix::diagonal(&[1.0, 3.0]);
        assert_close(min_trace_assignment(&[1.0, 2.0], &b).unwrap(), 5.0, 1e-14);

        let b = SymMatrix::diagonal(&[3.0, 1.0, 1.0]);
        assert_close(min_trace_assignment(&[0.5, 1.0, 1.0], &b).unwrap(), 3.5, 1e-14);
    }

    #[test]
    fn trace_assignment_rejects_bad_input() {
        let b = SymMatrix::diagonal(&[1.0, -1.0]);
        assert!(matches!(
            min_trace_assignment(&[1.0, 2.0], &b),
            Err(Error::InvalidInput(_))
        ));
        let b = SymMatrix::identity(2);
        assert!(min_trace_assignment(&[2.0, 1.0], &b).is_err());
        assert!(min_trace_assignment(&[1.0], &b).is_err());
        assert!(min_trace_assignment(&[0.0, 1.0], &b).is_err());
    }
}

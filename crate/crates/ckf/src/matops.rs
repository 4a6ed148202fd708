//! Dense matrix kernel: Kronecker/vec operations, elementary factorizations,
//! and the analytic saddle-point block solver.
//!
//! Matrices are stored column-major: entry `(i, j)` of an `r × c` matrix
//! lives at `data[i + j * r]`. `vec` therefore stacks columns, matching the
//! convention used throughout the filter derivations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::{Error, Result};

/// Reciprocal-condition estimate below which a pivoted factorization
/// treats its input as singular.
pub const SINGULARITY_RCOND: f64 = 1e-12;

/// Dense, column-major `f64` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix. Zero-sized shapes are allowed (empty constraint blocks).
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from entries listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "from_row_major: {} entries for {rows}x{cols}",
            entries.len()
        );
        Self::from_fn(rows, cols, |i, j| entries[i * cols + j])
    }

    /// Build from a column-stacked buffer (the `vec` layout).
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Interpret a slice as a single-column matrix.
    pub fn column(v: &[f64]) -> Self {
        DenseMatrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
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

    /// Column-major backing buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Column `j` as a contiguous slice.
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        self.data[j * self.rows..(j + 1) * self.rows].copy_from_slice(v);
    }

    /// Row `i` copied out (rows are strided in column-major storage).
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * x` for a state-sized slice.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec: operand length mismatch");
        let mut y = vec![0.0; self.rows];
        for j in 0..self.cols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (yi, &aij) in y.iter_mut().zip(self.col(j)) {
                *yi += aij * xj;
            }
        }
        y
    }

    /// `self' * x` without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_matvec: operand length mismatch");
        (0..self.cols).map(|j| dot(self.col(j), x)).collect()
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "trace of non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Symmetry check relative to the largest entry magnitude.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1e-300);
        for j in 0..self.cols {
            for i in 0..j {
                if (self[(i, j)] - self[(j, i)]).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// `(M + M') / 2`.
    pub fn symmetrized(&self) -> DenseMatrix {
        assert!(self.is_square());
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Stack blocks vertically. All blocks must share a column count.
    pub fn vstack(blocks: &[&DenseMatrix]) -> DenseMatrix {
        assert!(!blocks.is_empty());
        let cols = blocks[0].cols;
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut out = DenseMatrix::zeros(rows, cols);
        let mut at = 0;
        for b in blocks {
            assert_eq!(b.cols, cols, "vstack: column mismatch");
            for j in 0..cols {
                for i in 0..b.rows {
                    out[(at + i, j)] = b[(i, j)];
                }
            }
            at += b.rows;
        }
        out
    }

    /// Stack blocks horizontally. All blocks must share a row count.
    pub fn hstack(blocks: &[&DenseMatrix]) -> DenseMatrix {
        assert!(!blocks.is_empty());
        let rows = blocks[0].rows;
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = DenseMatrix::zeros(rows, cols);
        let mut at = 0;
        for b in blocks {
            assert_eq!(b.rows, rows, "hstack: row mismatch");
            for j in 0..b.cols {
                for i in 0..rows {
                    out[(i, at + j)] = b[(i, j)];
                }
            }
            at += b.cols;
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            for k in 0..self.cols {
                let bkj = rhs[(k, j)];
                if bkj == 0.0 {
                    continue;
                }
                for i in 0..self.rows {
                    out[(i, j)] += self[(i, k)] * bkj;
                }
            }
        }
        out
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add: shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub: shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.scaled(-1.0)
    }
}

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn add_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale_vec(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Outer product `u v'`.
pub fn outer(u: &[f64], v: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
}

// ---------------------------------------------------------------------------
// Kronecker product and vec
// ---------------------------------------------------------------------------

/// Right Kronecker product: block `(i, j)` of the result is `a[i,j] * b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DenseMatrix::zeros(ar * br, ac * bc);
    for aj in 0..ac {
        for ai in 0..ar {
            let aij = a[(ai, aj)];
            if aij == 0.0 {
                continue;
            }
            for bj in 0..bc {
                for bi in 0..br {
                    out[(ai * br + bi, aj * bc + bj)] = aij * b[(bi, bj)];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization: element `i + rows*j` is `a[i,j]`.
pub fn vec(a: &DenseMatrix) -> Vec<f64> {
    a.data.clone()
}

/// Inverse of [`vec`]: reshape a column-stacked buffer into `rows × cols`.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<DenseMatrix> {
    if v.len() != rows * cols {
        return Err(Error::Dimension {
            op: "unvec",
            detail: format!("{} entries cannot fill {rows}x{cols}", v.len()),
        });
    }
    Ok(DenseMatrix::from_col_major(rows, cols, v.to_vec()))
}

// ---------------------------------------------------------------------------
// LU factorization (partial pivoting)
// ---------------------------------------------------------------------------

/// Pivoted LU factorization of a square matrix.
pub struct Lu {
    lu: DenseMatrix,
    piv: Vec<usize>,
}

impl Lu {
    /// Factor `m`, reporting `Error::Singular { what }` when the pivot-ratio
    /// reciprocal-condition estimate falls below [`SINGULARITY_RCOND`].
    pub fn factor(m: &DenseMatrix, what: &'static str) -> Result<Lu> {
        assert!(m.is_square(), "LU of non-square matrix");
        let n = m.rows();
        let mut lu = m.clone();
        let mut piv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            min_pivot = min_pivot.min(pivot.abs());
            max_pivot = max_pivot.max(pivot.abs());
            if pivot == 0.0 {
                continue;
            }
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
                let lik = lu[(i, k)];
                if lik == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    lu[(i, j)] -= lik * lu[(k, j)];
                }
            }
        }
        let rcond = if max_pivot == 0.0 { 0.0 } else { min_pivot / max_pivot };
        if !(rcond >= SINGULARITY_RCOND) {
            return Err(Error::Singular { what });
        }
        Ok(Lu { lu, piv })
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        // forward: unit-lower L
        for k in 0..n {
            for i in k + 1..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        // backward: upper U
        for k in (0..n).rev() {
            x[k] /= self.lu[(k, k)];
            for i in 0..k {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        x
    }

    pub fn solve_mat(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve_vec(b.col(j)));
        }
        out
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve_mat(&DenseMatrix::identity(self.lu.rows()))
    }
}

// ---------------------------------------------------------------------------
// Cholesky factorization
// ---------------------------------------------------------------------------

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(m: &DenseMatrix, what: &'static str) -> Result<Cholesky> {
        assert!(m.is_square(), "Cholesky of non-square matrix");
        let n = m.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { what });
            }
            let ljj = libm::sqrt(d);
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for j in 0..n {
            dmin = dmin.min(l[(j, j)]);
            dmax = dmax.max(l[(j, j)]);
        }
        if n > 0 && (dmin / dmax) * (dmin / dmax) < SINGULARITY_RCOND {
            return Err(Error::Singular { what });
        }
        Ok(Cholesky { l })
    }

    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solve `L y = b` (forward substitution).
    pub fn solve_l_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Solve `L' x = b` (back substitution).
    pub fn solve_lt_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.l[(k, i)] * x[k];
            }
            x[i] /= self.l[(i, i)];
        }
        x
    }

    /// Solve the full system `L L' x = b`.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        self.solve_lt_vec(&self.solve_l_vec(b))
    }

    pub fn solve_mat(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve_vec(b.col(j)));
        }
        out
    }

    pub fn solve_l_mat(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve_l_vec(b.col(j)));
        }
        out
    }

    pub fn solve_lt_mat(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve_lt_vec(b.col(j)));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Householder QR (thin)
// ---------------------------------------------------------------------------

/// Thin Householder QR of an `m × n` matrix with `m ≥ n`.
pub struct Qr {
    q: DenseMatrix,
    r: DenseMatrix,
}

impl Qr {
    pub fn factor(a: &DenseMatrix) -> Qr {
        let (m, n) = a.shape();
        assert!(m >= n, "thin QR requires rows >= cols");
        let mut work = a.clone();
        let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
        for k in 0..n {
            let mut v: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
            let norm_x = norm2(&v);
            if norm_x == 0.0 {
                reflectors.push((v, 0.0));
                continue;
            }
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * norm_x;
            let beta = 2.0 / dot(&v, &v);
            for j in k..n {
                let mut s = 0.0;
                for (t, vi) in v.iter().enumerate() {
                    s += vi * work[(k + t, j)];
                }
                s *= beta;
                for (t, vi) in v.iter().enumerate() {
                    work[(k + t, j)] -= vi * s;
                }
            }
            reflectors.push((v, beta));
        }
        let r = DenseMatrix::from_fn(n, n, |i, j| if i <= j { work[(i, j)] } else { 0.0 });
        // form the thin Q by applying reflectors in reverse to I's first n columns
        let mut q = DenseMatrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
        for k in (0..n).rev() {
            let (v, beta) = &reflectors[k];
            if *beta == 0.0 {
                continue;
            }
            for j in 0..n {
                let mut s = 0.0;
                for (t, vi) in v.iter().enumerate() {
                    s += vi * q[(k + t, j)];
                }
                s *= beta;
                for (t, vi) in v.iter().enumerate() {
                    q[(k + t, j)] -= vi * s;
                }
            }
        }
        Qr { q, r }
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    /// Diagonal-ratio estimate of full column rank.
    pub fn has_full_column_rank(&self, rel_tol: f64) -> bool {
        let n = self.r.rows();
        if n == 0 {
            return true;
        }
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let d = self.r[(i, i)].abs();
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        dmax > 0.0 && dmin >= rel_tol * dmax
    }
}

/// Back-substitution: solve `R x = b` for upper-triangular `R`.
pub fn solve_upper_tri(r: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = r.rows();
    assert!(r.is_square() && b.len() == n);
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= r[(i, k)] * x[k];
        }
        x[i] /= r[(i, i)];
    }
    x
}

/// Forward substitution: solve `R' x = b` for upper-triangular `R`.
pub fn solve_upper_tri_transpose(r: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = r.rows();
    assert!(r.is_square() && b.len() == n);
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= r[(k, i)] * x[k];
        }
        x[i] /= r[(i, i)];
    }
    x
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Eigenvalues of a symmetric matrix, ascending. Uses cyclic Jacobi sweeps;
/// ample accuracy for the small dense matrices this crate works with.
pub fn sym_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues of non-square matrix");
    let n = m.rows();
    let mut a = m.symmetrized();
    let scale = a.frobenius_norm().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if libm::sqrt(2.0 * off) <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(p, i)] = a[(i, p)];
                    a[(i, q)] = s * aip + c * aiq;
                    a[(q, i)] = a[(i, q)];
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

// ---------------------------------------------------------------------------
// Saddle-point systems
// ---------------------------------------------------------------------------

/// The 2×2 block system
///
/// ```text
/// [ A_S  B_S' ] [ l ]   [ rhs_top    ]
/// [ B_S  -C_S ] [ λ ] = [ rhs_bottom ]
/// ```
///
/// solved through the Schur complement `J_S = -(C_S + B_S A_S⁻¹ B_S')`.
pub struct SaddleSystem {
    pub a_block: DenseMatrix,
    pub b_block: DenseMatrix,
    pub c_block: DenseMatrix,
    pub rhs_top: Vec<f64>,
    pub rhs_bottom: Vec<f64>,
}

impl SaddleSystem {
    fn validate(&self) -> Result<()> {
        let n = self.a_block.rows();
        let q = self.b_block.rows();
        let ok = self.a_block.is_square()
            && self.b_block.cols() == n
            && self.c_block.shape() == (q, q)
            && self.rhs_top.len() == n
            && self.rhs_bottom.len() == q;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension {
                op: "saddle_solve",
                detail: format!(
                    "A {}x{}, B {}x{}, C {}x{}, rhs {}+{}",
                    self.a_block.rows(),
                    self.a_block.cols(),
                    self.b_block.rows(),
                    self.b_block.cols(),
                    self.c_block.rows(),
                    self.c_block.cols(),
                    self.rhs_top.len(),
                    self.rhs_bottom.len()
                ),
            })
        }
    }

    /// Assemble the full stacked matrix (handy for residual checks).
    pub fn stacked(&self) -> DenseMatrix {
        let top = DenseMatrix::hstack(&[&self.a_block, &self.b_block.transpose()]);
        let bottom = DenseMatrix::hstack(&[&self.b_block, &self.c_block.scaled(-1.0)]);
        DenseMatrix::vstack(&[&top, &bottom])
    }
}

/// Solve a [`SaddleSystem`] via factorizations of `A_S` and of the Schur
/// complement, following the analytic block-inverse structure.
pub fn saddle_solve(sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    sys.validate()?;
    let q = sys.b_block.rows();
    let lu_a = Lu::factor(&sys.a_block, "a_block")?;
    let y0 = lu_a.solve_vec(&sys.rhs_top);
    if q == 0 {
        return Ok((y0, Vec::new()));
    }
    // A_S⁻¹ B_S'
    let a_inv_bt = lu_a.solve_mat(&sys.b_block.transpose());
    // J_S = -(C_S + B_S A_S⁻¹ B_S')
    let j = -&(&sys.c_block + &(&sys.b_block * &a_inv_bt));
    let lu_j = Lu::factor(&j, "schur_complement")?;
    let lambda = lu_j.solve_vec(&sub_vec(&sys.rhs_bottom, &sys.b_block.matvec(&y0)));
    let l = sub_vec(&y0, &a_inv_bt.matvec(&lambda));
    Ok((l, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).max_abs() <= tol
    }

    #[test]
    fn kron_identity_passthrough() {
        let b = DenseMatrix::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let k = kron(&DenseMatrix::identity(1), &b);
        assert!(approx_eq(&k, &b, 0.0));
    }

    #[test]
    fn kron_direct_expansion() {
        let a = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DenseMatrix::from_row_major(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let expected = DenseMatrix::from_row_major(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 2.0, //
                1.0, 0.0, 2.0, 0.0, //
                0.0, 3.0, 0.0, 4.0, //
                3.0, 0.0, 4.0, 0.0,
            ],
        );
        assert!(approx_eq(&kron(&a, &b), &expected, 0.0));
    }

    #[test]
    fn kron_row_by_column() {
        let a = DenseMatrix::from_row_major(1, 2, &[1.0, 2.0]);
        let b = DenseMatrix::from_row_major(2, 1, &[3.0, 4.0]);
        let expected = DenseMatrix::from_row_major(2, 2, &[3.0, 6.0, 4.0, 8.0]);
        assert!(approx_eq(&kron(&a, &b), &expected, 0.0));
    }

    #[test]
    fn vec_stacks_columns() {
        let a = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&a), alloc::vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn vec_of_column_is_identity() {
        let a = DenseMatrix::column(&[5.0, 6.0, 7.0]);
        assert_eq!(vec(&a), alloc::vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn vec_of_zero_matrix() {
        assert_eq!(vec(&DenseMatrix::zeros(2, 3)), alloc::vec![0.0; 6]);
    }

    #[test]
    fn unvec_inverts_vec() {
        let m = unvec(&[1.0, 3.0, 2.0, 4.0], 2, 2).unwrap();
        let expected = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(approx_eq(&m, &expected, 0.0));
    }

    #[test]
    fn unvec_zero_buffer() {
        let m = unvec(&[0.0; 6], 2, 3).unwrap();
        assert!(approx_eq(&m, &DenseMatrix::zeros(2, 3), 0.0));
    }

    #[test]
    fn unvec_rejects_length_mismatch() {
        assert!(matches!(
            unvec(&[1.0, 2.0, 3.0], 2, 2),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn lu_solves_and_flags_singular() {
        let m = DenseMatrix::from_row_major(2, 2, &[4.0, 7.0, 2.0, 6.0]);
        let lu = Lu::factor(&m, "m").unwrap();
        let x = lu.solve_vec(&[1.0, 0.0]);
        assert!((m.matvec(&x)[0] - 1.0).abs() < 1e-12);
        assert!((m.matvec(&x)[1]).abs() < 1e-12);

        let s = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            Lu::factor(&s, "s"),
            Err(Error::Singular { what: "s" })
        ));
    }

    #[test]
    fn cholesky_round_trip() {
        let m = DenseMatrix::from_row_major(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let ch = Cholesky::factor(&m, "m").unwrap();
        let x = ch.solve_vec(&[5.0, 4.0]);
        let back = m.matvec(&x);
        assert!((back[0] - 5.0).abs() < 1e-12 && (back[1] - 4.0).abs() < 1e-12);
        let not_pd = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Cholesky::factor(&not_pd, "x").is_err());
    }

    #[test]
    fn qr_reconstructs() {
        let a = DenseMatrix::from_row_major(4, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.0, -2.0, 1.5]);
        let qr = Qr::factor(&a);
        let qtq = &qr.q().transpose() * qr.q();
        assert!(approx_eq(&qtq, &DenseMatrix::identity(2), 1e-12));
        assert!(approx_eq(&(qr.q() * qr.r()), &a, 1e-12));
        assert!(qr.has_full_column_rank(1e-10));
    }

    #[test]
    fn jacobi_eigenvalues_of_diagonal_like() {
        let m = DenseMatrix::from_row_major(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = sym_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_hand_solvable() {
        let sys = SaddleSystem {
            a_block: DenseMatrix::identity(2).scaled(2.0),
            b_block: DenseMatrix::from_row_major(1, 2, &[1.0, 0.0]),
            c_block: DenseMatrix::zeros(1, 1),
            rhs_top: alloc::vec![0.0, 0.0],
            rhs_bottom: alloc::vec![1.0],
        };
        let (l, lambda) = saddle_solve(&sys).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-12 && l[1].abs() < 1e-12);
        assert!((lambda[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_homogeneous_is_zero() {
        let sys = SaddleSystem {
            a_block: DenseMatrix::from_row_major(2, 2, &[3.0, 1.0, 1.0, 2.0]),
            b_block: DenseMatrix::from_row_major(1, 2, &[1.0, 1.0]),
            c_block: DenseMatrix::zeros(1, 1),
            rhs_top: alloc::vec![0.0, 0.0],
            rhs_bottom: alloc::vec![0.0],
        };
        let (l, lambda) = saddle_solve(&sys).unwrap();
        assert!(norm_inf(&l) < 1e-14 && norm_inf(&lambda) < 1e-14);
    }

    #[test]
    fn saddle_names_offending_block() {
        let sys = SaddleSystem {
            a_block: DenseMatrix::zeros(2, 2),
            b_block: DenseMatrix::from_row_major(1, 2, &[1.0, 0.0]),
            c_block: DenseMatrix::zeros(1, 1),
            rhs_top: alloc::vec![0.0, 0.0],
            rhs_bottom: alloc::vec![1.0],
        };
        assert_eq!(
            saddle_solve(&sys).unwrap_err(),
            Error::Singular { what: "a_block" }
        );
        // B_S with a zero row makes the Schur complement singular
        let sys2 = SaddleSystem {
            a_block: DenseMatrix::identity(2),
            b_block: DenseMatrix::zeros(1, 2),
            c_block: DenseMatrix::zeros(1, 1),
            rhs_top: alloc::vec![0.0, 0.0],
            rhs_bottom: alloc::vec![1.0],
        };
        assert_eq!(
            saddle_solve(&sys2).unwrap_err(),
            Error::Singular {
                what: "schur_complement"
            }
        );
    }
}

//! Dense linear algebra on row-major `f64` matrices.
//!
//! The spectral composition of layer potentials needs large dense products and
//! an LU direct solve; both are built on `matrixmultiply::dgemm` with
//! row-block parallelism. Every entry of a product is written by exactly one
//! `dgemm` call with a fixed internal loop order, so results do not depend on
//! the number of worker threads.

use crate::error::{Error, Result};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Rows per parallel gemm block.
const GEMM_BLOCK: usize = 384;

impl Matrix {
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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    #[inline(always)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline(always)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline(always)]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// self += alpha * other (elementwise).
    pub fn add_scaled(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += alpha * b;
        }
    }

    pub fn add_diagonal(&mut self, alpha: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += alpha;
        }
    }

    /// self := diag(d) * self (scales row i by d[i]).
    pub fn scale_rows(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.rows);
        for (i, row) in self.data.chunks_mut(self.cols).enumerate() {
            let s = d[i];
            for v in row {
                *v *= s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    /// self += alpha * u vᵀ.
    pub fn add_outer(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(v.len(), self.cols);
        for (i, row) in self.data.chunks_mut(self.cols).enumerate() {
            let s = alpha * u[i];
            for (rj, vj) in row.iter_mut().zip(v.iter()) {
                *rj += s * vj;
            }
        }
    }

    /// y = self * x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .par_chunks(self.cols)
            .map(|row| dot(row, x))
            .collect()
    }

    /// y = selfᵀ * x, computed by row sweeps to stay cache-friendly.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, row) in self.data.chunks(self.cols).enumerate() {
            let s = x[i];
            for (yj, aij) in y.iter_mut().zip(row.iter()) {
                *yj += s * aij;
            }
        }
        y
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// tr(self · other) = Σ_ij self_ij other_ji without forming the product.
    pub fn trace_product(&self, other: &Matrix) -> f64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut t = 0.0;
        for i in 0..self.rows {
            let row = self.row(i);
            for j in 0..self.cols {
                t += row[j] * other.get(j, i);
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[inline(always)]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators keep the fma pipeline busy and fix the summation order.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// c = alpha * a * b + beta * c.
pub fn gemm(alpha: f64, a: &Matrix, b: &Matrix, beta: f64, c: &mut Matrix) {
    assert_eq!(a.cols, b.rows);
    assert_eq!(c.rows, a.rows);
    assert_eq!(c.cols, b.cols);
    let (_m, k, n) = (a.rows, a.cols, b.cols);
    let a_addr = a.data.as_ptr() as usize;
    let b_addr = b.data.as_ptr() as usize;
    c.data
        .par_chunks_mut(GEMM_BLOCK * n)
        .enumerate()
        .for_each(|(blk, c_chunk)| {
            let r0 = blk * GEMM_BLOCK;
            let mb = c_chunk.len() / n;
            unsafe {
                matrixmultiply::dgemm(
                    mb,
                    k,
                    n,
                    alpha,
                    (a_addr as *const f64).add(r0 * k),
                    k as isize,
                    1,
                    b_addr as *const f64,
                    n as isize,
                    1,
                    beta,
                    c_chunk.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
}

/// c = a * b.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm(1.0, a, b, 0.0, &mut c);
    c
}

/// LU factorization with partial pivoting, PA = LU stored packed.
pub struct LuFactors {
    n: usize,
    lu: Matrix,
    piv: Vec<usize>,
}

const LU_PANEL: usize = 64;

pub fn lu_factor(a: &Matrix) -> Result<LuFactors> {
    assert_eq!(a.rows, a.cols);
    let mut lu = a.clone();
    let piv = lu_factor_in_place(&mut lu)?;
    Ok(LuFactors {
        n: a.rows,
        lu,
        piv,
    })
}

/// Consumes the input matrix, factoring in place (saves one N² buffer).
pub fn lu_factor_into(a: Matrix) -> Result<LuFactors> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut lu = a;
    let piv = lu_factor_in_place(&mut lu)?;
    Ok(LuFactors { n, lu, piv })
}

fn lu_factor_in_place(a: &mut Matrix) -> Result<Vec<usize>> {
    let n = a.rows;
    let nc = a.cols;
    let mut piv = vec![0usize; n];
    let mut k = 0;
    while k < n {
        let kb = LU_PANEL.min(n - k);
        // Unblocked panel factorization over columns k..k+kb with full row swaps.
        for j in k..k + kb {
            let mut p = j;
            let mut pmax = a.data[j * nc + j].abs();
            for i in j + 1..n {
                let v = a.data[i * nc + j].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::SingularMatrix { col: j });
            }
            piv[j] = p;
            if p != j {
                for c in 0..nc {
                    a.data.swap(j * nc + c, p * nc + c);
                }
            }
            let pivot = a.data[j * nc + j];
            let inv = 1.0 / pivot;
            // Scale sub-column, then rank-1 update restricted to the panel.
            for i in j + 1..n {
                a.data[i * nc + j] *= inv;
            }
            let (upper, lower) = a.data.split_at_mut((j + 1) * nc);
            let urow = &upper[j * nc..j * nc + nc];
            lower
                .par_chunks_mut(nc)
                .for_each(|row| {
                    let lij = row[j];
                    if lij != 0.0 {
                        for c in j + 1..k + kb {
                            row[c] -= lij * urow[c];
                        }
                    }
                });
        }
        if k + kb < n {
            // U12 := L11⁻¹ · A12 (unit lower triangular, forward).
            for j in k + 1..k + kb {
                let (head, tail) = a.data.split_at_mut(j * nc);
                let rowj = &mut tail[..nc];
                for i in k..j {
                    let lji = rowj[i];
                    if lji != 0.0 {
                        let rowi = &head[i * nc..(i + 1) * nc];
                        for c in k + kb..n {
                            rowj[c] -= lji * rowi[c];
                        }
                    }
                }
            }
            // Trailing update A22 -= L21 · U12 via strided dgemm on disjoint blocks.
            let m2 = n - (k + kb);
            let n2 = n - (k + kb);
            let base_addr = a.data.as_mut_ptr() as usize;
            let rows_per_blk = GEMM_BLOCK;
            let nblk = m2.div_ceil(rows_per_blk);
            (0..nblk).into_par_iter().for_each(|blk| {
                let r0 = blk * rows_per_blk;
                let mb = rows_per_blk.min(m2 - r0);
                unsafe {
                    let base = base_addr as *mut f64;
                    let l21 = base.add((k + kb + r0) * nc + k) as *const f64;
                    let u12 = base.add(k * nc + (k + kb)) as *const f64;
                    let c22 = base.add((k + kb + r0) * nc + (k + kb));
                    matrixmultiply::dgemm(
                        mb,
                        kb,
                        n2,
                        -1.0,
                        l21,
                        nc as isize,
                        1,
                        u12,
                        nc as isize,
                        1,
                        1.0,
                        c22,
                        nc as isize,
                        1,
                    );
                }
            });
        }
        k += kb;
    }
    Ok(piv)
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let nc = self.lu.cols;
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
        }
        // L y = Pb (unit lower).
        for i in 1..n {
            let row = &self.lu.data[i * nc..i * nc + i];
            x[i] -= dot(row, &x[..i]);
        }
        // U x = y.
        for i in (0..n).rev() {
            let row = &self.lu.data[i * nc..(i + 1) * nc];
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }

    /// Solve Aᵀ y = c.
    pub fn solve_transpose(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.n);
        let n = self.n;
        let nc = self.lu.cols;
        let mut x = c.to_vec();
        // Uᵀ z = c (lower triangular with U's diagonal).
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu.data[j * nc + i] * x[j];
            }
            x[i] = s / self.lu.data[i * nc + i];
        }
        // Lᵀ w = z (unit upper).
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu.data[j * nc + i] * x[j];
            }
            x[i] = s;
        }
        // y = P⁻¹ w.
        for j in (0..n).rev() {
            x.swap(j, self.piv[j]);
        }
        x
    }
}

/// Two-norm condition number estimate by power iteration: the largest singular
/// value from AᵀA iterations and the smallest from iterations with A⁻¹ solves.
pub fn condition_estimate(a: &Matrix, lu: &LuFactors, iters: usize) -> f64 {
    let n = a.rows();
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 0.7391).sin()))
        .collect();
    normalize_vec(&mut v);
    let mut sigma_max = 0.0;
    for _ in 0..iters {
        let w = a.matvec(&v);
        sigma_max = norm2(&w);
        v = a.matvec_transpose(&w);
        normalize_vec(&mut v);
    }
    let mut u: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 1.1173).cos()))
        .collect();
    normalize_vec(&mut u);
    let mut inv_norm = 0.0;
    for _ in 0..iters {
        let w = lu.solve(&u);
        inv_norm = norm2(&w);
        u = lu.solve_transpose(&w);
        normalize_vec(&mut u);
    }
    sigma_max * inv_norm
}

/// Smallest singular value estimate (power iteration on A⁻¹A⁻ᵀ).
pub fn smallest_singular_value(lu: &LuFactors, iters: usize) -> f64 {
    let n = lu.n();
    let mut u: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 1.1173).cos()))
        .collect();
    normalize_vec(&mut u);
    let mut inv_norm = 1.0;
    for _ in 0..iters {
        let w = lu.solve(&u);
        inv_norm = norm2(&w);
        u = lu.solve_transpose(&w);
        normalize_vec(&mut u);
    }
    1.0 / inv_norm
}

fn normalize_vec(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

/// Least-squares solve of (AᵀA + lambda I) x = Aᵀ b for small systems.
pub fn solve_regularized_normal(a: &Matrix, b: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = a.cols;
    let mut ata = Matrix::zeros(n, n);
    for r in 0..a.rows {
        let row = a.row(r);
        for i in 0..n {
            let ri = row[i];
            if ri != 0.0 {
                for j in 0..n {
                    ata.data[i * n + j] += ri * row[j];
                }
            }
        }
    }
    ata.add_diagonal(lambda);
    let atb = a.matvec_transpose(b);
    let f = lu_factor(&ata)?;
    Ok(f.solve(&atb))
}

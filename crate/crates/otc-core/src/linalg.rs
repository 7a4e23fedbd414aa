//! Small dense linear algebra: LU solves, characteristic polynomials and
//! eigenvalues.
//!
//! Every system in this crate has at most a few dozen unknowns, so the
//! implementations favour clarity over blocking or vectorisation: LU with
//! partial pivoting, the Faddeev-LeVerrier recurrence for characteristic
//! polynomials, and shifted QR iteration on the Hessenberg form for
//! eigenvalues.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinAlgError {
    #[error("matrix is singular at pivot {pivot} (magnitude {magnitude})")]
    SingularMatrix { pivot: usize, magnitude: f64 },
    #[error("QR eigenvalue iteration failed to deflate within {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    pub fn mul_mat(&self, other: &Mat) -> Mat {
        assert_eq!(self.n_cols, other.n_rows);
        let mut out = Mat::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for l in 0..self.n_cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.n_rows.min(self.n_cols)).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.n_cols)
            .map(|j| (0..self.n_rows).map(|i| self[(i, j)].abs()).sum())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// LU factorisation with partial pivoting, reusable across right-hand
/// sides.
pub struct LuFactors {
    lu: Mat,
    perm: Vec<usize>,
}

/// Relative pivot threshold below which the matrix is declared singular.
const PIVOT_REL_TOL: f64 = 1e-14;

pub fn lu_factor(a: &Mat) -> Result<LuFactors, LinAlgError> {
    assert!(a.is_square());
    let n = a.n_rows;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_mag < PIVOT_REL_TOL * scale {
            return Err(LinAlgError::SingularMatrix {
                pivot: col,
                magnitude: pivot_mag,
            });
        }
        if pivot_row != col {
            perm.swap(col, pivot_row);
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
        }
        let pivot = lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            lu[(r, col)] = factor;
            for j in col + 1..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= factor * v;
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl LuFactors {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n_rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>, LinAlgError> {
    Ok(lu_factor(a)?.solve(b))
}

/// 1-norm condition number `||A||_1 * ||A^-1||_1`, with the inverse norm
/// computed exactly column by column. Fine at these sizes.
pub fn condition_one_norm(a: &Mat) -> Result<f64, LinAlgError> {
    let n = a.n_rows;
    let factors = lu_factor(a)?;
    let mut inv_norm: f64 = 0.0;
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = factors.solve(&e);
        e[j] = 0.0;
        inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
    }
    Ok(a.one_norm() * inv_norm)
}

/// Monic characteristic polynomial of a square matrix by the
/// Faddeev-LeVerrier recurrence. Returns coefficients in descending
/// order, `[1, c1, ..., cn]`, so `det(xi I - A) = xi^n + c1 xi^(n-1) + ...`.
pub fn char_poly(a: &Mat) -> Vec<f64> {
    assert!(a.is_square());
    let n = a.n_rows;
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut m = Mat::identity(n);
    for k in 1..=n {
        let am = a.mul_mat(&m);
        let c = -am.trace() / k as f64;
        coeffs.push(c);
        if k < n {
            m = am;
            for i in 0..n {
                m[(i, i)] += c;
            }
        }
    }
    coeffs
}

/// Reduces `A` to upper Hessenberg form by Householder similarity
/// transforms.
fn hessenberg(a: &Mat) -> Mat {
    let n = a.n_rows;
    let mut h = a.clone();
    for col in 0..n.saturating_sub(2) {
        // Householder vector annihilating h[col+2.., col].
        let mut v: Vec<f64> = (col + 1..n).map(|i| h[(i, col)]).collect();
        let alpha = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let alpha = if v[0] > 0.0 { -alpha } else { alpha };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // h <- P h P with P = I - 2 v v^T / (v^T v), acting on rows/cols col+1..
        for j in 0..n {
            let dot: f64 = (0..v.len()).map(|i| v[i] * h[(col + 1 + i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in 0..v.len() {
                h[(col + 1 + i, j)] -= f * v[i];
            }
        }
        for i in 0..n {
            let dot: f64 = (0..v.len()).map(|j| v[j] * h[(i, col + 1 + j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for j in 0..v.len() {
                h[(i, col + 1 + j)] -= f * v[j];
            }
        }
        for i in col + 2..n {
            h[(i, col)] = 0.0;
        }
    }
    h
}

/// Subdiagonal deflation tolerance for the QR iteration.
const DEFLATE_TOL: f64 = 1e-12;

/// Eigenvalues of a real square matrix as `(re, im)` pairs.
///
/// Reduces to Hessenberg form, then runs shifted QR iteration: plain
/// sweeps at first, switching to shifts taken from the trailing 2x2
/// block (applied as an implicit double shift so complex pairs never
/// leave real arithmetic). Caps at `100 n` sweeps.
pub fn eigenvalues(a: &Mat) -> Result<Vec<(f64, f64)>, LinAlgError> {
    assert!(a.is_square());
    let n = a.n_rows;
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![(a[(0, 0)], 0.0)]);
    }
    let mut h = hessenberg(a);
    let mut eigs: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut hi = n; // active block is rows/cols 0..hi
    let max_sweeps = 100 * n;
    let mut sweeps = 0usize;
    let mut stalled = 0usize;
    while hi > 0 {
        if hi == 1 {
            eigs.push((h[(0, 0)], 0.0));
            break;
        }
        // Deflate converged subdiagonal entries at the bottom of the block.
        let mut deflated = false;
        let s = hi - 1;
        let sub = h[(s, s - 1)].abs();
        let local = h[(s - 1, s - 1)].abs() + h[(s, s)].abs();
        if sub <= DEFLATE_TOL * local.max(f64::MIN_POSITIVE) {
            eigs.push((h[(s, s)], 0.0));
            hi -= 1;
            stalled = 0;
            deflated = true;
        } else if hi >= 2 {
            let sub2 = if hi >= 3 { h[(hi - 2, hi - 3)].abs() } else { 0.0 };
            let local2 = if hi >= 3 {
                h[(hi - 3, hi - 3)].abs() + h[(hi - 2, hi - 2)].abs()
            } else {
                0.0
            };
            if hi == 2 || sub2 <= DEFLATE_TOL * local2.max(f64::MIN_POSITIVE) {
                // Trailing 2x2 block is isolated: take its eigenvalues.
                let (a11, a12) = (h[(hi - 2, hi - 2)], h[(hi - 2, hi - 1)]);
                let (a21, a22) = (h[(hi - 1, hi - 2)], h[(hi - 1, hi - 1)]);
                let tr = a11 + a22;
                let det = a11 * a22 - a12 * a21;
                let disc = tr * tr / 4.0 - det;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    eigs.push((tr / 2.0 + sq, 0.0));
                    eigs.push((tr / 2.0 - sq, 0.0));
                } else {
                    let im = (-disc).sqrt();
                    eigs.push((tr / 2.0, im));
                    eigs.push((tr / 2.0, -im));
                }
                hi -= 2;
                stalled = 0;
                deflated = true;
            }
        }
        if deflated {
            continue;
        }
        if sweeps >= max_sweeps {
            return Err(LinAlgError::NoConvergence(max_sweeps));
        }
        sweeps += 1;
        stalled += 1;

        // Shift pair from the trailing 2x2 block (sum and product), with
        // an exceptional perturbation if progress has stalled.
        let (mut sh_sum, mut sh_prod);
        {
            let a11 = h[(hi - 2, hi - 2)];
            let a12 = h[(hi - 2, hi - 1)];
            let a21 = h[(hi - 1, hi - 2)];
            let a22 = h[(hi - 1, hi - 1)];
            sh_sum = a11 + a22;
            sh_prod = a11 * a22 - a12 * a21;
        }
        if sweeps <= 2 {
            // Unshifted warm-up sweeps.
            sh_sum = 0.0;
            sh_prod = 0.0;
        } else if stalled > 0 && stalled % 10 == 0 {
            let s = h[(hi - 1, hi - 2)].abs() + if hi >= 3 { h[(hi - 2, hi - 3)].abs() } else { 0.0 };
            sh_sum = 1.5 * s;
            sh_prod = s * s;
        }

        implicit_double_shift_sweep(&mut h, hi, sh_sum, sh_prod);
    }
    Ok(eigs)
}

/// One implicit double-shift QR sweep on the leading `hi x hi` block of
/// the Hessenberg matrix, with shift polynomial `x^2 - sh_sum x + sh_prod`.
fn implicit_double_shift_sweep(h: &mut Mat, hi: usize, sh_sum: f64, sh_prod: f64) {
    let n = h.n_rows;
    // First column of (H - s1)(H - s2).
    let mut x = h[(0, 0)] * h[(0, 0)] + h[(0, 1)] * h[(1, 0)] - sh_sum * h[(0, 0)] + sh_prod;
    let mut y = h[(1, 0)] * (h[(0, 0)] + h[(1, 1)] - sh_sum);
    let mut z = if hi > 2 { h[(2, 1)] * h[(1, 0)] } else { 0.0 };

    for k in 0..hi - 1 {
        // Householder reflection mapping (x,y,z) to a multiple of e1.
        let window = if k + 2 < hi { 3 } else { 2 };
        let mut v = [x, y, z];
        if window == 2 {
            v[2] = 0.0;
        }
        let alpha = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if alpha != 0.0 {
            let alpha = if v[0] > 0.0 { -alpha } else { alpha };
            v[0] -= alpha;
            let vnorm2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            if vnorm2 > 0.0 {
                let row0 = k;
                // Apply P from the left to rows k..k+window.
                let col_start = k.saturating_sub(1);
                for j in col_start..n {
                    let mut dot = 0.0;
                    for (idx, vi) in v.iter().enumerate().take(window) {
                        dot += vi * h[(row0 + idx, j)];
                    }
                    let f = 2.0 * dot / vnorm2;
                    for (idx, vi) in v.iter().enumerate().take(window) {
                        h[(row0 + idx, j)] -= f * vi;
                    }
                }
                // Apply P from the right to columns k..k+window.
                let row_end = (k + 4).min(hi);
                for i in 0..row_end {
                    let mut dot = 0.0;
                    for (idx, vj) in v.iter().enumerate().take(window) {
                        dot += vj * h[(i, row0 + idx)];
                    }
                    let f = 2.0 * dot / vnorm2;
                    for (idx, vj) in v.iter().enumerate().take(window) {
                        h[(i, row0 + idx)] -= f * vj;
                    }
                }
            }
        }
        if k + 1 < hi - 1 {
            x = h[(k + 1, k)];
            y = h[(k + 2, k)];
            z = if k + 3 < hi { h[(k + 3, k)] } else { 0.0 };
        }
    }
    // Restore exact Hessenberg zeros below the first subdiagonal.
    for i in 2..hi {
        for j in 0..i - 1 {
            h[(i, j)] = 0.0;
        }
    }
}

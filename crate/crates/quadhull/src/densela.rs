//! Small dense real linear algebra: symmetric eigendecomposition by cyclic
//! Jacobi rotations, LU solves, and rank-revealing Gauss-Jordan elimination.
//!
//! Everything here targets matrices up to a few dozen rows; no attempt is
//! made at cache blocking or sparsity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Mat::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.row(i).to_vec()
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// self^T * x without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += self.get(i, j) * xi;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// (self + self^T) / 2.
    pub fn symmetrized(&self) -> Mat {
        assert_eq!(self.rows, self.cols);
        Mat::from_fn(self.rows, self.cols, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Rank by Gaussian elimination with complete pivoting.
    pub fn rank(&self, tol: f64) -> usize {
        let mut a = self.clone();
        let scale = a.max_abs().max(1.0);
        let mut rank = 0;
        let mut used_rows = vec![false; a.rows];
        let mut used_cols = vec![false; a.cols];
        loop {
            let mut best = (0usize, 0usize, 0.0f64);
            for i in 0..a.rows {
                if used_rows[i] {
                    continue;
                }
                for j in 0..a.cols {
                    if used_cols[j] {
                        continue;
                    }
                    let v = a.get(i, j).abs();
                    if v > best.2 {
                        best = (i, j, v);
                    }
                }
            }
            if best.2 <= tol * scale {
                return rank;
            }
            let (pi, pj, _) = best;
            used_rows[pi] = true;
            used_cols[pj] = true;
            rank += 1;
            let pivot = a.get(pi, pj);
            for i in 0..a.rows {
                if used_rows[i] || a.get(i, pj) == 0.0 {
                    continue;
                }
                let f = a.get(i, pj) / pivot;
                for j in 0..a.cols {
                    let v = a.get(i, j) - f * a.get(pi, j);
                    a.set(i, j, v);
                }
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending and an orthogonal `V` such that
/// `m = V^T * diag(vals) * V`; row `i` of `V` is the eigenvector of `vals[i]`.
pub fn sym_eigen(m: &Mat, tol: f64) -> Result<(Vec<f64>, Mat)> {
    if m.rows() != m.cols() {
        return Err(Error::InvalidInput(format!(
            "sym_eigen: matrix is {}x{}, not square",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput("sym_eigen: non-finite entries".into()));
    }
    let scale = m.max_abs().max(1.0);
    if !m.is_symmetric(tol * scale) {
        return Err(Error::InvalidInput("sym_eigen: matrix not symmetric within tolerance".into()));
    }

    let n = m.rows();
    let mut a = m.symmetrized();
    // Accumulates the product of rotations; columns end up as eigenvectors.
    let mut q = Mat::identity(n);
    let fro = a.frobenius_norm();
    let threshold = 1e-12 * fro.max(f64::MIN_POSITIVE);

    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for r in (p + 1)..n {
                off += a.get(p, r) * a.get(p, r);
            }
        }
        if (2.0 * off).sqrt() <= threshold {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for r in (p + 1)..n {
                let apq = a.get(p, r);
                if apq.abs() <= threshold / (n as f64 * n as f64) {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(r, r);
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e12 {
                    0.5 / theta
                } else {
                    let s = theta.signum();
                    s / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for j in 0..n {
                    let ajp = a.get(j, p);
                    let ajq = a.get(j, r);
                    a.set(j, p, c * ajp - s * ajq);
                    a.set(j, r, s * ajp + c * ajq);
                }
                for j in 0..n {
                    let apj = a.get(p, j);
                    let aqj = a.get(r, j);
                    a.set(p, j, c * apj - s * aqj);
                    a.set(r, j, s * apj + c * aqj);
                }
                for j in 0..n {
                    let qjp = q.get(j, p);
                    let qjq = q.get(j, r);
                    q.set(j, p, c * qjp - s * qjq);
                    q.set(j, r, s * qjp + c * qjq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap().then(i.cmp(&j)));

    let vals: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    // Row k of V is the eigenvector for vals[k], i.e. column order[k] of q.
    let v = Mat::from_fn(n, n, |k, j| q.get(j, order[k]));
    Ok((vals, v))
}

/// Result of Gauss-Jordan elimination on `M x = f`.
#[derive(Debug, Clone)]
pub struct RowReduction {
    pub rank: usize,
    /// Pivot columns, one per eliminated row; `basic_cols[r]` pairs with row r of `coeffs`.
    pub basic_cols: Vec<usize>,
    /// Non-pivot columns, ascending.
    pub free_cols: Vec<usize>,
    /// `rank x free` matrix C of `x_B = C x_N + h`.
    pub coeffs: Mat,
    /// Offset h of the parametrization.
    pub offset: Vec<f64>,
}

impl RowReduction {
    /// Expands free-variable values into the full solution vector.
    pub fn expand(&self, free_vals: &[f64]) -> Vec<f64> {
        assert_eq!(free_vals.len(), self.free_cols.len());
        let n = self.basic_cols.len() + self.free_cols.len();
        let mut x = vec![0.0; n];
        for (k, &j) in self.free_cols.iter().enumerate() {
            x[j] = free_vals[k];
        }
        let basic = self.coeffs.matvec(free_vals);
        for (r, &j) in self.basic_cols.iter().enumerate() {
            x[j] = basic[r] + self.offset[r];
        }
        x
    }
}

/// Solves `M x = f` by Gauss-Jordan elimination with complete pivoting,
/// returning the parametrization `x_B = C x_N + h` of the solution set.
///
/// Entries below `tol` (relative to the data scale) are treated as zero. A row
/// reducing to `0 = nonzero` yields an `Infeasible` error.
pub fn row_reduce(m: &Mat, rhs: &[f64], tol: f64) -> Result<RowReduction> {
    if m.rows() != rhs.len() {
        return Err(Error::InvalidInput(format!(
            "row_reduce: {} rows but rhs of length {}",
            m.rows(),
            rhs.len()
        )));
    }
    let rows = m.rows();
    let cols = m.cols();
    let scale = m.max_abs().max(norm_inf(rhs)).max(1.0);
    let eps = tol * scale;

    let mut a = m.clone();
    let mut f = rhs.to_vec();
    let mut pivot_of_row: Vec<Option<usize>> = vec![None; rows];
    let mut col_used = vec![false; cols];

    loop {
        // largest remaining entry over unpivoted rows and columns
        let mut best = (0usize, 0usize, 0.0f64);
        for i in 0..rows {
            if pivot_of_row[i].is_some() {
                continue;
            }
            for j in 0..cols {
                if col_used[j] {
                    continue;
                }
                let v = a.get(i, j).abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= eps {
            break;
        }
        let (pi, pj, _) = best;
        let pv = a.get(pi, pj);
        for j in 0..cols {
            a.set(pi, j, a.get(pi, j) / pv);
        }
        f[pi] /= pv;
        a.set(pi, pj, 1.0);
        for i in 0..rows {
            if i == pi {
                continue;
            }
            let factor = a.get(i, pj);
            if factor == 0.0 {
                continue;
            }
            for j in 0..cols {
                let v = a.get(i, j) - factor * a.get(pi, j);
                a.set(i, j, v);
            }
            f[i] -= factor * f[pi];
            a.set(i, pj, 0.0);
        }
        pivot_of_row[pi] = Some(pj);
        col_used[pj] = true;
    }

    for i in 0..rows {
        if pivot_of_row[i].is_none() && f[i].abs() > eps {
            return Err(Error::Infeasible(format!(
                "row_reduce: row {} reduces to 0 = {:.3e}",
                i, f[i]
            )));
        }
    }

    let mut pivots: Vec<(usize, usize)> = pivot_of_row
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|j| (j, i)))
        .collect();
    pivots.sort_unstable();
    let basic_cols: Vec<usize> = pivots.iter().map(|&(j, _)| j).collect();
    let free_cols: Vec<usize> = (0..cols).filter(|j| !col_used[*j]).collect();
    let rank = basic_cols.len();

    // Row (j, i): x_j + sum over free cols of a[i, jf] x_jf = f[i]
    let mut coeffs = Mat::zeros(rank, free_cols.len());
    let mut offset = vec![0.0; rank];
    for (r, &(_, i)) in pivots.iter().enumerate() {
        offset[r] = f[i];
        for (k, &jf) in free_cols.iter().enumerate() {
            coeffs.set(r, k, -a.get(i, jf));
        }
    }

    Ok(RowReduction { rank, basic_cols, free_cols, coeffs, offset })
}

/// Dense LU factorization with partial pivoting.
///
/// Pivots that vanish relative to the matrix scale are replaced by a tiny
/// signed perturbation instead of aborting; callers relying on exact rank
/// decisions should use [`Mat::rank`] instead.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    singular: bool,
}

impl Lu {
    pub fn factor(m: &Mat) -> Lu {
        assert_eq!(m.rows(), m.cols());
        let n = m.rows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        let pivot_floor = 1e-14 * m.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for i in (k + 1)..n {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= pivot_floor {
                // dynamic regularization of a numerically vanished pivot
                singular = true;
                let cur = lu.get(k, k);
                let bump = if cur < 0.0 { -pivot_floor } else { pivot_floor };
                lu.set(k, k, cur + bump);
                p = k;
            }
            if p != k {
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
                perm.swap(k, p);
            }
            let pivot = lu.get(k, k);
            // row-sliced elimination keeps the inner loop free of index math
            let (top, bottom) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n + k + 1..k * n + n];
            for row in bottom.chunks_exact_mut(n) {
                let f = row[k] / pivot;
                row[k] = f;
                if f == 0.0 {
                    continue;
                }
                for (dst, &src) in row[k + 1..n].iter_mut().zip(pivot_row) {
                    *dst -= f * src;
                }
            }
        }
        Lu { lu, perm, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu.get(i, j) * x[j];
            }
            let d = self.lu.get(i, i);
            if d == 0.0 {
                return None;
            }
            x[i] = s / d;
        }
        if x.iter().all(|v| v.is_finite()) {
            Some(x)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(vals: &[f64], v: &Mat) -> Mat {
        v.transpose().matmul(&Mat::diag(vals)).matmul(v)
    }

    #[test]
    fn eigen_identity() {
        let (vals, v) = sym_eigen(&Mat::identity(2), 1e-10).unwrap();
        assert_eq!(vals, vec![1.0, 1.0]);
        let vtv = v.transpose().matmul(&v);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv.get(i, j) - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn eigen_2x2_analytic() {
        let m = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (vals, _) = sym_eigen(&m, 1e-10).unwrap();
        assert!((vals[0] - 3.0).abs() <= 1e-12);
        assert!((vals[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn eigen_random_reconstruction() {
        // fixed LCG so the test is deterministic
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for n in 2..=10usize {
            let mut m = Mat::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = next() * 3.0;
                    m.set(i, j, v);
                    m.set(j, i, v);
                }
            }
            let (vals, v) = sym_eigen(&m, 1e-10).unwrap();
            let rec = reconstruct(&vals, &v);
            let scale = 1.0 + m.max_abs();
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (rec.get(i, j) - m.get(i, j)).abs() <= 1e-10 * scale,
                        "reconstruction error at ({i},{j}) for n={n}"
                    );
                }
            }
            let vtv = v.transpose().matmul(&v);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vtv.get(i, j) - want).abs() <= 1e-10);
                }
            }
            // descending order
            for k in 1..n {
                assert!(vals[k - 1] >= vals[k] - 1e-12);
            }
        }
    }

    #[test]
    fn eigen_rejects_asymmetric() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(sym_eigen(&m, 1e-10).is_err());
    }

    #[test]
    fn row_reduce_single_equation() {
        let m = Mat::from_rows(&[vec![1.0, 1.0]]);
        let r = row_reduce(&m, &[1.0], 1e-10).unwrap();
        assert_eq!(r.rank, 1);
        // x_B = 1 - x_N
        let x = r.expand(&[0.25]);
        assert!((x[0] + x[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn row_reduce_identity_system() {
        let m = Mat::identity(2);
        let r = row_reduce(&m, &[2.0, 3.0], 1e-10).unwrap();
        assert_eq!(r.rank, 2);
        let x = r.expand(&[]);
        assert!((x[0] - 2.0).abs() <= 1e-12 && (x[1] - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn row_reduce_detects_contradiction() {
        let m = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        match row_reduce(&m, &[1.0, 3.0], 1e-10) {
            Err(Error::Infeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn row_reduce_substitution_roundtrip() {
        let mut state = 99u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let (k, n) = (2usize, 5usize);
            let m = Mat::from_fn(k, n, |_, _| next());
            let x0: Vec<f64> = (0..n).map(|_| next()).collect();
            let f = m.matvec(&x0);
            let r = row_reduce(&m, &f, 1e-10).unwrap();
            assert_eq!(r.rank, 2);
            let free: Vec<f64> = (0..r.free_cols.len()).map(|_| next()).collect();
            let x = r.expand(&free);
            let back = m.matvec(&x);
            for i in 0..k {
                assert!((back[i] - f[i]).abs() <= 1e-10, "substitution mismatch");
            }
        }
    }

    #[test]
    fn lu_solve_roundtrip() {
        let m = Mat::from_rows(&[
            vec![4.0, -2.0, 1.0],
            vec![1.0, 5.0, -1.0],
            vec![2.0, 1.0, 6.0],
        ]);
        let lu = Lu::factor(&m);
        let x = lu.solve(&[1.0, 2.0, 3.0]).unwrap();
        let b = m.matvec(&x);
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] - 2.0).abs() < 1e-12);
        assert!((b[2] - 3.0).abs() < 1e-12);
    }
}

//! Dense row-major matrix kernels.
//!
//! Shared by the SVD solver ([`crate::lsi`]) and the tensor engine
//! ([`crate::net`]). All kernels accumulate (`out += a * b`) with a fixed
//! summation order, so results are bitwise reproducible for a given build.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// `out[m×n] += a[m×k] · b[k×n]`.
pub fn matmul_nn<T: Float>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(out.len(), m * n);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for (kk, &a_ik) in a[i * k..(i + 1) * k].iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o = *o + a_ik * bv;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ` (dot products of rows).
pub fn matmul_nt<T: Float>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), n * k);
    assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = *o + dot(a_row, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `out[m×n] += a[k×m]ᵀ · b[k×n]` (sum of outer products).
pub fn matmul_tn<T: Float>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), k * m);
    assert_eq!(b.len(), k * n);
    assert_eq!(out.len(), m * n);
    for kk in 0..k {
        let a_row = &a[kk * m..(kk + 1) * m];
        let b_row = &b[kk * n..(kk + 1) * n];
        for (i, &a_ki) in a_row.iter().enumerate() {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o = *o + a_ki * bv;
            }
        }
    }
}

/// Dot product with four independent accumulators. The reduction structure
/// is fixed in source so the summation order does not depend on the target's
/// vector width.
pub fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let mut chunks_a = a.chunks_exact(4);
    let mut chunks_b = b.chunks_exact(4);
    for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
        for l in 0..4 {
            acc[l] = acc[l] + ca[l] * cb[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Small dense f64 matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self · other`.
    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        matmul_nn(&self.data, &other.data, &mut out.data, self.rows, self.cols, other.cols);
        out
    }

    /// `selfᵀ · other`.
    pub fn t_mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        let mut out = Mat::zeros(self.cols, other.cols);
        matmul_tn(&self.data, &other.data, &mut out.data, self.cols, self.rows, other.cols);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-increasing order with the matching eigenvectors
/// as columns. Fails only if the off-diagonal mass has not converged after
/// `max_sweeps` full sweeps.
pub fn eigen_symmetric(a: &Mat, max_sweeps: usize) -> Result<(Vec<f64>, Mat), usize> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let total_norm = m.frobenius_norm();
    let tol = 1e-14 * total_norm.max(1e-300);

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        let mut off = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                off += m.get(r, c) * m.get(r, c);
            }
        }
        if (2.0 * off).sqrt() <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
        sweeps += 1;
    }
    if !converged {
        // One last check after the final sweep.
        let mut off = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                off += m.get(r, c) * m.get(r, c);
            }
        }
        if (2.0 * off).sqrt() > tol {
            return Err(sweeps);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eigvals: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    order.sort_by(|&i, &j| eigvals[j].partial_cmp(&eigvals[i]).unwrap().then(i.cmp(&j)));
    let sorted_vals: Vec<f64> = order.iter().map(|&i| eigvals[i]).collect();
    let mut sorted_vecs = Mat::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            sorted_vecs.set(r, new_c, v.get(r, old_c));
        }
    }
    Ok((sorted_vals, sorted_vecs))
}

/// Orthonormalize the columns of `a` in place by modified Gram-Schmidt with
/// one re-orthogonalization pass. Columns that turn out linearly dependent
/// are zeroed.
pub fn orthonormalize_columns(a: &mut Mat) {
    let (rows, cols) = (a.rows, a.cols);
    let mut col = vec![0.0; rows];
    for j in 0..cols {
        for r in 0..rows {
            col[r] = a.get(r, j);
        }
        for _pass in 0..2 {
            for i in 0..j {
                let mut proj = 0.0;
                for r in 0..rows {
                    proj += a.get(r, i) * col[r];
                }
                for r in 0..rows {
                    col[r] -= proj * a.get(r, i);
                }
            }
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for r in 0..rows {
                a.set(r, j, col[r] / norm);
            }
        } else {
            for r in 0..rows {
                a.set(r, j, 0.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_nn_small() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        matmul_nn(&a, &b, &mut c, 2, 2, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_variants_agree() {
        let mut rng = crate::rng::Rng::from_seed(1);
        let (m, k, n) = (5, 7, 6);
        let a: Vec<f64> = (0..m * k).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let b: Vec<f64> = (0..k * n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut c_nn = vec![0.0; m * n];
        matmul_nn(&a, &b, &mut c_nn, m, k, n);

        // a in transposed layout, multiply via tn
        let mut a_t = vec![0.0; k * m];
        for i in 0..m {
            for j in 0..k {
                a_t[j * m + i] = a[i * k + j];
            }
        }
        let mut c_tn = vec![0.0; m * n];
        matmul_tn(&a_t, &b, &mut c_tn, m, k, n);

        // b in transposed layout, multiply via nt
        let mut b_t = vec![0.0; n * k];
        for i in 0..k {
            for j in 0..n {
                b_t[j * k + i] = b[i * n + j];
            }
        }
        let mut c_nt = vec![0.0; m * n];
        matmul_nt(&a, &b_t, &mut c_nt, m, k, n);

        for i in 0..m * n {
            assert!((c_nn[i] - c_tn[i]).abs() < 1e-12);
            assert!((c_nn[i] - c_nt[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_diagonal() {
        let a = Mat::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let (vals, vecs) = eigen_symmetric(&a, 50).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs.get(0, 0).abs() - 1.0).abs() < 1e-12);
        assert!((vecs.get(1, 1).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        let mut rng = crate::rng::Rng::from_seed(2);
        let n = 12;
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.uniform(-1.0, 1.0);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let (vals, vecs) = eigen_symmetric(&a, 50).unwrap();
        // A ≈ V diag(vals) Vᵀ
        let mut recon = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += vecs.get(i, k) * vals[k] * vecs.get(j, k);
                }
                recon.set(i, j, s);
            }
        }
        for i in 0..n * n {
            assert!((recon.data[i] - a.data[i]).abs() < 1e-9);
        }
        // sorted non-increasing
        for w in vals.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn gram_schmidt_orthonormal() {
        let mut rng = crate::rng::Rng::from_seed(3);
        let mut a = Mat::zeros(10, 4);
        for v in a.data.iter_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        orthonormalize_columns(&mut a);
        for i in 0..4 {
            for j in 0..4 {
                let mut d = 0.0;
                for r in 0..10 {
                    d += a.get(r, i) * a.get(r, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10, "col {i} col {j} dot {d}");
            }
        }
    }
}

//! Shared test oracles, intentionally written against different algorithms
//! than the library paths they check.

use xmodal_core::mat::Mat;

/// Full SVD by one-sided Jacobi rotations on columns: numerically
/// independent of the library's Gram-matrix eigendecomposition route.
/// Returns (U m×p, σ, V n×p) with p = min(m, n), σ non-increasing.
pub fn svd_oracle(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    if a.rows < a.cols {
        let (u, s, v) = svd_oracle_tall(&a.transpose());
        return (v, s, u);
    }
    svd_oracle_tall(a)
}

fn svd_oracle_tall(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    let (m, n) = (a.rows, a.cols);
    let mut work = a.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..60 {
        let mut max_off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..m {
                    let (x, y) = (work.get(r, p), work.get(r, q));
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let off = gamma.abs() / (alpha * beta).sqrt();
                max_off = max_off.max(off);
                if off < 1e-15 {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let (x, y) = (work.get(r, p), work.get(r, q));
                    work.set(r, p, c * x - s * y);
                    work.set(r, q, s * x + c * y);
                }
                for r in 0..n {
                    let (x, y) = (v.get(r, p), v.get(r, q));
                    v.set(r, p, c * x - s * y);
                    v.set(r, q, s * x + c * y);
                }
            }
        }
        if max_off < 1e-14 {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|r| work.get(r, j) * work.get(r, j)).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));
    let mut u = Mat::zeros(m, n);
    let mut v_sorted = Mat::zeros(n, n);
    let sorted_sigma: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    for (k, &j) in order.iter().enumerate() {
        if sigma[j] > 0.0 {
            for r in 0..m {
                u.set(r, k, work.get(r, j) / sigma[j]);
            }
        }
        for r in 0..n {
            v_sorted.set(r, k, v.get(r, j));
        }
    }
    sigma = sorted_sigma;
    (u, sigma, v_sorted)
}

/// Pairwise cosines of the rows of `v` (n×p), zero rows giving NaN.
pub fn row_cosines(v: &Mat) -> Mat {
    let n = v.rows;
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (mut dij, mut di, mut dj) = (0.0, 0.0, 0.0);
            for k in 0..v.cols {
                dij += v.get(i, k) * v.get(j, k);
                di += v.get(i, k) * v.get(i, k);
                dj += v.get(j, k) * v.get(j, k);
            }
            out.set(i, j, dij / (di.sqrt() * dj.sqrt()));
        }
    }
    out
}

//! Single-direction GRU with backpropagation through time.
//!
//! Gate math follows the convention where the recurrent candidate
//! contribution is gated *inside* the tanh:
//!
//! ```text
//! r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//! n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//! h' = (1 - z) * n + z * h
//! ```
//!
//! Weight rows are gate-major: rows `[0, H)` belong to r, `[H, 2H)` to z,
//! `[2H, 3H)` to n. A direction owns its time order via `reverse`; callers
//! always pass the sequence in natural order.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::mat::{matmul_nn, matmul_nt, matmul_tn, Mat};
use crate::net::c;
use crate::net::tensor::Tensor;
use crate::rng::Rng;

pub struct GruDirection<F> {
    /// `[3H, D]` input weights.
    pub w_ih: Tensor<F>,
    /// `[3H, H]` recurrent weights.
    pub w_hh: Tensor<F>,
    pub b_ih: Tensor<F>,
    pub b_hh: Tensor<F>,
    pub hidden: usize,
    pub input_dim: usize,
    pub reverse: bool,
}

/// Per-step activations saved by the forward pass, indexed by processing
/// step (not natural time). `h` has one extra leading entry for the zero
/// initial state; the final state is `h[steps]`.
pub struct GruCache<F> {
    pub r: Vec<Vec<F>>,
    pub z: Vec<Vec<F>>,
    pub n: Vec<Vec<F>>,
    pub gh_n: Vec<Vec<F>>,
    pub h: Vec<Vec<F>>,
}

impl<F: Float> GruDirection<F> {
    /// Glorot-uniform input weights per gate block, orthogonal recurrent
    /// weights per gate block, zero biases.
    pub fn new(input_dim: usize, hidden: usize, reverse: bool, rng: &mut Rng) -> Self {
        let mut w_ih = Tensor::zeros(&[3 * hidden, input_dim]);
        let limit = (6.0 / ((input_dim + hidden) as f64)).sqrt();
        for v in w_ih.data.iter_mut() {
            *v = c(rng.uniform(-limit, limit));
        }
        let mut w_hh = Tensor::zeros(&[3 * hidden, hidden]);
        for gate in 0..3 {
            let mut q = Mat::zeros(hidden, hidden);
            for v in q.data.iter_mut() {
                *v = rng.normal();
            }
            crate::mat::orthonormalize_columns(&mut q);
            for r in 0..hidden {
                for col in 0..hidden {
                    w_hh.data[(gate * hidden + r) * hidden + col] = c(q.get(r, col));
                }
            }
        }
        GruDirection {
            w_ih,
            w_hh,
            b_ih: Tensor::zeros(&[3 * hidden]),
            b_hh: Tensor::zeros(&[3 * hidden]),
            hidden,
            input_dim,
            reverse,
        }
    }

    fn time_index(&self, step: usize, steps: usize) -> usize {
        if self.reverse {
            steps - 1 - step
        } else {
            step
        }
    }

    /// `xs[t]` is the batch input at natural time `t`, `batch * input_dim` long.
    pub fn forward(&self, xs: &[Vec<F>], batch: usize) -> GruCache<F> {
        let h_dim = self.hidden;
        let steps = xs.len();
        let mut cache = GruCache {
            r: Vec::with_capacity(steps),
            z: Vec::with_capacity(steps),
            n: Vec::with_capacity(steps),
            gh_n: Vec::with_capacity(steps),
            h: Vec::with_capacity(steps + 1),
        };
        cache.h.push(vec![F::zero(); batch * h_dim]);
        let mut gi = vec![F::zero(); batch * 3 * h_dim];
        let mut gh = vec![F::zero(); batch * 3 * h_dim];
        for step in 0..steps {
            let x = &xs[self.time_index(step, steps)];
            let h_prev = cache.h[step].clone();
            gi.fill(F::zero());
            matmul_nt(x, &self.w_ih.data, &mut gi, batch, self.input_dim, 3 * h_dim);
            gh.fill(F::zero());
            matmul_nt(&h_prev, &self.w_hh.data, &mut gh, batch, h_dim, 3 * h_dim);
            let mut r = vec![F::zero(); batch * h_dim];
            let mut z = vec![F::zero(); batch * h_dim];
            let mut n = vec![F::zero(); batch * h_dim];
            let mut gh_n = vec![F::zero(); batch * h_dim];
            let mut h = vec![F::zero(); batch * h_dim];
            for item in 0..batch {
                for j in 0..h_dim {
                    let gi_r = gi[item * 3 * h_dim + j] + self.b_ih.data[j];
                    let gi_z = gi[item * 3 * h_dim + h_dim + j] + self.b_ih.data[h_dim + j];
                    let gi_n = gi[item * 3 * h_dim + 2 * h_dim + j] + self.b_ih.data[2 * h_dim + j];
                    let gh_r = gh[item * 3 * h_dim + j] + self.b_hh.data[j];
                    let gh_z = gh[item * 3 * h_dim + h_dim + j] + self.b_hh.data[h_dim + j];
                    let ghn = gh[item * 3 * h_dim + 2 * h_dim + j] + self.b_hh.data[2 * h_dim + j];
                    let i = item * h_dim + j;
                    r[i] = sigmoid(gi_r + gh_r);
                    z[i] = sigmoid(gi_z + gh_z);
                    gh_n[i] = ghn;
                    n[i] = (gi_n + r[i] * ghn).tanh();
                    h[i] = (F::one() - z[i]) * n[i] + z[i] * h_prev[i];
                }
            }
            cache.r.push(r);
            cache.z.push(z);
            cache.n.push(n);
            cache.gh_n.push(gh_n);
            cache.h.push(h);
        }
        cache
    }

    /// Accumulates parameter gradients and adds input gradients into
    /// `d_xs` (natural time order). `d_final` is the gradient with respect
    /// to the direction's final hidden state.
    pub fn backward(
        &mut self,
        xs: &[Vec<F>],
        cache: &GruCache<F>,
        d_final: &[F],
        batch: usize,
        d_xs: &mut [Vec<F>],
    ) {
        let h_dim = self.hidden;
        let steps = xs.len();
        let mut dh = d_final.to_vec();
        let mut dgi = vec![F::zero(); batch * 3 * h_dim];
        let mut dgh = vec![F::zero(); batch * 3 * h_dim];
        let mut dx = vec![F::zero(); batch * self.input_dim];
        let mut dh_rec = vec![F::zero(); batch * h_dim];
        for step in (0..steps).rev() {
            let t = self.time_index(step, steps);
            let (r, z, n, gh_n) = (&cache.r[step], &cache.z[step], &cache.n[step], &cache.gh_n[step]);
            let h_prev = &cache.h[step];
            for item in 0..batch {
                for j in 0..h_dim {
                    let i = item * h_dim + j;
                    let dz = dh[i] * (h_prev[i] - n[i]);
                    let dn = dh[i] * (F::one() - z[i]);
                    let da_n = dn * (F::one() - n[i] * n[i]);
                    let dr = da_n * gh_n[i];
                    let da_r = dr * r[i] * (F::one() - r[i]);
                    let da_z = dz * z[i] * (F::one() - z[i]);
                    dgi[item * 3 * h_dim + j] = da_r;
                    dgi[item * 3 * h_dim + h_dim + j] = da_z;
                    dgi[item * 3 * h_dim + 2 * h_dim + j] = da_n;
                    dgh[item * 3 * h_dim + j] = da_r;
                    dgh[item * 3 * h_dim + h_dim + j] = da_z;
                    dgh[item * 3 * h_dim + 2 * h_dim + j] = da_n * r[i];
                    // carry through the copy gate; recurrent matmul term added below
                    dh[i] = dh[i] * z[i];
                }
            }
            for gate_row in 0..3 * h_dim {
                let mut si = F::zero();
                let mut sh = F::zero();
                for item in 0..batch {
                    si = si + dgi[item * 3 * h_dim + gate_row];
                    sh = sh + dgh[item * 3 * h_dim + gate_row];
                }
                self.b_ih.grad[gate_row] = self.b_ih.grad[gate_row] + si;
                self.b_hh.grad[gate_row] = self.b_hh.grad[gate_row] + sh;
            }
            matmul_tn(&dgi, &xs[t], &mut self.w_ih.grad, 3 * h_dim, batch, self.input_dim);
            matmul_tn(&dgh, h_prev, &mut self.w_hh.grad, 3 * h_dim, batch, h_dim);
            dx.fill(F::zero());
            matmul_nn(&dgi, &self.w_ih.data, &mut dx, batch, 3 * h_dim, self.input_dim);
            for (dst, &v) in d_xs[t].iter_mut().zip(&dx) {
                *dst = *dst + v;
            }
            dh_rec.fill(F::zero());
            matmul_nn(&dgh, &self.w_hh.data, &mut dh_rec, batch, 3 * h_dim, h_dim);
            for (dst, &v) in dh.iter_mut().zip(&dh_rec) {
                *dst = *dst + v;
            }
        }
    }
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(dir: &GruDirection<f64>, xs: &[Vec<f64>], batch: usize, probe: &[f64]) -> f64 {
        let cache = dir.forward(xs, batch);
        cache.h[xs.len()].iter().zip(probe).map(|(h, p)| h * p).sum()
    }

    /// BPTT gradients against central finite differences on a tiny setup.
    #[test]
    fn gradients_match_finite_differences() {
        for &reverse in &[false, true] {
            let mut rng = Rng::from_seed(42);
            let (d, h, steps, batch) = (3usize, 2usize, 3usize, 2usize);
            let mut dir: GruDirection<f64> = GruDirection::new(d, h, reverse, &mut rng);
            // nonzero biases so their gradients are exercised too
            for v in dir.b_ih.data.iter_mut().chain(dir.b_hh.data.iter_mut()) {
                *v = rng.uniform(-0.5, 0.5);
            }
            let xs: Vec<Vec<f64>> = (0..steps)
                .map(|_| (0..batch * d).map(|_| rng.uniform(-1.0, 1.0)).collect())
                .collect();
            let probe: Vec<f64> = (0..batch * h).map(|_| rng.uniform(-1.0, 1.0)).collect();

            let cache = dir.forward(&xs, batch);
            let mut d_xs: Vec<Vec<f64>> = (0..steps).map(|_| vec![0.0; batch * d]).collect();
            dir.backward(&xs, &cache, &probe, batch, &mut d_xs);

            let eps = 1e-6;
            let analytic_w: Vec<f64> = dir.w_ih.grad.clone();
            for i in (0..dir.w_ih.data.len()).step_by(5) {
                let orig = dir.w_ih.data[i];
                dir.w_ih.data[i] = orig + eps;
                let up = loss(&dir, &xs, batch, &probe);
                dir.w_ih.data[i] = orig - eps;
                let down = loss(&dir, &xs, batch, &probe);
                dir.w_ih.data[i] = orig;
                let num = (up - down) / (2.0 * eps);
                assert!((num - analytic_w[i]).abs() < 1e-7, "w_ih[{i}]: {num} vs {}", analytic_w[i]);
            }
            let analytic_hh: Vec<f64> = dir.w_hh.grad.clone();
            for i in 0..dir.w_hh.data.len() {
                let orig = dir.w_hh.data[i];
                dir.w_hh.data[i] = orig + eps;
                let up = loss(&dir, &xs, batch, &probe);
                dir.w_hh.data[i] = orig - eps;
                let down = loss(&dir, &xs, batch, &probe);
                dir.w_hh.data[i] = orig;
                let num = (up - down) / (2.0 * eps);
                assert!((num - analytic_hh[i]).abs() < 1e-7, "w_hh[{i}]");
            }
            for i in 0..dir.b_hh.data.len() {
                let orig = dir.b_hh.data[i];
                dir.b_hh.data[i] = orig + eps;
                let up = loss(&dir, &xs, batch, &probe);
                dir.b_hh.data[i] = orig - eps;
                let down = loss(&dir, &xs, batch, &probe);
                dir.b_hh.data[i] = orig;
                let num = (up - down) / (2.0 * eps);
                assert!((num - dir.b_hh.grad[i]).abs() < 1e-7, "b_hh[{i}]");
            }
            // input gradients
            let mut xs_pert = xs.clone();
            for t in 0..steps {
                for i in 0..batch * d {
                    let orig = xs_pert[t][i];
                    xs_pert[t][i] = orig + eps;
                    let up = loss(&dir, &xs_pert, batch, &probe);
                    xs_pert[t][i] = orig - eps;
                    let down = loss(&dir, &xs_pert, batch, &probe);
                    xs_pert[t][i] = orig;
                    let num = (up - down) / (2.0 * eps);
                    assert!((num - d_xs[t][i]).abs() < 1e-7, "x[{t}][{i}]");
                }
            }
        }
    }

    #[test]
    fn reverse_direction_sees_sequence_backwards() {
        let mut rng = Rng::from_seed(3);
        let fwd: GruDirection<f64> = GruDirection::new(2, 2, false, &mut Rng::from_seed(9));
        let mut rev: GruDirection<f64> = GruDirection::new(2, 2, true, &mut Rng::from_seed(9));
        rev.w_ih.data.clone_from(&fwd.w_ih.data);
        rev.w_hh.data.clone_from(&fwd.w_hh.data);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..2).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let mut xs_reversed = xs.clone();
        xs_reversed.reverse();
        let a = fwd.forward(&xs_reversed, 1);
        let b = rev.forward(&xs, 1);
        assert_eq!(a.h[4], b.h[4]);
    }

    #[test]
    fn recurrent_blocks_are_orthogonal() {
        let dir: GruDirection<f64> = GruDirection::new(4, 5, false, &mut Rng::from_seed(11));
        for gate in 0..3 {
            for i in 0..5 {
                for j in 0..5 {
                    let mut dot = 0.0;
                    for r in 0..5 {
                        dot += dir.w_hh.data[(gate * 5 + r) * 5 + i] * dir.w_hh.data[(gate * 5 + r) * 5 + j];
                    }
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
        }
    }
}

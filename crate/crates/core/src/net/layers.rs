//! Stateless building blocks of the encoder: 3x3 convolution, batch
//! normalization, ELU, and 2x2 max pooling.
//!
//! Activations are laid out `[item][channel][row][col]`, flattened row-major.
//! Every loop runs in a fixed order so results are reproducible bit for bit.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::mat::{matmul_nn, matmul_nt, matmul_tn};
use crate::net::c;
use crate::net::tensor::Tensor;
use crate::rng::Rng;

/// 3x3 convolution, stride 1, zero padding 1 (output spatial size equals
/// input spatial size). Weights are stored `[out_ch][in_ch * 9]` so the
/// forward pass is one matrix product against an im2col buffer per item.
pub struct Conv<F> {
    pub w: Tensor<F>,
    pub b: Tensor<F>,
    pub in_ch: usize,
    pub out_ch: usize,
}

impl<F: Float> Conv<F> {
    /// Glorot-uniform weights (fan_in = in_ch*9, fan_out = out_ch*9), zero biases.
    pub fn new(in_ch: usize, out_ch: usize, rng: &mut Rng) -> Self {
        let mut w = Tensor::zeros(&[out_ch, in_ch * 9]);
        let limit = (6.0 / ((in_ch * 9 + out_ch * 9) as f64)).sqrt();
        for v in w.data.iter_mut() {
            *v = c(rng.uniform(-limit, limit));
        }
        Conv { w, b: Tensor::zeros(&[out_ch]), in_ch, out_ch }
    }

    /// `input` is `n` items of `[in_ch][h][w]`; appends nothing, `out` is
    /// resized to `n * out_ch * h * w`.
    pub fn forward(&self, input: &[F], n: usize, h: usize, w: usize, out: &mut Vec<F>) {
        let hw = h * w;
        let k = self.in_ch * 9;
        out.clear();
        out.resize(n * self.out_ch * hw, F::zero());
        let mut col = vec![F::zero(); k * hw];
        for item in 0..n {
            im2col(&input[item * self.in_ch * hw..][..self.in_ch * hw], self.in_ch, h, w, &mut col);
            let dst = &mut out[item * self.out_ch * hw..][..self.out_ch * hw];
            matmul_nn(&self.w.data, &col, dst, self.out_ch, k, hw);
            for oc in 0..self.out_ch {
                let bias = self.b.data[oc];
                for v in dst[oc * hw..][..hw].iter_mut() {
                    *v = *v + bias;
                }
            }
        }
    }

    /// Accumulates weight/bias gradients and, when `d_input` is given, the
    /// gradient with respect to the layer input (buffer must be zeroed by the
    /// caller). `input` must be the same buffer the forward pass saw.
    pub fn backward(
        &mut self,
        input: &[F],
        d_out: &[F],
        n: usize,
        h: usize,
        w: usize,
        mut d_input: Option<&mut [F]>,
    ) {
        let hw = h * w;
        let k = self.in_ch * 9;
        let mut col = vec![F::zero(); k * hw];
        let mut d_col = vec![F::zero(); k * hw];
        for item in 0..n {
            let d_dst = &d_out[item * self.out_ch * hw..][..self.out_ch * hw];
            im2col(&input[item * self.in_ch * hw..][..self.in_ch * hw], self.in_ch, h, w, &mut col);
            matmul_nt(d_dst, &col, &mut self.w.grad, self.out_ch, hw, k);
            for oc in 0..self.out_ch {
                let mut s = F::zero();
                for &v in &d_dst[oc * hw..][..hw] {
                    s = s + v;
                }
                self.b.grad[oc] = self.b.grad[oc] + s;
            }
            if let Some(di) = d_input.as_deref_mut() {
                d_col.fill(F::zero());
                matmul_tn(&self.w.data, d_dst, &mut d_col, k, self.out_ch, hw);
                col2im(&d_col, self.in_ch, h, w, &mut di[item * self.in_ch * hw..][..self.in_ch * hw]);
            }
        }
    }
}

/// Unfolds one item into a `[in_ch * 9][h * w]` patch matrix. Row `ci*9 + t`
/// holds tap `t` (3x3 scan order) of channel `ci`; out-of-bounds taps are zero.
fn im2col<F: Float>(item: &[F], in_ch: usize, h: usize, w: usize, col: &mut [F]) {
    let hw = h * w;
    for ci in 0..in_ch {
        let plane = &item[ci * hw..][..hw];
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let row = ci * 9 + ((dy + 1) * 3 + dx + 1) as usize;
                let dst = &mut col[row * hw..][..hw];
                for y in 0..h {
                    let sy = y as i64 + dy;
                    let dst_row = &mut dst[y * w..][..w];
                    if sy < 0 || sy >= h as i64 {
                        dst_row.fill(F::zero());
                        continue;
                    }
                    let src_row = &plane[sy as usize * w..][..w];
                    for x in 0..w {
                        let sx = x as i64 + dx;
                        dst_row[x] = if sx < 0 || sx >= w as i64 {
                            F::zero()
                        } else {
                            src_row[sx as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds a patch-matrix gradient back onto the
/// item gradient.
fn col2im<F: Float>(d_col: &[F], in_ch: usize, h: usize, w: usize, d_item: &mut [F]) {
    let hw = h * w;
    for ci in 0..in_ch {
        let plane = &mut d_item[ci * hw..][..hw];
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let row = ci * 9 + ((dy + 1) * 3 + dx + 1) as usize;
                let src = &d_col[row * hw..][..hw];
                for y in 0..h {
                    let sy = y as i64 + dy;
                    if sy < 0 || sy >= h as i64 {
                        continue;
                    }
                    for x in 0..w {
                        let sx = x as i64 + dx;
                        if sx >= 0 && sx < w as i64 {
                            let p = sy as usize * w + sx as usize;
                            plane[p] = plane[p] + src[y * w + x];
                        }
                    }
                }
            }
        }
    }
}

/// Per-channel batch normalization. Training mode normalizes with biased
/// batch statistics and updates the running estimates as
/// `running = running * momentum + batch * (1 - momentum)`; eval mode uses
/// the running estimates.
pub struct BatchNorm<F> {
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    pub channels: usize,
    pub epsilon: f64,
    pub momentum: f64,
}

/// Saved normalization state for the backward pass.
pub struct BnCache<F> {
    pub xhat: Vec<F>,
    pub inv_std: Vec<F>,
}

impl<F: Float> BatchNorm<F> {
    pub fn new(channels: usize, epsilon: f64, momentum: f64) -> Self {
        let mut gamma = Tensor::zeros(&[channels]);
        gamma.data.fill(F::one());
        BatchNorm {
            gamma,
            beta: Tensor::zeros(&[channels]),
            running_mean: vec![F::zero(); channels],
            running_var: vec![F::one(); channels],
            channels,
            epsilon,
            momentum,
        }
    }

    /// `input` is `n` items of `[channels][spatial]`.
    pub fn forward_train(
        &mut self,
        input: &[F],
        n: usize,
        spatial: usize,
        out: &mut Vec<F>,
    ) -> BnCache<F> {
        let m = c::<F>((n * spatial) as f64);
        let eps = c::<F>(self.epsilon);
        let mom = c::<F>(self.momentum);
        out.clear();
        out.resize(input.len(), F::zero());
        let mut cache = BnCache { xhat: vec![F::zero(); input.len()], inv_std: vec![F::zero(); self.channels] };
        for ch in 0..self.channels {
            let mut sum = F::zero();
            let mut sum_sq = F::zero();
            for item in 0..n {
                for &v in &input[(item * self.channels + ch) * spatial..][..spatial] {
                    sum = sum + v;
                    sum_sq = sum_sq + v * v;
                }
            }
            let mean = sum / m;
            let var = (sum_sq / m - mean * mean).max(F::zero());
            let inv_std = (var + eps).sqrt().recip();
            cache.inv_std[ch] = inv_std;
            self.running_mean[ch] = self.running_mean[ch] * mom + mean * (F::one() - mom);
            self.running_var[ch] = self.running_var[ch] * mom + var * (F::one() - mom);
            let g = self.gamma.data[ch];
            let b = self.beta.data[ch];
            for item in 0..n {
                let base = (item * self.channels + ch) * spatial;
                for i in base..base + spatial {
                    let xh = (input[i] - mean) * inv_std;
                    cache.xhat[i] = xh;
                    out[i] = g * xh + b;
                }
            }
        }
        cache
    }

    pub fn forward_eval(&self, input: &[F], n: usize, spatial: usize, out: &mut Vec<F>) {
        let eps = c::<F>(self.epsilon);
        out.clear();
        out.resize(input.len(), F::zero());
        for ch in 0..self.channels {
            let inv_std = (self.running_var[ch] + eps).sqrt().recip();
            let mean = self.running_mean[ch];
            let g = self.gamma.data[ch];
            let b = self.beta.data[ch];
            for item in 0..n {
                let base = (item * self.channels + ch) * spatial;
                for i in base..base + spatial {
                    out[i] = g * (input[i] - mean) * inv_std + b;
                }
            }
        }
    }

    /// Full backward through the batch statistics:
    /// `dx = inv_std/m * (m*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))`.
    pub fn backward(
        &mut self,
        cache: &BnCache<F>,
        d_out: &[F],
        n: usize,
        spatial: usize,
        d_input: &mut [F],
    ) {
        let m = c::<F>((n * spatial) as f64);
        for ch in 0..self.channels {
            let g = self.gamma.data[ch];
            let mut sum_d = F::zero();
            let mut sum_dx = F::zero();
            for item in 0..n {
                let base = (item * self.channels + ch) * spatial;
                for i in base..base + spatial {
                    let dxh = d_out[i] * g;
                    sum_d = sum_d + dxh;
                    sum_dx = sum_dx + dxh * cache.xhat[i];
                    self.gamma.grad[ch] = self.gamma.grad[ch] + d_out[i] * cache.xhat[i];
                    self.beta.grad[ch] = self.beta.grad[ch] + d_out[i];
                }
            }
            let scale = cache.inv_std[ch] / m;
            for item in 0..n {
                let base = (item * self.channels + ch) * spatial;
                for i in base..base + spatial {
                    let dxh = d_out[i] * g;
                    d_input[i] = scale * (m * dxh - sum_d - cache.xhat[i] * sum_dx);
                }
            }
        }
    }
}

/// In-place ELU (alpha = 1): `x` for `x > 0`, `exp(x) - 1` otherwise.
pub fn elu_forward<F: Float>(x: &mut [F]) {
    for v in x.iter_mut() {
        if *v < F::zero() {
            *v = v.exp() - F::one();
        }
    }
}

/// Scales `d` by the ELU derivative, expressed through the saved output:
/// 1 for positive outputs, `out + 1` (= exp(input)) otherwise.
pub fn elu_backward<F: Float>(out: &[F], d: &mut [F]) {
    for (dv, &o) in d.iter_mut().zip(out) {
        if o < F::zero() {
            *dv = *dv * (o + F::one());
        }
    }
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// `idx` records the flat offset of each selected element (first win on ties)
/// so the backward pass is a plain scatter.
pub fn maxpool_forward<F: Float>(
    input: &[F],
    n: usize,
    chans: usize,
    h: usize,
    w: usize,
    out: &mut Vec<F>,
    idx: &mut Vec<u32>,
) {
    let oh = h / 2;
    let ow = w / 2;
    out.clear();
    out.resize(n * chans * oh * ow, F::zero());
    idx.clear();
    idx.resize(n * chans * oh * ow, 0);
    let mut o = 0usize;
    for item in 0..n {
        for ch in 0..chans {
            let plane = (item * chans + ch) * h * w;
            for y in 0..oh {
                for x in 0..ow {
                    let mut best = plane + (2 * y) * w + 2 * x;
                    let mut best_v = input[best];
                    for (dy, dx) in [(0usize, 1usize), (1, 0), (1, 1)] {
                        let p = plane + (2 * y + dy) * w + 2 * x + dx;
                        if input[p] > best_v {
                            best_v = input[p];
                            best = p;
                        }
                    }
                    out[o] = best_v;
                    idx[o] = best as u32;
                    o += 1;
                }
            }
        }
    }
}

pub fn maxpool_backward<F: Float>(d_out: &[F], idx: &[u32], d_input: &mut [F]) {
    for (&d, &p) in d_out.iter().zip(idx) {
        d_input[p as usize] = d_input[p as usize] + d;
    }
}

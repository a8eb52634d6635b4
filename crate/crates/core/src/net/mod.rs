//! Convolutional-recurrent audio encoder and its training machinery.
//!
//! The model maps a log-mel spectrogram (`bands x frames`) to a fixed-width
//! embedding: batch-normalize the input, slice it into overlapping segments,
//! push every segment through a shared stack of conv / batch-norm / ELU /
//! max-pool blocks, flatten, then run a bidirectional GRU over the segment
//! sequence and concatenate the two final hidden states.
//!
//! Everything is written against plain slices with hand-derived backward
//! passes; no autograd. Float type is generic so the same graph can run in
//! f32 for training and f64 for finite-difference verification.

pub mod adam;
pub mod check;
pub mod gru;
pub mod layers;
pub mod loss;
pub mod tensor;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;

use crate::rng::Rng;
pub use adam::{Adam, AdamConfig};
use gru::{GruCache, GruDirection};
use layers::{elu_backward, elu_forward, maxpool_backward, maxpool_forward, BatchNorm, BnCache, Conv};
pub use loss::{triplet_loss, TripletLossOut};
pub use tensor::Tensor;

/// Casts an f64 constant into the working float type.
pub(crate) fn c<F: Float>(x: f64) -> F {
    F::from(x).unwrap()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrnnConfig {
    /// Mel bands per frame (input rows).
    pub bands: usize,
    /// Number of overlapping segments cut from the input.
    pub segment_count: usize,
    /// Frames per segment.
    pub segment_len: usize,
    /// Frame step between consecutive segments.
    pub segment_hop: usize,
    /// Output channels of each conv block; each block also halves both
    /// spatial dimensions.
    pub conv_filters: Vec<usize>,
    /// Hidden width of each GRU direction; the embedding is twice this.
    pub gru_hidden: usize,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl Default for CrnnConfig {
    fn default() -> Self {
        CrnnConfig {
            bands: 80,
            segment_count: 12,
            segment_len: 20,
            segment_hop: 10,
            conv_filters: vec![32, 64, 128],
            gru_hidden: 128,
            bn_epsilon: 1e-5,
            bn_momentum: 0.99,
        }
    }
}

impl CrnnConfig {
    /// Total input frames implied by the segment layout.
    pub fn frames(&self) -> usize {
        self.segment_len + (self.segment_count - 1) * self.segment_hop
    }

    /// Spatial size after all pooling stages.
    pub fn pooled_dims(&self) -> (usize, usize) {
        let (mut h, mut w) = (self.bands, self.segment_len);
        for _ in &self.conv_filters {
            h /= 2;
            w /= 2;
        }
        (h, w)
    }

    /// Width of one flattened segment entering the GRU.
    pub fn flatten_dim(&self) -> usize {
        let (h, w) = self.pooled_dims();
        self.conv_filters.last().copied().unwrap_or(0) * h * w
    }

    pub fn embedding_dim(&self) -> usize {
        2 * self.gru_hidden
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.bands == 0 || self.segment_count == 0 || self.segment_len == 0 || self.segment_hop == 0 {
            return Err(NetError::BadConfig("segment geometry must be positive"));
        }
        if self.conv_filters.is_empty() {
            return Err(NetError::BadConfig("at least one conv block is required"));
        }
        if self.conv_filters.iter().any(|&f| f == 0) {
            return Err(NetError::BadConfig("conv filter counts must be positive"));
        }
        if self.gru_hidden == 0 {
            return Err(NetError::BadConfig("gru_hidden must be positive"));
        }
        let (mut h, mut w) = (self.bands, self.segment_len);
        for _ in &self.conv_filters {
            if h < 2 || w < 2 {
                return Err(NetError::BadConfig("spatial size collapses before the last pool"));
            }
            h /= 2;
            w /= 2;
        }
        if !(self.bn_epsilon > 0.0) || !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(NetError::BadConfig("bad batch-norm constants"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetError {
    BadConfig(&'static str),
    BadInputLen { got: usize, want: usize },
    /// `backward` was called without a preceding training-mode forward.
    NoForwardState,
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::BadConfig(msg) => write!(f, "bad model config: {msg}"),
            NetError::BadInputLen { got, want } => {
                write!(f, "input length {got} does not match expected {want}")
            }
            NetError::NoForwardState => write!(f, "backward called without a training forward"),
        }
    }
}

/// Saved activations from one training-mode forward pass; consumed by
/// `backward`.
struct ForwardState<F> {
    batch: usize,
    bn_in_cache: BnCache<F>,
    blocks: Vec<BlockState<F>>,
    xs: Vec<Vec<F>>,
    gru_fwd_cache: GruCache<F>,
    gru_bwd_cache: GruCache<F>,
}

struct BlockState<F> {
    /// Input the conv consumed (segment tensor for block 0, previous pool
    /// output otherwise).
    input: Vec<F>,
    in_h: usize,
    in_w: usize,
    bn_cache: BnCache<F>,
    elu_out: Vec<F>,
    pool_idx: Vec<u32>,
}

pub struct Crnn<F> {
    pub config: CrnnConfig,
    pub bn_in: BatchNorm<F>,
    pub convs: Vec<Conv<F>>,
    pub bns: Vec<BatchNorm<F>>,
    pub gru_fwd: GruDirection<F>,
    pub gru_bwd: GruDirection<F>,
    state: Option<ForwardState<F>>,
}

impl<F: Float> Crnn<F> {
    /// Builds the model with seeded initialization: Glorot-uniform conv and
    /// GRU input weights, orthogonal GRU recurrent weights, zero biases,
    /// identity batch norm.
    pub fn new(config: CrnnConfig, seed: u64) -> Result<Self, NetError> {
        config.validate()?;
        let mut rng = Rng::from_seed(seed);
        let bn_in = BatchNorm::new(1, config.bn_epsilon, config.bn_momentum);
        let mut convs = Vec::new();
        let mut bns = Vec::new();
        let mut in_ch = 1;
        for &out_ch in &config.conv_filters {
            convs.push(Conv::new(in_ch, out_ch, &mut rng));
            bns.push(BatchNorm::new(out_ch, config.bn_epsilon, config.bn_momentum));
            in_ch = out_ch;
        }
        let d = config.flatten_dim();
        let gru_fwd = GruDirection::new(d, config.gru_hidden, false, &mut rng);
        let gru_bwd = GruDirection::new(d, config.gru_hidden, true, &mut rng);
        Ok(Crnn { config, bn_in, convs, bns, gru_fwd, gru_bwd, state: None })
    }

    /// Encodes `batch` spectrograms laid out `[item][band][frame]` into
    /// embeddings laid out `[item][embedding_dim]`.
    ///
    /// `training = true` normalizes with batch statistics, updates the
    /// running estimates, and keeps the activation tape for `backward`;
    /// `training = false` uses running statistics and keeps nothing.
    pub fn forward(&mut self, input: &[F], batch: usize, training: bool) -> Result<Vec<F>, NetError> {
        let frames = self.config.frames();
        let bands = self.config.bands;
        let want = batch * bands * frames;
        if input.len() != want {
            return Err(NetError::BadInputLen { got: input.len(), want });
        }
        let spatial0 = bands * frames;
        let mut y0 = Vec::new();
        let bn_in_cache = if training {
            Some(self.bn_in.forward_train(input, batch, spatial0, &mut y0))
        } else {
            self.bn_in.forward_eval(input, batch, spatial0, &mut y0);
            None
        };

        let s_count = self.config.segment_count;
        let seg_len = self.config.segment_len;
        let hop = self.config.segment_hop;
        let n_eff = batch * s_count;
        let mut seg = vec![F::zero(); n_eff * bands * seg_len];
        for b in 0..batch {
            for s in 0..s_count {
                for band in 0..bands {
                    let src = (b * bands + band) * frames + s * hop;
                    let dst = ((b * s_count + s) * bands + band) * seg_len;
                    seg[dst..dst + seg_len].copy_from_slice(&y0[src..src + seg_len]);
                }
            }
        }
        drop(y0);

        let mut blocks: Vec<BlockState<F>> = Vec::new();
        let (mut h, mut w) = (bands, seg_len);
        let mut cur = seg;
        for i in 0..self.convs.len() {
            let chans = self.convs[i].out_ch;
            let mut conv_out = Vec::new();
            self.convs[i].forward(&cur, n_eff, h, w, &mut conv_out);
            let mut norm = Vec::new();
            let bn_cache = if training {
                Some(self.bns[i].forward_train(&conv_out, n_eff, h * w, &mut norm))
            } else {
                self.bns[i].forward_eval(&conv_out, n_eff, h * w, &mut norm);
                None
            };
            drop(conv_out);
            elu_forward(&mut norm);
            let mut pool_out = Vec::new();
            let mut pool_idx = Vec::new();
            maxpool_forward(&norm, n_eff, chans, h, w, &mut pool_out, &mut pool_idx);
            let input_taken = core::mem::replace(&mut cur, pool_out);
            if let Some(bn_cache) = bn_cache {
                blocks.push(BlockState { input: input_taken, in_h: h, in_w: w, bn_cache, elu_out: norm, pool_idx });
            }
            h /= 2;
            w /= 2;
        }

        let d_flat = self.config.flatten_dim();
        let hidden = self.config.gru_hidden;
        let emb_dim = self.config.embedding_dim();
        let mut xs: Vec<Vec<F>> = (0..s_count).map(|_| vec![F::zero(); batch * d_flat]).collect();
        for b in 0..batch {
            for s in 0..s_count {
                xs[s][b * d_flat..][..d_flat]
                    .copy_from_slice(&cur[(b * s_count + s) * d_flat..][..d_flat]);
            }
        }
        drop(cur);

        let gru_fwd_cache = self.gru_fwd.forward(&xs, batch);
        let gru_bwd_cache = self.gru_bwd.forward(&xs, batch);
        let hf = &gru_fwd_cache.h[s_count];
        let hb = &gru_bwd_cache.h[s_count];
        let mut emb = vec![F::zero(); batch * emb_dim];
        for b in 0..batch {
            emb[b * emb_dim..][..hidden].copy_from_slice(&hf[b * hidden..][..hidden]);
            emb[b * emb_dim + hidden..][..hidden].copy_from_slice(&hb[b * hidden..][..hidden]);
        }

        self.state = if training {
            Some(ForwardState {
                batch,
                bn_in_cache: bn_in_cache.unwrap(),
                blocks,
                xs,
                gru_fwd_cache,
                gru_bwd_cache,
            })
        } else {
            None
        };
        Ok(emb)
    }

    /// Accumulates parameter gradients from `d_emb` (layout
    /// `[item][embedding_dim]`). Consumes the tape of the preceding
    /// training-mode forward; grads are *added*, so call [`Crnn::zero_grads`]
    /// between steps.
    pub fn backward(&mut self, d_emb: &[F]) -> Result<(), NetError> {
        let state = self.state.take().ok_or(NetError::NoForwardState)?;
        let batch = state.batch;
        let hidden = self.config.gru_hidden;
        let emb_dim = self.config.embedding_dim();
        if d_emb.len() != batch * emb_dim {
            return Err(NetError::BadInputLen { got: d_emb.len(), want: batch * emb_dim });
        }
        let s_count = self.config.segment_count;
        let d_flat = self.config.flatten_dim();

        let mut d_hf = vec![F::zero(); batch * hidden];
        let mut d_hb = vec![F::zero(); batch * hidden];
        for b in 0..batch {
            d_hf[b * hidden..][..hidden].copy_from_slice(&d_emb[b * emb_dim..][..hidden]);
            d_hb[b * hidden..][..hidden].copy_from_slice(&d_emb[b * emb_dim + hidden..][..hidden]);
        }
        let mut d_xs: Vec<Vec<F>> = (0..s_count).map(|_| vec![F::zero(); batch * d_flat]).collect();
        self.gru_fwd.backward(&state.xs, &state.gru_fwd_cache, &d_hf, batch, &mut d_xs);
        self.gru_bwd.backward(&state.xs, &state.gru_bwd_cache, &d_hb, batch, &mut d_xs);

        let n_eff = batch * s_count;
        let mut d_cur = vec![F::zero(); n_eff * d_flat];
        for b in 0..batch {
            for s in 0..s_count {
                d_cur[(b * s_count + s) * d_flat..][..d_flat]
                    .copy_from_slice(&d_xs[s][b * d_flat..][..d_flat]);
            }
        }
        drop(d_xs);

        for i in (0..self.convs.len()).rev() {
            let blk = &state.blocks[i];
            let (in_h, in_w) = (blk.in_h, blk.in_w);
            let chans = self.convs[i].out_ch;
            let mut d_elu = vec![F::zero(); n_eff * chans * in_h * in_w];
            maxpool_backward(&d_cur, &blk.pool_idx, &mut d_elu);
            elu_backward(&blk.elu_out, &mut d_elu);
            let mut d_conv = vec![F::zero(); d_elu.len()];
            self.bns[i].backward(&blk.bn_cache, &d_elu, n_eff, in_h * in_w, &mut d_conv);
            drop(d_elu);
            let mut d_in = vec![F::zero(); blk.input.len()];
            self.convs[i].backward(&blk.input, &d_conv, n_eff, in_h, in_w, Some(&mut d_in));
            d_cur = d_in;
        }

        let frames = self.config.frames();
        let bands = self.config.bands;
        let seg_len = self.config.segment_len;
        let hop = self.config.segment_hop;
        let mut d_y0 = vec![F::zero(); batch * bands * frames];
        for b in 0..batch {
            for s in 0..s_count {
                for band in 0..bands {
                    let dst = (b * bands + band) * frames + s * hop;
                    let src = ((b * s_count + s) * bands + band) * seg_len;
                    for t in 0..seg_len {
                        d_y0[dst + t] = d_y0[dst + t] + d_cur[src + t];
                    }
                }
            }
        }
        let mut d_x = vec![F::zero(); d_y0.len()];
        self.bn_in.backward(&state.bn_in_cache, &d_y0, batch, bands * frames, &mut d_x);
        Ok(())
    }

    /// Visits every trainable tensor with a stable name. Visit order is
    /// fixed, names are unique.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<F>)) {
        f("bn_in.gamma", &mut self.bn_in.gamma);
        f("bn_in.beta", &mut self.bn_in.beta);
        for i in 0..self.convs.len() {
            f(&format!("conv{i}.w"), &mut self.convs[i].w);
            f(&format!("conv{i}.b"), &mut self.convs[i].b);
            f(&format!("bn{i}.gamma"), &mut self.bns[i].gamma);
            f(&format!("bn{i}.beta"), &mut self.bns[i].beta);
        }
        f("gru_fwd.w_ih", &mut self.gru_fwd.w_ih);
        f("gru_fwd.w_hh", &mut self.gru_fwd.w_hh);
        f("gru_fwd.b_ih", &mut self.gru_fwd.b_ih);
        f("gru_fwd.b_hh", &mut self.gru_fwd.b_hh);
        f("gru_bwd.w_ih", &mut self.gru_bwd.w_ih);
        f("gru_bwd.w_hh", &mut self.gru_bwd.w_hh);
        f("gru_bwd.b_ih", &mut self.gru_bwd.b_ih);
        f("gru_bwd.b_hh", &mut self.gru_bwd.b_hh);
    }

    /// Visits the non-trainable running statistics (for serialization).
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&str, &mut Vec<F>)) {
        f("bn_in.running_mean", &mut self.bn_in.running_mean);
        f("bn_in.running_var", &mut self.bn_in.running_var);
        for i in 0..self.bns.len() {
            f(&format!("bn{i}.running_mean"), &mut self.bns[i].running_mean);
            f(&format!("bn{i}.running_var"), &mut self.bns[i].running_var);
        }
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(&mut |_, t| t.zero_grad());
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, t| n += t.len());
        n
    }

    /// One optimizer step over all parameters from their accumulated grads.
    pub fn apply_adam(&mut self, adam: &mut Adam<F>, cfg: &AdamConfig) {
        adam.begin_step();
        self.visit_params(&mut |name, t| adam.update(name, &mut t.data, &t.grad, cfg));
    }

    pub fn param_names(&mut self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit_params(&mut |name, _| names.push(String::from(name)));
        names
    }

    /// FNV-1a hash of the max-pool selection pattern recorded by the last
    /// training-mode forward (0 when there is no tape). Pooling is the only
    /// discrete choice in the network, so two forwards with equal
    /// fingerprints evaluate the same smooth branch of the function — the
    /// condition under which finite differences are meaningful.
    pub fn pool_selection_fingerprint(&self) -> u64 {
        let state = match &self.state {
            Some(s) => s,
            None => return 0,
        };
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for blk in &state.blocks {
            for &i in &blk.pool_idx {
                hash ^= i as u64;
                hash = hash.wrapping_mul(0x100_0000_01b3);
            }
        }
        hash
    }
}

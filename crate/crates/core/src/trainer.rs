//! Deterministic training loop: seeded record splits, per-epoch reshuffles,
//! batch mining, margin loss and Adam steps over the recurrent encoder.
//!
//! Everything downstream of `(config, seed, data)` is reproducible to the
//! bit: the split, the model init, every shuffle and every update draw from
//! tagged sub-streams of one seed, and all reductions run in fixed order.
//! IO (caches on disk, checkpoint files, progress printing) stays outside;
//! callers observe the loop through [`TrainHooks`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] // resolves float math in no_std builds
use num_traits::Float;

use crate::corpus::Corpus;
use crate::eval::{precision_at_k, EmbeddingStore, StoreTag};
use crate::lsi::LsiModel;
use crate::mining::{mine, relatedness_matrix, BatchRelatedness, MiningConfig, MiningStrategy, TripletBatch};
use crate::net::{triplet_loss, Adam, AdamConfig, Crnn, CrnnConfig, NetError};
use crate::rng::Rng;

/// Sub-stream tags off the run seed; distinct per consumer.
const TAG_SPLIT: u64 = 0x53504C54;
const TAG_INIT: u64 = 0x494E4954;
const TAG_EPOCH: u64 = 0x45504F43;

/// Epoch interval for the logged validation precision@1.
const VAL_PRECISION_EVERY: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Enforced margin between positive and negative squared distances.
    pub margin: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub mining: MiningConfig,
    /// Train/validation/test fractions; must be non-negative and sum to 1.
    pub fractions: (f64, f64, f64),
    /// Intermediate-checkpoint interval in epochs; 0 disables. The final
    /// model is returned in [`TrainOutcome`] regardless.
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn new(seed: u64) -> TrainConfig {
        TrainConfig {
            margin: 0.2,
            batch_size: 400,
            epochs: 100,
            adam: AdamConfig::default(),
            seed,
            mining: MiningConfig::default(),
            fractions: (0.8, 0.1, 0.1),
            checkpoint_every: 10,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::BadConfig("batch_size must be at least 2"));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(TrainError::BadConfig("margin must be finite and non-negative"));
        }
        check_fractions(self.fractions)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    BadFractions,
    BadConfig(&'static str),
    /// An entire epoch produced no triple — thresholds too strict or the
    /// corpus has no usable positive/negative sets.
    EmptyTripletEpoch { epoch: usize },
    /// A train/validation record has no cached spectrogram.
    CacheMiss(String),
    /// A cached spectrogram has the wrong length for the model input.
    CorruptCache { record_id: String, got: usize, want: usize },
    /// Loss or embeddings stopped being finite (learning rate too high).
    Diverged { epoch: usize },
    Net(NetError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::BadFractions => write!(f, "split fractions must be non-negative and sum to 1"),
            TrainError::BadConfig(msg) => write!(f, "bad train config: {msg}"),
            TrainError::EmptyTripletEpoch { epoch } => {
                write!(f, "epoch {epoch} produced no triplet; relatedness thresholds leave every anchor without a positive or negative set")
            }
            TrainError::CacheMiss(id) => write!(f, "no cached spectrogram for record {id}"),
            TrainError::CorruptCache { record_id, got, want } => {
                write!(f, "cached spectrogram for {record_id} has {got} values, model expects {want}")
            }
            TrainError::Diverged { epoch } => write!(f, "training diverged at epoch {epoch}"),
            TrainError::Net(e) => write!(f, "{e}"),
        }
    }
}

impl From<NetError> for TrainError {
    fn from(e: NetError) -> Self {
        TrainError::Net(e)
    }
}

/// Disjoint, covering ordinal sets from one seeded shuffle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn check_fractions(f: (f64, f64, f64)) -> Result<(), TrainError> {
    let (a, b, c) = f;
    let all_ok = a >= 0.0 && b >= 0.0 && c >= 0.0 && a.is_finite() && b.is_finite() && c.is_finite();
    if !all_ok || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(TrainError::BadFractions);
    }
    Ok(())
}

/// Seeded shuffle then contiguous partition; sizes are rounded train-first
/// with the test set absorbing the remainder.
pub fn split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Split, TrainError> {
    check_fractions(fractions)?;
    let order = Rng::from_seed(seed).derive(TAG_SPLIT).permutation(n);
    let n_train = (((n as f64) * fractions.0).round() as usize).min(n);
    let n_val = (((n as f64) * fractions.1).round() as usize).min(n - n_train);
    Ok(Split {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

/// Cached model inputs by corpus ordinal; `None` means not extracted.
pub trait MelSource {
    /// Row-major `bands × frames` values for one record.
    fn mel(&self, ordinal: usize) -> Option<&[f32]>;
}

/// Vec-backed source for in-memory corpora; an empty entry means missing.
impl MelSource for Vec<Vec<f32>> {
    fn mel(&self, ordinal: usize) -> Option<&[f32]> {
        match self.get(ordinal) {
            Some(v) if !v.is_empty() => Some(v.as_slice()),
            _ => None,
        }
    }
}

/// Where batch relatedness comes from; must agree with the mining strategy.
pub enum RelatednessSource<'a> {
    /// Cosine over per-record topic vectors.
    Lsi(&'a LsiModel),
    /// Collection membership straight from the corpus.
    Collections,
}

/// Observation points on the loop; defaults are no-ops. IO-side callers
/// print progress lines and write intermediate checkpoints from here.
pub trait TrainHooks {
    fn on_batch(&mut self, epoch: usize, ordinals: &[usize]) {
        let _ = (epoch, ordinals);
    }
    /// Mined triples plus the embeddings they were mined from, before the
    /// update step; `ordinals` maps batch indices back to corpus ordinals.
    fn on_triples(
        &mut self,
        epoch: usize,
        ordinals: &[usize],
        triples: &TripletBatch,
        emb: &[f32],
        dim: usize,
    ) {
        let _ = (epoch, ordinals, triples, emb, dim);
    }
    fn on_epoch(&mut self, row: &EpochRow) {
        let _ = row;
    }
    fn on_checkpoint(&mut self, epoch: usize, model: &mut Crnn<f32>, adam: &Adam<f32>) {
        let _ = (epoch, model, adam);
    }
}

pub struct NoHooks;

impl TrainHooks for NoHooks {}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    /// 1-based, strictly increasing.
    pub epoch: usize,
    /// Total loss over the epoch divided by the number of mined triples.
    pub mean_loss: f64,
    /// Fraction of mined triples with a strictly positive hinge.
    pub active_fraction: f64,
    pub triples: usize,
    pub anchors_dropped: usize,
    /// Collection precision@1 on the validation split; computed every
    /// tenth epoch and on the final one, `None` otherwise (and whenever
    /// the validation split has fewer than two records).
    pub val_precision_at_1: Option<f64>,
}

impl EpochRow {
    /// Machine-parseable progress line.
    pub fn progress_line(&self) -> String {
        format!("epoch={} loss={} active={}", self.epoch, self.mean_loss, self.active_fraction)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<EpochRow>,
}

impl TrainLog {
    pub fn render_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,active_fraction,triples,anchors_dropped,val_precision_at_1\n");
        for r in &self.rows {
            let val = match r.val_precision_at_1 {
                Some(v) => format!("{v}"),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.mean_loss, r.active_fraction, r.triples, r.anchors_dropped, val
            ));
        }
        out
    }
}

pub struct TrainOutcome {
    pub model: Crnn<f32>,
    pub adam: Adam<f32>,
    pub log: TrainLog,
    pub split: Split,
}

impl fmt::Debug for TrainOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrainOutcome")
            .field("epochs", &self.log.rows.len())
            .field("split", &self.split)
            .finish_non_exhaustive()
    }
}

/// First-occurrence collection label ids by ordinal.
fn label_ids(corpus: &Corpus) -> Vec<usize> {
    let labels = corpus.collection_labels();
    let mut table: BTreeMap<&str, usize> = BTreeMap::new();
    for &l in &labels {
        let next = table.len();
        table.entry(l).or_insert(next);
    }
    labels.iter().map(|l| table[l]).collect()
}

/// Run the full loop. Training touches only the train split; validation
/// precision uses the val split in eval mode; the test split is never read.
pub fn train(
    corpus: &Corpus,
    mels: &dyn MelSource,
    relatedness: RelatednessSource<'_>,
    net_cfg: &CrnnConfig,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    net_cfg.validate()?;
    match (cfg.mining.strategy, &relatedness) {
        (MiningStrategy::Lsi, RelatednessSource::Lsi(m)) => {
            if m.num_records() != corpus.len() {
                return Err(TrainError::BadConfig("topic model does not cover the corpus"));
            }
        }
        (MiningStrategy::Collection, RelatednessSource::Collections) => {}
        _ => return Err(TrainError::BadConfig("relatedness source does not match mining strategy")),
    }

    let split = split(corpus.len(), cfg.fractions, cfg.seed)?;
    let base = Rng::from_seed(cfg.seed);
    let mut model: Crnn<f32> = Crnn::new(net_cfg.clone(), base.derive(TAG_INIT).next_u64())?;
    let mut adam: Adam<f32> = Adam::new();
    let labels = label_ids(corpus);

    let item_len = net_cfg.bands * net_cfg.frames();
    for &ord in split.train.iter().chain(split.val.iter()) {
        match mels.mel(ord) {
            None => return Err(TrainError::CacheMiss(corpus.get(ord).record_id.clone())),
            Some(m) if m.len() != item_len => {
                return Err(TrainError::CorruptCache {
                    record_id: corpus.get(ord).record_id.clone(),
                    got: m.len(),
                    want: item_len,
                })
            }
            Some(_) => {}
        }
    }

    let emb_dim = net_cfg.embedding_dim();
    let epoch_streams = base.derive(TAG_EPOCH);
    let mut input = vec![0.0f32; cfg.batch_size * item_len];
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        let mut order = split.train.clone();
        epoch_streams.derive(epoch as u64).shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        let mut triples_sum = 0usize;
        let mut active_sum = 0usize;
        let mut dropped_sum = 0usize;

        for batch_ord in order.chunks(cfg.batch_size) {
            hooks.on_batch(epoch, batch_ord);
            let b = batch_ord.len();
            for (i, &ord) in batch_ord.iter().enumerate() {
                input[i * item_len..(i + 1) * item_len]
                    .copy_from_slice(mels.mel(ord).expect("preflighted"));
            }
            model.zero_grads();
            let emb = model.forward(&input[..b * item_len], b, true)?;

            let batch = match &relatedness {
                RelatednessSource::Lsi(m) => {
                    let cos = relatedness_matrix(m, batch_ord);
                    mine(&emb, emb_dim, &BatchRelatedness::Cosines(&cos), &cfg.mining)
                }
                RelatednessSource::Collections => {
                    let l: Vec<usize> = batch_ord.iter().map(|&o| labels[o]).collect();
                    mine(&emb, emb_dim, &BatchRelatedness::Collections(&l), &cfg.mining)
                }
            }
            .expect("mining inputs constructed to match the strategy");

            hooks.on_triples(epoch, batch_ord, &batch, &emb, emb_dim);
            dropped_sum += batch.anchors_dropped;
            if batch.triples.is_empty() {
                continue;
            }
            let out = triplet_loss(&emb, emb_dim, &batch.triples, cfg.margin);
            if !out.loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            loss_sum += out.loss as f64;
            triples_sum += batch.triples.len();
            active_sum += out.active;
            // a batch with no active hinge has an all-zero gradient; skip
            // the step so such a batch provably changes no parameter
            if out.active > 0 {
                model.backward(&out.d_emb)?;
                adam.begin_step();
                model.apply_adam(&mut adam, &cfg.adam);
            }
        }

        if triples_sum == 0 {
            return Err(TrainError::EmptyTripletEpoch { epoch });
        }

        let val_p1 = if epoch % VAL_PRECISION_EVERY == 0 || epoch == cfg.epochs {
            val_precision_at_1(&mut model, mels, &split.val, &labels, cfg, item_len, emb_dim, epoch)?
        } else {
            None
        };

        let row = EpochRow {
            epoch,
            mean_loss: loss_sum / triples_sum as f64,
            active_fraction: active_sum as f64 / triples_sum as f64,
            triples: triples_sum,
            anchors_dropped: dropped_sum,
            val_precision_at_1: val_p1,
        };
        hooks.on_epoch(&row);
        log.rows.push(row);

        if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
            hooks.on_checkpoint(epoch, &mut model, &adam);
        }
    }

    Ok(TrainOutcome { model, adam, log, split })
}

/// Collection precision@1 over the validation split, eval-mode forward.
#[allow(clippy::too_many_arguments)]
fn val_precision_at_1(
    model: &mut Crnn<f32>,
    mels: &dyn MelSource,
    val: &[usize],
    labels: &[usize],
    cfg: &TrainConfig,
    item_len: usize,
    emb_dim: usize,
    epoch: usize,
) -> Result<Option<f64>, TrainError> {
    if val.len() < 2 {
        return Ok(None);
    }
    let mut all = Vec::with_capacity(val.len() * emb_dim);
    let mut input = vec![0.0f32; cfg.batch_size * item_len];
    for chunk in val.chunks(cfg.batch_size) {
        for (i, &ord) in chunk.iter().enumerate() {
            input[i * item_len..(i + 1) * item_len]
                .copy_from_slice(mels.mel(ord).expect("preflighted"));
        }
        let emb = model.forward(&input[..chunk.len() * item_len], chunk.len(), false)?;
        all.extend_from_slice(&emb);
    }
    let store = EmbeddingStore::from_f32(&all, emb_dim, StoreTag::Crnn)
        .map_err(|_| TrainError::Diverged { epoch })?;
    let queries: Vec<usize> = (0..val.len()).collect();
    let vl: Vec<usize> = val.iter().map(|&o| labels[o]).collect();
    let summary = precision_at_k(&store, &queries, &|q, r| vl[q] == vl[r], &[1])
        .map_err(|_| TrainError::Diverged { epoch })?;
    Ok(Some(summary.means[0]))
}

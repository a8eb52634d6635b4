//! Handcrafted 1677-dimension audio descriptor baseline.
//!
//! Nine fixed-order feature blocks are extracted from the same standardized
//! 6 s segment the spectrogram pipeline uses, then fused: each dimension is
//! z-scored against corpus statistics (σ = 0 dims stay 0), each block is
//! scaled by 1/√dim, then by its fusion weight, and the blocks are
//! concatenated. All math is f64 and bitwise-deterministic.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
#[allow(unused_imports)] // resolves float math in no_std builds
use num_traits::Float;

use crate::dsp::{
    self, AudioClip, SegmentSpec, FFT_SIZE, HOP, MEL_BANDS, MEL_FRAMES, TARGET_SAMPLE_RATE,
};
use crate::mat::Mat;

/// Bark critical-band edges (Hz); 25 edges bound 24 bands.
const BARK_EDGES_HZ: [f64; 25] = [
    0.0, 100.0, 200.0, 300.0, 400.0, 510.0, 630.0, 770.0, 920.0, 1080.0, 1270.0, 1480.0, 1720.0,
    2000.0, 2320.0, 2700.0, 3150.0, 3700.0, 4400.0, 5300.0, 6400.0, 7700.0, 9500.0, 12000.0,
    15500.0,
];
const BARK_BANDS: usize = 24;
/// Modulation bins kept per band (FFT of the band envelope, DC skipped).
const MODULATION_BINS: usize = 60;
/// Envelope frames fed to the modulation FFT (power of two ≤ frame count).
const MODULATION_FRAMES: usize = 128;
const MFCC_COEFFS: usize = 13;
const BPM_MIN: f64 = 40.0;
const BPM_MAX: f64 = 200.0;

pub const FUSED_DIM: usize = 1677;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockName {
    Mfcc,
    Ssd,
    SpecCent,
    Rp,
    Bpm,
    Chroma,
    Tonnetz,
    Rmse,
    Zcr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Timbre,
    Rhythm,
    Harmony,
    Loudness,
    Noise,
}

impl BlockName {
    /// Declared concatenation order; every API in this module follows it.
    pub const ALL: [BlockName; 9] = [
        BlockName::Mfcc,
        BlockName::Ssd,
        BlockName::SpecCent,
        BlockName::Rp,
        BlockName::Bpm,
        BlockName::Chroma,
        BlockName::Tonnetz,
        BlockName::Rmse,
        BlockName::Zcr,
    ];

    pub fn dim(self) -> usize {
        match self {
            BlockName::Mfcc => 2 * MFCC_COEFFS,
            BlockName::Ssd => 7 * BARK_BANDS,
            BlockName::SpecCent => 2,
            BlockName::Rp => BARK_BANDS * MODULATION_BINS,
            BlockName::Bpm => 1,
            BlockName::Chroma => 24,
            BlockName::Tonnetz => 12,
            BlockName::Rmse => 2,
            BlockName::Zcr => 2,
        }
    }

    pub fn weight(self) -> f64 {
        match self {
            BlockName::Mfcc => 0.23,
            BlockName::Ssd => 0.08,
            BlockName::SpecCent => 0.08,
            BlockName::Rp => 0.18,
            BlockName::Bpm => 0.07,
            BlockName::Chroma => 0.12,
            BlockName::Tonnetz => 0.12,
            BlockName::Rmse => 0.09,
            BlockName::Zcr => 0.03,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BlockName::Mfcc => "MFCC",
            BlockName::Ssd => "SSD",
            BlockName::SpecCent => "SPEC_CENT",
            BlockName::Rp => "RP",
            BlockName::Bpm => "BPM",
            BlockName::Chroma => "CHROMA",
            BlockName::Tonnetz => "TONNETZ",
            BlockName::Rmse => "RMSE",
            BlockName::Zcr => "ZCR",
        }
    }

    pub fn category(self) -> Category {
        match self {
            BlockName::Mfcc | BlockName::Ssd | BlockName::SpecCent => Category::Timbre,
            BlockName::Rp | BlockName::Bpm => Category::Rhythm,
            BlockName::Chroma | BlockName::Tonnetz => Category::Harmony,
            BlockName::Rmse => Category::Loudness,
            BlockName::Zcr => Category::Noise,
        }
    }

    pub fn from_label(label: &str) -> Option<BlockName> {
        BlockName::ALL.iter().copied().find(|b| b.label() == label)
    }

    /// Offset of this block's first dimension in the concatenated vector.
    pub fn offset(self) -> usize {
        let mut off = 0;
        for b in BlockName::ALL {
            if b == self {
                return off;
            }
            off += b.dim();
        }
        unreachable!()
    }
}

/// Per-category sums of the block fusion weights, in declared category order.
pub fn category_weights() -> [(Category, f64); 5] {
    let cats = [
        Category::Timbre,
        Category::Rhythm,
        Category::Harmony,
        Category::Loudness,
        Category::Noise,
    ];
    cats.map(|c| {
        let w = BlockName::ALL.iter().filter(|b| b.category() == c).map(|b| b.weight()).sum();
        (c, w)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBlock {
    pub name: BlockName,
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineError {
    MissingBlock(&'static str),
    BadShape { what: &'static str, got: usize, want: usize },
    EmptyCorpus,
    NonFinite { block: &'static str, index: usize },
}

impl fmt::Display for BaselineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineError::MissingBlock(name) => write!(f, "feature block {name} missing or out of order"),
            BaselineError::BadShape { what, got, want } => {
                write!(f, "{what}: got {got}, want {want}")
            }
            BaselineError::EmptyCorpus => write!(f, "corpus statistics need at least one record"),
            BaselineError::NonFinite { block, index } => {
                write!(f, "non-finite value in block {block} at index {index}")
            }
        }
    }
}

/// Shared intermediates for one clip; built once, read by every block.
struct FeatureContext {
    /// Reflect-padded time signal; frame f covers [f·HOP, f·HOP + FFT_SIZE).
    padded: Vec<f64>,
    /// Power spectrogram, (FFT_SIZE/2 + 1) bins × MEL_FRAMES.
    power: Mat,
    /// Log-Mel spectrogram, MEL_BANDS × MEL_FRAMES.
    log_mel: Mat,
    /// Log-compressed Bark band energies, BARK_BANDS × MEL_FRAMES.
    bark: Mat,
}

impl FeatureContext {
    fn build(clip: &AudioClip) -> FeatureContext {
        let segment = dsp::extract_segment(clip, &SegmentSpec::default());
        let padded = dsp::reflect_padded(&segment);
        let power = dsp::stft_power(&segment).expect("segment length fixed by extract_segment");
        let fb = dsp::mel_filterbank();
        let bins = FFT_SIZE / 2 + 1;
        let mut log_mel = Mat::zeros(MEL_BANDS, MEL_FRAMES);
        crate::mat::matmul_nn(&fb.data, &power.data, &mut log_mel.data, MEL_BANDS, bins, MEL_FRAMES);
        for v in log_mel.data.iter_mut() {
            *v = (*v + dsp::LOG_EPS).log10();
        }

        let band_of_bin = bark_band_of_bin(bins);
        let mut bark = Mat::zeros(BARK_BANDS, MEL_FRAMES);
        for frame in 0..MEL_FRAMES {
            for k in 0..bins {
                if let Some(b) = band_of_bin[k] {
                    *bark.get_mut(b, frame) += power.get(k, frame);
                }
            }
        }
        for v in bark.data.iter_mut() {
            *v = (*v + dsp::LOG_EPS).log10();
        }
        FeatureContext { padded, power, log_mel, bark }
    }
}

/// Band index for each FFT bin, `None` above the last Bark edge.
fn bark_band_of_bin(bins: usize) -> Vec<Option<usize>> {
    (0..bins)
        .map(|k| {
            let f = dsp::bin_hz(k);
            if f >= BARK_EDGES_HZ[BARK_BANDS] {
                return None;
            }
            // last band whose lower edge is ≤ f
            let mut band = 0;
            for b in 0..BARK_BANDS {
                if f >= BARK_EDGES_HZ[b] {
                    band = b;
                }
            }
            Some(band)
        })
        .collect()
}

/// Extract every block in declared order from one clip.
pub fn extract_all(clip: &AudioClip) -> Vec<FeatureBlock> {
    let ctx = FeatureContext::build(clip);
    BlockName::ALL
        .iter()
        .map(|&name| FeatureBlock { name, vector: extract_from_context(&ctx, name) })
        .collect()
}

/// Extract a single block; prefer `extract_all` when several are needed —
/// the spectral intermediates are rebuilt on every call.
pub fn extract_block(clip: &AudioClip, name: BlockName) -> FeatureBlock {
    let ctx = FeatureContext::build(clip);
    FeatureBlock { name, vector: extract_from_context(&ctx, name) }
}

fn extract_from_context(ctx: &FeatureContext, name: BlockName) -> Vec<f64> {
    match name {
        BlockName::Mfcc => mfcc_block(&ctx.log_mel),
        BlockName::Ssd => ssd_block(&ctx.bark),
        BlockName::SpecCent => spectral_centroid_block(&ctx.power),
        BlockName::Rp => rhythm_pattern_block(&ctx.bark),
        BlockName::Bpm => vec![tempo_bpm(&ctx.log_mel)],
        BlockName::Chroma => chroma_block(&ctx.power).0,
        BlockName::Tonnetz => tonnetz_block(&ctx.power),
        BlockName::Rmse => frame_stat_block(&ctx.padded, frame_rms),
        BlockName::Zcr => frame_stat_block(&ctx.padded, frame_zcr),
    }
}

/// Concatenate blocks after checking they are exactly the declared nine in
/// declared order with declared dims and finite entries.
pub fn concat_blocks(blocks: &[FeatureBlock]) -> Result<Vec<f64>, BaselineError> {
    if blocks.len() != BlockName::ALL.len() {
        return Err(BaselineError::BadShape {
            what: "block count",
            got: blocks.len(),
            want: BlockName::ALL.len(),
        });
    }
    let mut out = Vec::with_capacity(FUSED_DIM);
    for (i, want) in BlockName::ALL.iter().enumerate() {
        let block = &blocks[i];
        if block.name != *want {
            return Err(BaselineError::MissingBlock(want.label()));
        }
        if block.vector.len() != want.dim() {
            return Err(BaselineError::BadShape {
                what: "block dim",
                got: block.vector.len(),
                want: want.dim(),
            });
        }
        for (j, &v) in block.vector.iter().enumerate() {
            if !v.is_finite() {
                return Err(BaselineError::NonFinite { block: want.label(), index: j });
            }
        }
        out.extend_from_slice(&block.vector);
    }
    Ok(out)
}

/// Per-dimension corpus mean and population standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn corpus_stats(rows: &[Vec<f64>]) -> Result<CorpusStats, BaselineError> {
    if rows.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    for row in rows {
        if row.len() != FUSED_DIM {
            return Err(BaselineError::BadShape {
                what: "feature row dim",
                got: row.len(),
                want: FUSED_DIM,
            });
        }
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0f64; FUSED_DIM];
    for row in rows {
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    // centered second pass keeps cancellation error off the variance
    let mut var = vec![0.0f64; FUSED_DIM];
    for row in rows {
        for ((s, &v), &m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
            let d = v - m;
            *s += d * d;
        }
    }
    let std = var.iter().map(|&s| (s / n).sqrt()).collect();
    Ok(CorpusStats { mean, std })
}

/// z-score per dim (σ = 0 → 0), ×1/√dim per block, ×weight per block.
pub fn fuse(raw: &[f64], stats: &CorpusStats) -> Result<Vec<f64>, BaselineError> {
    let weights = BlockName::ALL.map(|b| b.weight());
    fuse_weighted(raw, stats, &weights)
}

/// `fuse` with explicit per-block weights in declared order.
pub fn fuse_weighted(
    raw: &[f64],
    stats: &CorpusStats,
    weights: &[f64; 9],
) -> Result<Vec<f64>, BaselineError> {
    if raw.len() != FUSED_DIM {
        return Err(BaselineError::BadShape { what: "feature row dim", got: raw.len(), want: FUSED_DIM });
    }
    if stats.mean.len() != FUSED_DIM || stats.std.len() != FUSED_DIM {
        return Err(BaselineError::BadShape {
            what: "stats dim",
            got: stats.mean.len().min(stats.std.len()),
            want: FUSED_DIM,
        });
    }
    let mut out = Vec::with_capacity(FUSED_DIM);
    let mut off = 0;
    for (bi, block) in BlockName::ALL.iter().enumerate() {
        let dim = block.dim();
        let scale = weights[bi] / (dim as f64).sqrt();
        for d in off..off + dim {
            let z = if stats.std[d] > 0.0 { (raw[d] - stats.mean[d]) / stats.std[d] } else { 0.0 };
            out.push(z * scale);
        }
        off += dim;
    }
    Ok(out)
}

// ---- block implementations ----

/// Mean then population std of each column of `values` (rows × frames).
fn mean_std_rows(values: &Mat) -> Vec<f64> {
    let rows = values.rows;
    let frames = values.cols;
    let mut out = Vec::with_capacity(2 * rows);
    let mut stds = Vec::with_capacity(rows);
    for r in 0..rows {
        let (mean, std) = mean_std(values.row(r));
        out.push(mean);
        stds.push(std);
        let _ = frames;
    }
    out.extend_from_slice(&stds);
    out
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// 13 orthonormal DCT-II coefficients of each log-Mel frame; means then stds.
fn mfcc_block(log_mel: &Mat) -> Vec<f64> {
    let n = MEL_BANDS;
    let mut basis = vec![0.0f64; MFCC_COEFFS * n];
    for k in 0..MFCC_COEFFS {
        let w = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            basis[k * n + i] = w * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos();
        }
    }
    let mut coeffs = Mat::zeros(MFCC_COEFFS, MEL_FRAMES);
    for frame in 0..MEL_FRAMES {
        for k in 0..MFCC_COEFFS {
            let mut acc = 0.0;
            for i in 0..n {
                acc += basis[k * n + i] * log_mel.get(i, frame);
            }
            coeffs.set(k, frame, acc);
        }
    }
    mean_std_rows(&coeffs)
}

/// Seven summary statistics per Bark band, bands contiguous:
/// mean, var, skew, excess kurtosis, median, min, max.
fn ssd_block(bark: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(7 * BARK_BANDS);
    for b in 0..BARK_BANDS {
        out.extend_from_slice(&stats7(bark.row(b)));
    }
    out
}

fn stats7(xs: &[f64]) -> [f64; 7] {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let (skew, kurt) = if m2 > 0.0 {
        let m3 = xs.iter().map(|&x| (x - mean) * (x - mean) * (x - mean)).sum::<f64>() / n;
        let m4 = xs.iter().map(|&x| ((x - mean) * (x - mean)) * ((x - mean) * (x - mean))).sum::<f64>() / n;
        (m3 / (m2 * m2.sqrt()), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    [mean, m2, skew, kurt, median, sorted[0], sorted[sorted.len() - 1]]
}

/// Power-weighted mean frequency per frame; mean+std over frames.
fn spectral_centroid_block(power: &Mat) -> Vec<f64> {
    let bins = power.rows;
    let centroids: Vec<f64> = (0..MEL_FRAMES)
        .map(|frame| {
            let mut wsum = 0.0;
            let mut total = 0.0;
            for k in 0..bins {
                let p = power.get(k, frame);
                wsum += dsp::bin_hz(k) * p;
                total += p;
            }
            if total > 0.0 {
                wsum / total
            } else {
                0.0
            }
        })
        .collect();
    let (mean, std) = mean_std(&centroids);
    vec![mean, std]
}

/// Modulation amplitudes: per Bark band, FFT of the first 128 envelope
/// frames; magnitudes of bins 1..=60 (DC skipped), bands contiguous.
fn rhythm_pattern_block(bark: &Mat) -> Vec<f64> {
    let fft = dsp::Fft::new(MODULATION_FRAMES);
    let mut out = Vec::with_capacity(BARK_BANDS * MODULATION_BINS);
    let mut re = vec![0.0f64; MODULATION_FRAMES];
    let mut im = vec![0.0f64; MODULATION_FRAMES];
    for b in 0..BARK_BANDS {
        let row = bark.row(b);
        re.copy_from_slice(&row[..MODULATION_FRAMES]);
        for v in im.iter_mut() {
            *v = 0.0;
        }
        fft.forward(&mut re, &mut im);
        for k in 1..=MODULATION_BINS {
            out.push((re[k] * re[k] + im[k] * im[k]).sqrt());
        }
    }
    out
}

/// Dominant onset-autocorrelation tempo in [40, 200] BPM. Onset strength is
/// positive log-Mel flux summed over bands; the integer-lag peak (ties go to
/// the larger lag, i.e. the slower tempo) is refined by quadratic
/// interpolation and converted through the frame rate.
fn tempo_bpm(log_mel: &Mat) -> f64 {
    let frames = MEL_FRAMES;
    let mut onset = vec![0.0f64; frames - 1];
    for t in 1..frames {
        let mut acc = 0.0;
        for b in 0..MEL_BANDS {
            let d = log_mel.get(b, t) - log_mel.get(b, t - 1);
            if d > 0.0 {
                acc += d;
            }
        }
        onset[t - 1] = acc;
    }
    let (mean, _) = mean_std(&onset);
    for v in onset.iter_mut() {
        *v -= mean;
    }

    let frame_rate = TARGET_SAMPLE_RATE as f64 / HOP as f64;
    let lag_min = ((frame_rate * 60.0 / BPM_MAX).floor() as usize).max(2);
    let lag_max = ((frame_rate * 60.0 / BPM_MIN).ceil() as usize).min(onset.len() - 2);
    let autocorr = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for t in 0..onset.len() - lag {
            acc += onset[t] * onset[t + lag];
        }
        acc
    };
    let mut best_lag = lag_min;
    let mut best = autocorr(lag_min);
    for lag in lag_min + 1..=lag_max {
        let r = autocorr(lag);
        if r >= best {
            best = r;
            best_lag = lag;
        }
    }
    let (rl, rc, rr) = (autocorr(best_lag - 1), best, autocorr(best_lag + 1));
    let denom = rl - 2.0 * rc + rr;
    let delta = if denom != 0.0 { (0.5 * (rl - rr) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let bpm = frame_rate * 60.0 / (best_lag as f64 + delta);
    bpm.clamp(BPM_MIN, BPM_MAX)
}

/// Pitch-class energies per frame (12 × frames) and their mean+std block.
fn chroma_block(power: &Mat) -> (Vec<f64>, Mat) {
    let bins = power.rows;
    let pc_of_bin: Vec<Option<usize>> = (0..bins)
        .map(|k| {
            if k == 0 {
                return None;
            }
            let midi = 69.0 + 12.0 * (dsp::bin_hz(k) / 440.0).log2();
            Some((midi.round() as i64).rem_euclid(12) as usize)
        })
        .collect();
    let mut chroma = Mat::zeros(12, MEL_FRAMES);
    for frame in 0..MEL_FRAMES {
        for k in 0..bins {
            if let Some(pc) = pc_of_bin[k] {
                *chroma.get_mut(pc, frame) += power.get(k, frame);
            }
        }
    }
    (mean_std_rows(&chroma), chroma)
}

/// Six tonal-centroid dimensions from L1-normalized chroma: paired
/// sin/cos projections on the fifths (r=1), minor-third (r=1) and
/// major-third (r=0.5) circles; mean+std over frames.
fn tonnetz_block(power: &Mat) -> Vec<f64> {
    let (_, chroma) = chroma_block(power);
    let angles = [7.0 * PI / 6.0, 3.0 * PI / 2.0, 2.0 * PI / 3.0];
    let radii = [1.0, 1.0, 0.5];
    let mut centroid = Mat::zeros(6, MEL_FRAMES);
    for frame in 0..MEL_FRAMES {
        let total: f64 = (0..12).map(|pc| chroma.get(pc, frame)).sum();
        for (ci, (&angle, &r)) in angles.iter().zip(radii.iter()).enumerate() {
            let mut s = 0.0;
            let mut c = 0.0;
            for pc in 0..12 {
                let e = if total > 0.0 { chroma.get(pc, frame) / total } else { 0.0 };
                s += e * (pc as f64 * angle).sin();
                c += e * (pc as f64 * angle).cos();
            }
            centroid.set(2 * ci, frame, r * s);
            centroid.set(2 * ci + 1, frame, r * c);
        }
    }
    mean_std_rows(&centroid)
}

/// Mean+std of a per-frame statistic over the padded STFT frame grid.
fn frame_stat_block(padded: &[f64], stat: fn(&[f64]) -> f64) -> Vec<f64> {
    let values: Vec<f64> =
        (0..MEL_FRAMES).map(|f| stat(&padded[f * HOP..f * HOP + FFT_SIZE])).collect();
    let (mean, std) = mean_std(&values);
    vec![mean, std]
}

fn frame_rms(frame: &[f64]) -> f64 {
    (frame.iter().map(|&x| x * x).sum::<f64>() / frame.len() as f64).sqrt()
}

/// Sign changes per sample step; zero counts as non-negative.
fn frame_zcr(frame: &[f64]) -> f64 {
    let crossings =
        frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    crossings as f64 / (frame.len() - 1) as f64
}

/// Render a label for diagnostics and cache tags.
pub fn block_label_list() -> String {
    let mut s = String::new();
    for (i, b) in BlockName::ALL.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(b.label());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip_from(samples: Vec<f32>) -> AudioClip {
        AudioClip { samples, sample_rate: TARGET_SAMPLE_RATE }
    }

    fn sine(freq: f64, seconds: f64, amp: f64) -> Vec<f32> {
        let n = (seconds * TARGET_SAMPLE_RATE as f64) as usize;
        (0..n)
            .map(|i| (amp * (2.0 * PI * freq * i as f64 / TARGET_SAMPLE_RATE as f64).sin()) as f32)
            .collect()
    }

    #[test]
    fn declared_dims_sum_to_fused_dim() {
        let total: usize = BlockName::ALL.iter().map(|b| b.dim()).sum();
        assert_eq!(total, FUSED_DIM);
        assert_eq!(
            BlockName::ALL.map(|b| b.dim()),
            [26, 168, 2, 1440, 1, 24, 12, 2, 2]
        );
    }

    #[test]
    fn weights_sum_to_one_and_categories_match() {
        let total: f64 = BlockName::ALL.iter().map(|b| b.weight()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let cats = category_weights();
        let want = [0.39, 0.25, 0.24, 0.09, 0.03];
        for ((_, w), target) in cats.iter().zip(want.iter()) {
            assert!((w - target).abs() < 1e-9, "{w} vs {target}");
        }
    }

    #[test]
    fn extract_all_has_declared_shape_and_finite_entries() {
        // deterministic pseudo-noise without pulling in the rng module
        let samples: Vec<f32> = (0..44100)
            .map(|i| (((i as u64).wrapping_mul(2654435761) % 2000) as f32 / 1000.0 - 1.0) * 0.3)
            .collect();
        let blocks = extract_all(&clip_from(samples));
        assert_eq!(blocks.len(), 9);
        for (block, want) in blocks.iter().zip(BlockName::ALL.iter()) {
            assert_eq!(block.name, *want);
            assert_eq!(block.vector.len(), want.dim());
        }
        let row = concat_blocks(&blocks).unwrap();
        assert_eq!(row.len(), FUSED_DIM);
    }

    #[test]
    fn constant_signal_has_zero_zcr_and_exact_rms() {
        let clip = clip_from(vec![0.5f32; dsp::SEGMENT_SAMPLES]);
        let zcr = extract_block(&clip, BlockName::Zcr).vector;
        assert_eq!(zcr, vec![0.0, 0.0]);
        let rmse = extract_block(&clip, BlockName::Rmse).vector;
        assert!((rmse[0] - 0.5).abs() < 1e-12 && rmse[1].abs() < 1e-12, "{rmse:?}");
    }

    #[test]
    fn alternating_signal_crosses_every_sample() {
        let samples: Vec<f32> =
            (0..dsp::SEGMENT_SAMPLES).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let zcr = extract_block(&clip_from(samples), BlockName::Zcr).vector;
        assert!((zcr[0] - 1.0).abs() < 1e-12 && zcr[1].abs() < 1e-12, "{zcr:?}");
    }

    #[test]
    fn quiet_bands_of_constant_signal_sit_on_the_floor() {
        // a windowed constant leaks into bins 0/1 only, so high Bark bands
        // hold nothing but the log floor
        let clip = clip_from(vec![0.25f32; dsp::SEGMENT_SAMPLES]);
        let ssd = extract_block(&clip, BlockName::Ssd).vector;
        let last = &ssd[7 * (BARK_BANDS - 1)..];
        assert!((last[0] + 10.0).abs() < 1e-6, "mean {}", last[0]);
        assert!(last[1] < 1e-12, "var {}", last[1]);
        assert!((last[4] + 10.0).abs() < 1e-6 && (last[5] + 10.0).abs() < 1e-6);
    }

    #[test]
    fn stats7_hand_case() {
        let got = stats7(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        let want = [0.2, 0.16, 1.5, 0.25, 0.0, 0.0, 1.0];
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
        assert_eq!(stats7(&[1.0, 2.0, 3.0, 4.0])[4], 2.5);
        assert_eq!(stats7(&[3.0, 3.0])[2..4], [0.0, 0.0]);
    }

    #[test]
    fn sine_centroid_lands_on_its_frequency() {
        let clip = clip_from(sine(440.0, 6.0, 0.5));
        let cent = extract_block(&clip, BlockName::SpecCent).vector;
        assert!((cent[0] - 440.0).abs() < 20.0, "centroid {}", cent[0]);
    }

    #[test]
    fn sine_chroma_peaks_at_its_pitch_class() {
        // A4 = MIDI 69 → pitch class 9
        let clip = clip_from(sine(440.0, 6.0, 0.5));
        let chroma = extract_block(&clip, BlockName::Chroma).vector;
        let means = &chroma[..12];
        let argmax = (0..12).max_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap()).unwrap();
        assert_eq!(argmax, 9, "{means:?}");
    }

    #[test]
    fn click_train_tempo_is_recovered() {
        // clicks every 0.5 s → 120 BPM
        let mut samples = vec![0.0f32; dsp::SEGMENT_SAMPLES];
        let mut i = 0;
        while i < samples.len() {
            samples[i] = 1.0;
            i += TARGET_SAMPLE_RATE as usize / 2;
        }
        let bpm = extract_block(&clip_from(samples), BlockName::Bpm).vector[0];
        assert!((bpm - 120.0).abs() < 8.0, "bpm {bpm}");
    }

    #[test]
    fn silence_tempo_is_clamped_and_finite() {
        let bpm = extract_block(&clip_from(vec![0.0f32; 1000]), BlockName::Bpm).vector[0];
        assert!((BPM_MIN..=BPM_MAX).contains(&bpm), "bpm {bpm}");
    }

    #[test]
    fn concat_rejects_reordered_and_misshapen_blocks() {
        let mut blocks: Vec<FeatureBlock> = BlockName::ALL
            .iter()
            .map(|&name| FeatureBlock { name, vector: vec![0.0; name.dim()] })
            .collect();
        blocks.swap(0, 1);
        assert_eq!(concat_blocks(&blocks), Err(BaselineError::MissingBlock("MFCC")));
        blocks.swap(0, 1);
        blocks[4].vector.push(0.0);
        assert!(matches!(
            concat_blocks(&blocks),
            Err(BaselineError::BadShape { what: "block dim", got: 2, want: 1 })
        ));
        blocks[4].vector.truncate(1);
        blocks[8].vector[0] = f64::NAN;
        assert_eq!(
            concat_blocks(&blocks),
            Err(BaselineError::NonFinite { block: "ZCR", index: 0 })
        );
    }

    #[test]
    fn standardized_dims_have_zero_mean_unit_variance() {
        // synthetic raw rows: dim d of record r varies; one constant column
        let n = 7;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                (0..FUSED_DIM)
                    .map(|d| {
                        if d == 100 {
                            3.25 // σ = 0 column
                        } else {
                            ((r * 31 + d * 7) % 13) as f64 - 6.0
                        }
                    })
                    .collect()
            })
            .collect();
        let stats = corpus_stats(&rows).unwrap();
        let fused: Vec<Vec<f64>> = rows.iter().map(|r| fuse(r, &stats).unwrap()).collect();
        for d in 0..FUSED_DIM {
            let block = *BlockName::ALL
                .iter()
                .find(|b| d >= b.offset() && d < b.offset() + b.dim())
                .unwrap();
            let scale = block.weight() / (block.dim() as f64).sqrt();
            let zs: Vec<f64> = fused.iter().map(|f| f[d] / scale).collect();
            let (mean, std) = mean_std(&zs);
            if d == 100 {
                assert!(zs.iter().all(|&z| z == 0.0));
            } else {
                assert!(mean.abs() < 1e-6, "dim {d} mean {mean}");
                assert!((std - 1.0).abs() < 1e-4, "dim {d} std {std}");
            }
        }
    }

    #[test]
    fn record_at_the_corpus_mean_fuses_to_zero() {
        let base: Vec<f64> = (0..FUSED_DIM).map(|d| d as f64 * 0.01).collect();
        let lo: Vec<f64> = base.iter().map(|v| v - 1.5).collect();
        let hi: Vec<f64> = base.iter().map(|v| v + 1.5).collect();
        let stats = corpus_stats(&[lo, base.clone(), hi]).unwrap();
        let fused = fuse(&base, &stats).unwrap();
        assert!(fused.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn single_differing_scalar_block_gives_hand_checked_distance() {
        // two records identical except BPM (1-D, weight .07): z = ±1, so
        // Δ = .07·2/√1 and d² = .0196
        let mut a: Vec<f64> = vec![1.0; FUSED_DIM];
        let mut b = a.clone();
        let bpm_off = BlockName::Bpm.offset();
        a[bpm_off] = 100.0;
        b[bpm_off] = 140.0;
        let stats = corpus_stats(&[a.clone(), b.clone()]).unwrap();
        let fa = fuse(&a, &stats).unwrap();
        let fb = fuse(&b, &stats).unwrap();
        let d2: f64 = fa.iter().zip(fb.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((d2 - 0.0196).abs() < 1e-12, "d² {d2}");
    }

    #[test]
    fn scaling_a_weight_scales_that_block_linearly() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|r| (0..FUSED_DIM).map(|d| ((r + 2) * (d + 1) % 17) as f64).collect())
            .collect();
        let stats = corpus_stats(&rows).unwrap();
        let mut weights = BlockName::ALL.map(|b| b.weight());
        let base = fuse_weighted(&rows[0], &stats, &weights).unwrap();
        weights[3] *= 2.0; // RP
        let scaled = fuse_weighted(&rows[0], &stats, &weights).unwrap();
        let (off, dim) = (BlockName::Rp.offset(), BlockName::Rp.dim());
        for d in 0..FUSED_DIM {
            let factor = if d >= off && d < off + dim { 2.0 } else { 1.0 };
            assert!((scaled[d] - factor * base[d]).abs() < 1e-12);
        }
    }
}

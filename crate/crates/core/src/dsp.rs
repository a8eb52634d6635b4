//! Audio standardization and the 80×130 log-Mel model input.
//!
//! Every track is mixed to mono, resampled to 44.1 kHz, cut to one 6 s
//! segment (5 s offset, reduced/zero-padded for short clips), and turned
//! into a log10 power spectrogram pooled through 80 triangular Mel filters
//! spanning 16 Hz–18 kHz. All stages are pure and bitwise-deterministic.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
#[allow(unused_imports)] // resolves float math in no_std builds
use num_traits::Float;

use crate::mat::Mat;

pub const TARGET_SAMPLE_RATE: u32 = 44100;
/// 6 s · 44100 Hz.
pub const SEGMENT_SAMPLES: usize = 264_600;
pub const FFT_SIZE: usize = 4096;
pub const HOP: usize = FFT_SIZE / 2;
/// 1 + floor(SEGMENT_SAMPLES / HOP).
pub const MEL_FRAMES: usize = 130;
pub const MEL_BANDS: usize = 80;
pub const MEL_FMIN_HZ: f64 = 16.0;
pub const MEL_FMAX_HZ: f64 = 18_000.0;
/// log10 of the additive floor 1e-10; the value of silent cells.
pub const LOG_FLOOR: f32 = -10.0;

pub(crate) const LOG_EPS: f64 = 1e-10;
/// Windowed-sinc resampler: Kaiser β, taps per phase, table phases.
const KAISER_BETA: f64 = 8.0;
const RESAMPLE_TAPS: usize = 64;
const RESAMPLE_PHASES: usize = 512;

/// Mono audio in [−1, 1] at a known rate; standardized form is 44.1 kHz.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    /// Average interleaved channels to mono; rate unchanged.
    pub fn from_interleaved(data: &[f32], channels: usize, sample_rate: u32) -> AudioClip {
        assert!(channels > 0);
        let frames = data.len() / channels;
        let scale = 1.0 / channels as f64;
        let samples = (0..frames)
            .map(|f| {
                let sum: f64 =
                    data[f * channels..(f + 1) * channels].iter().map(|&s| s as f64).sum();
                (sum * scale) as f32
            })
            .collect();
        AudioClip { samples, sample_rate }
    }

    /// Resample to 44.1 kHz; a clip already at the target rate passes
    /// through bitwise unchanged.
    pub fn standardized(self) -> AudioClip {
        if self.sample_rate == TARGET_SAMPLE_RATE {
            return self;
        }
        AudioClip {
            samples: resample(&self.samples, self.sample_rate, TARGET_SAMPLE_RATE),
            sample_rate: TARGET_SAMPLE_RATE,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Segment length and nominal offset, in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentSpec {
    pub length_s: f64,
    pub offset_s: f64,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        SegmentSpec { length_s: 6.0, offset_s: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DspError {
    BadLength { got: usize, want: usize },
}

impl fmt::Display for DspError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DspError::BadLength { got, want } => {
                write!(f, "segment has {got} samples, expected {want}")
            }
        }
    }
}

/// 80 bands × 130 frames of log10 power, row-major by band; every value is
/// ≥ [`LOG_FLOOR`] and finite.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    data: Vec<f32>,
}

impl MelSpectrogram {
    pub fn from_data(data: Vec<f32>) -> Result<Self, DspError> {
        if data.len() != MEL_BANDS * MEL_FRAMES {
            return Err(DspError::BadLength { got: data.len(), want: MEL_BANDS * MEL_FRAMES });
        }
        Ok(MelSpectrogram { data })
    }

    #[inline]
    pub fn get(&self, band: usize, frame: usize) -> f32 {
        self.data[band * MEL_FRAMES + frame]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn band(&self, band: usize) -> &[f32] {
        &self.data[band * MEL_FRAMES..(band + 1) * MEL_FRAMES]
    }
}

/// Cut the standardized clip to exactly `round(length_s · 44100)` samples.
/// The nominal offset shrinks to `|a| − |s|` when the clip is too short for
/// offset + segment, and missing content is zero-padded at the end.
pub fn extract_segment(clip: &AudioClip, spec: &SegmentSpec) -> Vec<f32> {
    let sr = clip.sample_rate as f64;
    let seg_len = (spec.length_s * sr).round() as usize;
    let nominal_off = (spec.offset_s * sr).round() as usize;
    let n = clip.samples.len();
    let mut out = vec![0.0f32; seg_len];
    if n < seg_len {
        out[..n].copy_from_slice(&clip.samples);
        return out;
    }
    let off = if n <= seg_len + nominal_off { n - seg_len } else { nominal_off };
    out.copy_from_slice(&clip.samples[off..off + seg_len]);
    out
}

/// Log-Mel spectrogram of a standardized 6 s segment.
pub fn mel_spectrogram(segment: &[f32]) -> Result<MelSpectrogram, DspError> {
    let power = stft_power(segment)?;
    let fb = mel_filterbank();
    let mut mel = Mat::zeros(MEL_BANDS, MEL_FRAMES);
    crate::mat::matmul_nn(
        &fb.data,
        &power.data,
        &mut mel.data,
        MEL_BANDS,
        FFT_SIZE / 2 + 1,
        MEL_FRAMES,
    );
    let data = mel.data.iter().map(|&p| (p + LOG_EPS).log10() as f32).collect();
    MelSpectrogram::from_data(data)
}

/// Power spectrogram: (FFT_SIZE/2 + 1) bins × 130 frames. Frames come from
/// reflect-padded centering (2048 samples each side), Hann-windowed
/// 4096-sample windows, hop 2048.
pub fn stft_power(segment: &[f32]) -> Result<Mat, DspError> {
    if segment.len() != SEGMENT_SAMPLES {
        return Err(DspError::BadLength { got: segment.len(), want: SEGMENT_SAMPLES });
    }
    let padded = reflect_padded(segment);
    let window = hann_periodic(FFT_SIZE);
    let fft = Fft::new(FFT_SIZE);
    let bins = FFT_SIZE / 2 + 1;
    let mut out = Mat::zeros(bins, MEL_FRAMES);
    let mut re = vec![0.0f64; FFT_SIZE];
    let mut im = vec![0.0f64; FFT_SIZE];
    for frame in 0..MEL_FRAMES {
        let start = frame * HOP;
        for i in 0..FFT_SIZE {
            re[i] = padded[start + i] * window[i];
            im[i] = 0.0;
        }
        fft.forward(&mut re, &mut im);
        for k in 0..bins {
            out.set(k, frame, re[k] * re[k] + im[k] * im[k]);
        }
    }
    Ok(out)
}

/// Frequency of FFT bin `k` at the standard rate.
pub fn bin_hz(k: usize) -> f64 {
    k as f64 * TARGET_SAMPLE_RATE as f64 / FFT_SIZE as f64
}

/// HTK Mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// 80 × (FFT_SIZE/2 + 1) triangular filters, Mel-spaced between 16 Hz and
/// 18 kHz; each row is normalized to sum 1.
pub fn mel_filterbank() -> Mat {
    let bins = FFT_SIZE / 2 + 1;
    let mel_lo = hz_to_mel(MEL_FMIN_HZ);
    let mel_hi = hz_to_mel(MEL_FMAX_HZ);
    let edges: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (MEL_BANDS + 1) as f64))
        .collect();
    let mut fb = Mat::zeros(MEL_BANDS, bins);
    for b in 0..MEL_BANDS {
        let (lo, center, hi) = (edges[b], edges[b + 1], edges[b + 2]);
        let mut sum = 0.0;
        for k in 0..bins {
            let f = bin_hz(k);
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            fb.set(b, k, w);
            sum += w;
        }
        if sum > 0.0 {
            for k in 0..bins {
                let w = fb.get(b, k);
                fb.set(b, k, w / sum);
            }
        }
    }
    fb
}

/// Hz edges (lower, center, upper) of each Mel filter.
pub fn mel_filter_edges() -> Vec<(f64, f64, f64)> {
    let mel_lo = hz_to_mel(MEL_FMIN_HZ);
    let mel_hi = hz_to_mel(MEL_FMAX_HZ);
    let hz: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (MEL_BANDS + 1) as f64))
        .collect();
    (0..MEL_BANDS).map(|b| (hz[b], hz[b + 1], hz[b + 2])).collect()
}

/// Center the segment by mirroring FFT_SIZE/2 samples on each side
/// (reflection about the edge samples, which are not repeated).
pub(crate) fn reflect_padded(segment: &[f32]) -> Vec<f64> {
    let n = segment.len();
    let pad = FFT_SIZE / 2;
    assert!(n > pad);
    let mut out = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        out.push(segment[i] as f64);
    }
    out.extend(segment.iter().map(|&s| s as f64));
    for i in 2..=pad + 1 {
        out.push(segment[n - i] as f64);
    }
    out
}

/// Periodic Hann window.
pub(crate) fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())).collect()
}

/// Iterative radix-2 FFT with a precomputed twiddle table.
pub(crate) struct Fft {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Fft {
    pub fn new(n: usize) -> Fft {
        assert!(n.is_power_of_two());
        let half = n / 2;
        let cos = (0..half).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
        let sin = (0..half).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
        Fft { n, cos, sin }
    }

    /// In-place forward transform (negative-exponent convention).
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        assert_eq!(re.len(), n);
        assert_eq!(im.len(), n);
        // bit-reversal permutation
        let mut j = 0usize;
        for i in 0..n {
            if i < j {
                re.swap(i, j);
                im.swap(i, j);
            }
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            let mut base = 0;
            while base < n {
                for k in 0..half {
                    let idx = k * step;
                    let (wr, wi) = (self.cos[idx], -self.sin[idx]);
                    let (ur, ui) = (re[base + k], im[base + k]);
                    let (vr, vi) = (re[base + k + half], im[base + k + half]);
                    let tr = vr * wr - vi * wi;
                    let ti = vr * wi + vi * wr;
                    re[base + k] = ur + tr;
                    im[base + k] = ui + ti;
                    re[base + k + half] = ur - tr;
                    im[base + k + half] = ui - ti;
                }
                base += len;
            }
            len <<= 1;
        }
    }
}

/// Windowed-sinc sample-rate conversion. Output length is
/// `round(n · to/from)`; the kernel is a Kaiser-windowed sinc, 64 taps per
/// phase, 512 tabulated phases with linear interpolation between them.
pub fn resample(samples: &[f32], from_hz: u32, to_hz: u32) -> Vec<f32> {
    assert!(from_hz > 0 && to_hz > 0);
    if from_hz == to_hz {
        return samples.to_vec();
    }
    let n_in = samples.len() as u64;
    let n_out = ((n_in * to_hz as u64 + from_hz as u64 / 2) / from_hz as u64) as usize;
    if samples.is_empty() {
        return Vec::new();
    }
    let ratio = to_hz as f64 / from_hz as f64;
    let cutoff = ratio.min(1.0);
    let half = (RESAMPLE_TAPS / 2) as i64; // 32

    // table[p][k]: tap weights for fractional offset p / PHASES; each row
    // normalized to unit DC gain.
    let mut table = vec![0.0f64; (RESAMPLE_PHASES + 1) * RESAMPLE_TAPS];
    for p in 0..=RESAMPLE_PHASES {
        let frac = p as f64 / RESAMPLE_PHASES as f64;
        let row = &mut table[p * RESAMPLE_TAPS..(p + 1) * RESAMPLE_TAPS];
        let mut sum = 0.0;
        for (k, slot) in row.iter_mut().enumerate() {
            // distance from the interpolation point to input sample
            // j = i - (half-1) + k, where x = i + frac
            let d = frac + (half - 1) as f64 - k as f64;
            let w = cutoff * sinc(cutoff * d) * kaiser(d / half as f64);
            *slot = w;
            sum += w;
        }
        if sum != 0.0 {
            for slot in row.iter_mut() {
                *slot /= sum;
            }
        }
    }

    let inv_ratio = from_hz as f64 / to_hz as f64;
    let n = samples.len() as i64;
    let mut out = Vec::with_capacity(n_out);
    for t in 0..n_out {
        let x = t as f64 * inv_ratio;
        let i = x.floor() as i64;
        let frac = x - i as f64;
        let pf = frac * RESAMPLE_PHASES as f64;
        let p = pf.floor() as usize;
        let blend = pf - p as f64;
        let row_a = &table[p * RESAMPLE_TAPS..(p + 1) * RESAMPLE_TAPS];
        let row_b = &table[(p + 1) * RESAMPLE_TAPS..(p + 2) * RESAMPLE_TAPS];
        let mut acc = 0.0f64;
        for k in 0..RESAMPLE_TAPS {
            let j = i - (half - 1) + k as i64;
            if j < 0 || j >= n {
                continue;
            }
            let w = row_a[k] + blend * (row_b[k] - row_a[k]);
            acc += w * samples[j as usize] as f64;
        }
        out.push(acc as f32);
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser window on x ∈ [−1, 1].
fn kaiser(x: f64) -> f64 {
    let t = 1.0 - x * x;
    if t <= 0.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * t.sqrt()) / bessel_i0(KAISER_BETA)
}

/// Modified Bessel function of the first kind, order 0, by power series.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

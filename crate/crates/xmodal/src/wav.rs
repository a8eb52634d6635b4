//! Minimal RIFF/WAVE codec: reads the PCM encodings the pipeline accepts
//! (8/16/24-bit integer, 32-bit integer, 32-bit float, plain or extensible
//! headers) into interleaved `f32`, and writes 16-bit integer or 32-bit
//! float files for fixtures.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug)]
pub enum WavError {
    Io(io::Error),
    /// Structurally broken file; the message says where.
    Malformed(String),
    /// Valid container, but an encoding outside the supported set.
    Unsupported(String),
}

impl fmt::Display for WavError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WavError::Io(e) => write!(f, "io: {e}"),
            WavError::Malformed(m) => write!(f, "malformed wav: {m}"),
            WavError::Unsupported(m) => write!(f, "unsupported wav: {m}"),
        }
    }
}

impl std::error::Error for WavError {}

impl From<io::Error> for WavError {
    fn from(e: io::Error) -> Self {
        WavError::Io(e)
    }
}

/// Interleaved samples in [-1, 1] plus the stream layout.
#[derive(Clone, Debug, PartialEq)]
pub struct WavData {
    pub samples: Vec<f32>,
    pub channels: usize,
    pub sample_rate: u32,
}

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Fmt {
    code: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

pub fn read_wav(path: &Path) -> Result<WavData, WavError> {
    decode_wav(&fs::read(path)?)
}

pub fn decode_wav(bytes: &[u8]) -> Result<WavData, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::Malformed("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12usize;
    let mut fmt: Option<Fmt> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).filter(|&e| e <= bytes.len());
        let body_end = match body_end {
            Some(e) => e,
            // final chunk truncated; a cut-off data chunk is a hard error,
            // trailing junk in any other chunk kind is ignored
            None if id == b"data" => {
                return Err(WavError::Malformed("data chunk truncated".into()))
            }
            None => break,
        };
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[body_start..body_end])?),
            b"data" => {
                if data.is_none() {
                    data = Some(&bytes[body_start..body_end]);
                }
            }
            _ => {}
        }
        pos = body_end + (size & 1); // chunks are word-aligned
    }
    let fmt = fmt.ok_or_else(|| WavError::Malformed("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| WavError::Malformed("no data chunk".into()))?;
    if fmt.channels == 0 {
        return Err(WavError::Malformed("zero channels".into()));
    }
    if fmt.sample_rate == 0 {
        return Err(WavError::Malformed("zero sample rate".into()));
    }
    let samples = decode_samples(data, &fmt)?;
    Ok(WavData { samples, channels: fmt.channels as usize, sample_rate: fmt.sample_rate })
}

fn parse_fmt(body: &[u8]) -> Result<Fmt, WavError> {
    if body.len() < 16 {
        return Err(WavError::Malformed("fmt chunk too short".into()));
    }
    let mut code = u16::from_le_bytes(body[0..2].try_into().unwrap());
    let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
    let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
    let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
    if code == FORMAT_EXTENSIBLE {
        // the real format code is the first two bytes of the SubFormat GUID
        if body.len() < 40 {
            return Err(WavError::Malformed("extensible fmt chunk too short".into()));
        }
        code = u16::from_le_bytes(body[24..26].try_into().unwrap());
    }
    if code != FORMAT_PCM && code != FORMAT_FLOAT {
        return Err(WavError::Unsupported(format!("format code {code}")));
    }
    Ok(Fmt { code, channels, sample_rate, bits })
}

fn decode_samples(data: &[u8], fmt: &Fmt) -> Result<Vec<f32>, WavError> {
    let decode = |bytes_per: usize, f: &dyn Fn(&[u8]) -> f32| -> Result<Vec<f32>, WavError> {
        if data.len() % bytes_per != 0 {
            return Err(WavError::Malformed("data length not a whole sample count".into()));
        }
        Ok(data.chunks_exact(bytes_per).map(f).collect())
    };
    match (fmt.code, fmt.bits) {
        (FORMAT_PCM, 8) => decode(1, &|b| (b[0] as f32 - 128.0) / 128.0),
        (FORMAT_PCM, 16) => {
            decode(2, &|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
        }
        (FORMAT_PCM, 24) => decode(3, &|b| {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8; // sign-extend
            v as f32 / 8_388_608.0
        }),
        (FORMAT_PCM, 32) => decode(4, &|b| {
            i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32 / 2_147_483_648.0
        }),
        (FORMAT_FLOAT, 32) => {
            decode(4, &|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        }
        (code, bits) => Err(WavError::Unsupported(format!("{bits}-bit format code {code}"))),
    }
}

/// Sample encodings the writer produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavEncoding {
    PcmInt16,
    Float32,
}

/// Write interleaved samples. Integer output clamps to [-1, 1] and rounds
/// half away from zero, so identical inputs produce identical bytes.
pub fn write_wav(
    path: &Path,
    samples: &[f32],
    channels: usize,
    sample_rate: u32,
    encoding: WavEncoding,
) -> Result<(), WavError> {
    assert!(channels > 0 && samples.len() % channels == 0, "interleaving mismatch");
    let (code, bytes_per) = match encoding {
        WavEncoding::PcmInt16 => (FORMAT_PCM, 2usize),
        WavEncoding::Float32 => (FORMAT_FLOAT, 4usize),
    };
    let data_len = samples.len() * bytes_per;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&code.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    let block_align = channels * bytes_per;
    out.extend_from_slice(&(sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&((bytes_per * 8) as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    match encoding {
        WavEncoding::PcmInt16 => {
            for &s in samples {
                let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &s in samples {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

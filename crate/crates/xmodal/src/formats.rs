//! Versioned on-disk artifacts, one magic per stage:
//!
//! * `XMC1` corpus, `XML1` topic model, `XMS1` spectrogram cache,
//!   `XMF1` feature-block cache, `XMN1` encoder checkpoint, `XME1`
//!   embedding store.
//!
//! All integers and floats are little-endian; strings are u32
//! length-prefixed UTF-8; every count is a u32. A file whose magic matches
//! on the first three bytes but not the version byte loads as
//! `VersionMismatch`; truncation surfaces as an io error. Writers emit a
//! byte-for-byte deterministic encoding of their inputs, which is what lets
//! re-runs of any stage be compared with a plain file diff.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use xmodal_core::corpus::{Corpus, Record};
use xmodal_core::lsi::{LsiModel, SigmaScale, TermIndex};
use xmodal_core::mat::Mat;
use xmodal_core::net::{Adam, Crnn, CrnnConfig};
use xmodal_core::eval::{EmbeddingStore, StoreTag};
use xmodal_core::textprep::TokenList;

#[derive(Debug)]
pub enum FormatError {
    Io(io::Error),
    /// Recognized family, unknown version byte.
    VersionMismatch { found: [u8; 4] },
    /// Anything structurally inconsistent beyond the magic.
    Corrupt(String),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Io(e) => write!(f, "io: {e}"),
            FormatError::VersionMismatch { found } => {
                write!(f, "version mismatch: file magic {:?}", String::from_utf8_lossy(found))
            }
            FormatError::Corrupt(m) => write!(f, "corrupt file: {m}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        FormatError::Io(e)
    }
}

fn corrupt(m: impl Into<String>) -> FormatError {
    FormatError::Corrupt(m.into())
}

// ---------------------------------------------------------------- readers

struct Rd<'a> {
    r: &'a [u8],
}

impl<'a> Rd<'a> {
    fn new(buf: &'a [u8]) -> Rd<'a> {
        Rd { r: buf }
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let mut m = [0u8; 4];
        self.r.read_exact(&mut m)?;
        if &m == expected {
            Ok(())
        } else if m[..3] == expected[..3] {
            Err(FormatError::VersionMismatch { found: m })
        } else {
            Err(corrupt(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(expected)
            )))
        }
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        let mut b = [0u8; 1];
        self.r.read_exact(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        let mut b = [0u8; 4];
        self.r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn len(&mut self) -> Result<usize, FormatError> {
        Ok(self.u32()? as usize)
    }

    fn string(&mut self) -> Result<String, FormatError> {
        let n = self.len()?;
        let mut b = vec![0u8; n];
        self.r.read_exact(&mut b)?;
        String::from_utf8(b).map_err(|_| corrupt("string is not UTF-8"))
    }

    fn opt_string(&mut self) -> Result<Option<String>, FormatError> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.string()?)),
            f => Err(corrupt(format!("bad presence flag {f}"))),
        }
    }

    fn strings(&mut self) -> Result<Vec<String>, FormatError> {
        let n = self.len()?;
        (0..n).map(|_| self.string()).collect()
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let mut b = vec![0u8; n * 4];
        self.r.read_exact(&mut b)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let mut b = vec![0u8; n * 8];
        self.r.read_exact(&mut b)?;
        Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&mut self) -> Result<(), FormatError> {
        if self.r.is_empty() {
            Ok(())
        } else {
            Err(corrupt(format!("{} trailing bytes", self.r.len())))
        }
    }
}

struct Wr {
    w: Vec<u8>,
}

impl Wr {
    fn new(magic: &[u8; 4]) -> Wr {
        Wr { w: magic.to_vec() }
    }

    fn u8(&mut self, v: u8) {
        self.w.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.w.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.w.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length fits u32"));
    }

    fn string(&mut self, s: &str) {
        self.len(s.len());
        self.w.extend_from_slice(s.as_bytes());
    }

    fn opt_string(&mut self, s: &Option<String>) {
        match s {
            None => self.u8(0),
            Some(s) => {
                self.u8(1);
                self.string(s);
            }
        }
    }

    fn strings(&mut self, v: &[String]) {
        self.len(v.len());
        for s in v {
            self.string(s);
        }
    }

    fn f32s(&mut self, v: &[f32]) {
        for &x in v {
            self.w.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.w.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn save(self, path: &Path) -> Result<(), FormatError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&self.w)?;
        Ok(())
    }
}

// ----------------------------------------------------------------- corpus

pub const CORPUS_MAGIC: &[u8; 4] = b"XMC1";

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<(), FormatError> {
    let mut w = Wr::new(CORPUS_MAGIC);
    w.len(corpus.len());
    for r in corpus.records() {
        w.string(&r.record_id);
        w.string(&r.collection_id);
        w.opt_string(&r.collection_name);
        w.opt_string(&r.data_provider);
        w.opt_string(&r.provider);
        w.opt_string(&r.language);
        w.opt_string(&r.country);
        w.opt_string(&r.title);
        w.strings(&r.subject);
        w.opt_string(&r.description);
        w.opt_string(&r.kind);
        w.strings(&r.contributor);
        w.opt_string(&r.date);
        w.opt_string(&r.year);
        w.opt_string(&r.coverage);
        w.opt_string(&r.terms_spatial);
        w.opt_string(&r.terms_temporal);
        w.opt_string(&r.terms_created);
        w.opt_string(&r.terms_medium);
        w.opt_string(&r.audio_path);
        w.len(r.extra.len());
        for (k, v) in &r.extra {
            w.string(k);
            w.string(v);
        }
    }
    w.save(path)
}

pub fn read_corpus(path: &Path) -> Result<Corpus, FormatError> {
    let buf = fs::read(path)?;
    let mut r = Rd::new(&buf);
    r.magic(CORPUS_MAGIC)?;
    let n = r.len()?;
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let mut rec = Record::new(r.string()?, r.string()?);
        rec.collection_name = r.opt_string()?;
        rec.data_provider = r.opt_string()?;
        rec.provider = r.opt_string()?;
        rec.language = r.opt_string()?;
        rec.country = r.opt_string()?;
        rec.title = r.opt_string()?;
        rec.subject = r.strings()?;
        rec.description = r.opt_string()?;
        rec.kind = r.opt_string()?;
        rec.contributor = r.strings()?;
        rec.date = r.opt_string()?;
        rec.year = r.opt_string()?;
        rec.coverage = r.opt_string()?;
        rec.terms_spatial = r.opt_string()?;
        rec.terms_temporal = r.opt_string()?;
        rec.terms_created = r.opt_string()?;
        rec.terms_medium = r.opt_string()?;
        rec.audio_path = r.opt_string()?;
        let extras = r.len()?;
        for _ in 0..extras {
            let k = r.string()?;
            let v = r.string()?;
            rec.extra.insert(k, v);
        }
        records.push(rec);
    }
    r.finish()?;
    Corpus::from_records(records).map_err(|e| corrupt(format!("{e}")))
}

// ------------------------------------------------------------ topic model

pub const LSI_MAGIC: &[u8; 4] = b"XML1";

pub fn write_lsi(path: &Path, model: &LsiModel, terms: &TermIndex) -> Result<(), FormatError> {
    let (m, n, l) = (model.num_terms(), model.num_records(), model.num_topics);
    assert_eq!(terms.len(), m, "term index covers the factor rows");
    let mut w = Wr::new(LSI_MAGIC);
    w.len(m);
    w.len(n);
    w.len(l);
    w.u8(match model.scale {
        SigmaScale::None => 0,
        SigmaScale::Sigma => 1,
    });
    w.u64(model.seed);
    w.f64s(&model.singular_values);
    w.f64s(&model.term_factors.data);
    w.f64s(&model.record_loadings.data);
    w.f64s(&model.record_vectors.data);
    for &z in &model.zero_records {
        w.u8(z as u8);
    }
    w.len(m);
    for t in 0..m {
        w.string(terms.term(t));
        w.u32(terms.df(t));
    }
    w.save(path)
}

pub fn read_lsi(path: &Path) -> Result<(LsiModel, TermIndex), FormatError> {
    let buf = fs::read(path)?;
    let mut r = Rd::new(&buf);
    r.magic(LSI_MAGIC)?;
    let m = r.len()?;
    let n = r.len()?;
    let l = r.len()?;
    if l > m.min(n) || l == 0 {
        return Err(corrupt(format!("topic count {l} out of range for {m}x{n}")));
    }
    let scale = match r.u8()? {
        0 => SigmaScale::None,
        1 => SigmaScale::Sigma,
        b => return Err(corrupt(format!("bad scale byte {b}"))),
    };
    let seed = r.u64()?;
    let singular_values = r.f64s(l)?;
    let term_factors = Mat { rows: m, cols: l, data: r.f64s(m * l)? };
    let record_loadings = Mat { rows: n, cols: l, data: r.f64s(n * l)? };
    let record_vectors = Mat { rows: n, cols: l, data: r.f64s(n * l)? };
    let mut zero_records = Vec::with_capacity(n);
    for _ in 0..n {
        zero_records.push(match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(corrupt(format!("bad zero-record flag {b}"))),
        });
    }
    let term_count = r.len()?;
    if term_count != m {
        return Err(corrupt(format!("term index has {term_count} entries for {m} factor rows")));
    }
    let mut term_names = Vec::with_capacity(m);
    let mut df = Vec::with_capacity(m);
    for _ in 0..m {
        term_names.push(r.string()?);
        df.push(r.u32()?);
    }
    r.finish()?;
    let model = LsiModel {
        num_topics: l,
        singular_values,
        term_factors,
        record_loadings,
        record_vectors,
        zero_records,
        scale,
        seed,
    };
    Ok((model, TermIndex::from_parts(term_names, df)))
}

// ------------------------------------------------------- spectrogram cache

pub const MEL_MAGIC: &[u8; 4] = b"XMS1";

pub fn write_mel(path: &Path, bands: usize, frames: usize, data: &[f32]) -> Result<(), FormatError> {
    assert_eq!(data.len(), bands * frames, "cell count matches the declared shape");
    let mut w = Wr::new(MEL_MAGIC);
    w.len(bands);
    w.len(frames);
    w.f32s(data);
    w.save(path)
}

/// Returns `(bands, frames, row-major cells)`. The shape is reported, not
/// policed: shape policy belongs to the consumer, which can then say which
/// record's cache is off and what it expected.
pub fn read_mel(path: &Path) -> Result<(usize, usize, Vec<f32>), FormatError> {
    let buf = fs::read(path)?;
    let mut r = Rd::new(&buf);
    r.magic(MEL_MAGIC)?;
    let bands = r.len()?;
    let frames = r.len()?;
    let data = r.f32s(bands * frames)?;
    r.finish()?;
    Ok((bands, frames, data))
}

// ---------------------------------------------------------- feature cache

pub const FEATURE_MAGIC: &[u8; 4] = b"XMF1";

pub fn write_features(path: &Path, blocks: &[(String, Vec<f32>)]) -> Result<(), FormatError> {
    let mut w = Wr::new(FEATURE_MAGIC);
    w.len(blocks.len());
    for (label, v) in blocks {
        w.string(label);
        w.len(v.len());
        w.f32s(v);
    }
    w.save(path)
}

pub fn read_features(path: &Path) -> Result<Vec<(String, Vec<f32>)>, FormatError> {
    let buf = fs::read(path)?;
    let mut r = Rd::new(&buf);
    r.magic(FEATURE_MAGIC)?;
    let n = r.len()?;
    let mut blocks = Vec::with_capacity(n);
    for _ in 0..n {
        let label = r.string()?;
        let dim = r.len()?;
        blocks.push((label, r.f32s(dim)?));
    }
    r.finish()?;
    Ok(blocks)
}

// -------------------------------------------------------------- checkpoint

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"XMN1";

/// Everything needed to rebuild the encoder and to audit how it was
/// trained; serialized as the checkpoint's canonical JSON header (struct
/// field order is the canonical key order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub epoch: usize,
    pub seed: u64,
    pub strategy: String,
    pub net: NetHeader,
    pub train: TrainHeader,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetHeader {
    pub bands: usize,
    pub segment_count: usize,
    pub segment_len: usize,
    pub segment_hop: usize,
    pub conv_filters: Vec<usize>,
    pub gru_hidden: usize,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHeader {
    pub margin: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub pos_threshold: f64,
    pub neg_threshold: f64,
    pub split: [f64; 3],
    pub checkpoint_every: usize,
}

pub const CHECKPOINT_FORMAT: &str = "crnn-checkpoint-v1";

impl NetHeader {
    pub fn from_config(c: &CrnnConfig) -> NetHeader {
        NetHeader {
            bands: c.bands,
            segment_count: c.segment_count,
            segment_len: c.segment_len,
            segment_hop: c.segment_hop,
            conv_filters: c.conv_filters.clone(),
            gru_hidden: c.gru_hidden,
            bn_epsilon: c.bn_epsilon,
            bn_momentum: c.bn_momentum,
        }
    }

    pub fn to_config(&self) -> CrnnConfig {
        CrnnConfig {
            bands: self.bands,
            segment_count: self.segment_count,
            segment_len: self.segment_len,
            segment_hop: self.segment_hop,
            conv_filters: self.conv_filters.clone(),
            gru_hidden: self.gru_hidden,
            bn_epsilon: self.bn_epsilon,
            bn_momentum: self.bn_momentum,
        }
    }
}

pub fn write_checkpoint(
    path: &Path,
    header: &CheckpointHeader,
    model: &mut Crnn<f32>,
    adam: &Adam<f32>,
) -> Result<(), FormatError> {
    let json = serde_json::to_string(header).expect("header serializes");
    let mut w = Wr::new(CHECKPOINT_MAGIC);
    w.string(&json);

    let mut params: Vec<(String, Vec<f32>)> = Vec::new();
    model.visit_params(&mut |name, t| params.push((name.to_string(), t.data.clone())));
    w.len(params.len());
    for (name, data) in &params {
        w.string(name);
        w.len(data.len());
        w.f32s(data);
    }

    let mut buffers: Vec<(String, Vec<f32>)> = Vec::new();
    model.visit_buffers(&mut |name, b| buffers.push((name.to_string(), b.clone())));
    w.len(buffers.len());
    for (name, data) in &buffers {
        w.string(name);
        w.len(data.len());
        w.f32s(data);
    }

    w.u64(adam.t);
    let mut names = adam.names();
    names.sort_unstable();
    w.len(names.len());
    for name in names {
        let (m, v) = adam.slot(name).expect("listed slot exists");
        w.string(name);
        w.len(m.len());
        w.f32s(m);
        w.f32s(v);
    }
    w.save(path)
}

pub fn read_checkpoint(
    path: &Path,
) -> Result<(CheckpointHeader, Crnn<f32>, Adam<f32>), FormatError> {
    let buf = fs::read(path)?;
    let mut r = Rd::new(&buf);
    r.magic(CHECKPOINT_MAGIC)?;
    let header: CheckpointHeader =
        serde_json::from_str(&r.string()?).map_err(|e| corrupt(format!("header json: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(corrupt(format!("unknown checkpoint format {:?}", header.format)));
    }
    let cfg = header.net.to_config();
    let mut model = Crnn::<f32>::new(cfg, header.seed)
        .map_err(|e| corrupt(format!("config does not build: {e}")))?;

    let n_params = r.len()?;
    let mut params = std::collections::BTreeMap::new();
    for _ in 0..n_params {
        let name = r.string()?;
        let len = r.len()?;
        params.insert(name, r.f32s(len)?);
    }
    let mut missing: Vec<String> = Vec::new();
    model.visit_params(&mut |name, t| match params.remove(name) {
        Some(data) if data.len() == t.data.len() => t.data = data,
        Some(_) => missing.push(format!("{name} (wrong size)")),
        None => missing.push(name.to_string()),
    });
    if !missing.is_empty() || !params.is_empty() {
        let extra: Vec<String> = params.into_keys().collect();
        return Err(corrupt(format!(
            "tensor mismatch: missing/mis-sized {missing:?}, unknown {extra:?}"
        )));
    }

    let n_buffers = r.len()?;
    let mut buffers = std::collections::BTreeMap::new();
    for _ in 0..n_buffers {
        let name = r.string()?;
        let len = r.len()?;
        buffers.insert(name, r.f32s(len)?);
    }
    let mut buf_missing: Vec<String> = Vec::new();
    model.visit_buffers(&mut |name, b| match buffers.remove(name) {
        Some(data) if data.len() == b.len() => *b = data,
        Some(_) => buf_missing.push(format!("{name} (wrong size)")),
        None => buf_missing.push(name.to_string()),
    });
    if !buf_missing.is_empty() || !buffers.is_empty() {
        let extra: Vec<String> = buffers.into_keys().collect();
        return Err(corrupt(format!(
            "buffer mismatch: missing/mis-sized {buf_missing:?}, unknown {extra:?}"
        )));
    }

    let mut adam = Adam::<f32>::new();
    adam.t = r.u64()?;
    let n_slots = r.len()?;
    for _ in 0..n_slots {
        let name = r.string()?;
        let len = r.len()?;
        let m = r.f32s(len)?;
        let v = r.f32s(len)?;
        adam.set_slot(&name, m, v);
    }
    r.finish()?;
    Ok((header, model, adam))
}

// --------------------------------------------------------- embedding store

pub const STORE_MAGIC: &[u8; 4] = b"XME1";

pub fn write_store(path: &Path, store: &EmbeddingStore, label: &str) -> Result<(), FormatError> {
    let mut w = Wr::new(STORE_MAGIC);
    w.u8(match store.tag() {
        StoreTag::Crnn => 0,
        StoreTag::Baseline => 1,
    });
    w.string(label);
    w.len(store.len());
    w.len(store.dim());
    w.f64s(store.data());
    w.save(path)
}

pub fn read_store(path: &Path) -> Result<(EmbeddingStore, String), FormatError> {
    let buf = fs::read(path)?;
    let mut r = Rd::new(&buf);
    r.magic(STORE_MAGIC)?;
    let tag = match r.u8()? {
        0 => StoreTag::Crnn,
        1 => StoreTag::Baseline,
        b => return Err(corrupt(format!("bad store tag {b}"))),
    };
    let label = r.string()?;
    let n = r.len()?;
    let dim = r.len()?;
    let data = r.f64s(n * dim)?;
    r.finish()?;
    let store =
        EmbeddingStore::new(data, dim, tag).map_err(|e| corrupt(format!("store: {e}")))?;
    if store.len() != n {
        return Err(corrupt(format!("store rows {} != declared {n}", store.len())));
    }
    Ok((store, label))
}

// ------------------------------------------------------------- token cache

/// Token lists as plain text, one record per line, tokens space-joined.
/// Tokens never contain whitespace, so the encoding is loss-free; an empty
/// line is a record whose metadata normalized to nothing.
pub fn write_tokens(path: &Path, docs: &[TokenList]) -> Result<(), FormatError> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&d.join());
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_tokens(path: &Path) -> Result<Vec<TokenList>, FormatError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| TokenList { tokens: l.split_whitespace().map(|t| t.to_string()).collect() })
        .collect())
}

// ------------------------------------------------------- cache file names

/// Encode a record id into a filesystem-safe stem: ASCII letters, digits,
/// `.`, `_` and `-` pass through, every other byte of the UTF-8 encoding
/// becomes `%XX`. Injective, so distinct ids never collide on disk.
pub fn record_filename(record_id: &str, ext: &str) -> String {
    let mut out = String::with_capacity(record_id.len() + ext.len() + 1);
    for &b in record_id.as_bytes() {
        match b {
            b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'.' | b'_' | b'-' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out.push('.');
    out.push_str(ext);
    out
}

//! Pipeline stages behind the CLI subcommands.
//!
//! Each stage reads its inputs from the configured paths, does its work
//! through the core APIs, writes its outputs, and prints one line-oriented
//! `key=value` summary to stdout. Absent upstream artifacts fail with a
//! remediation hint naming the stage to run; all file contents are a pure
//! function of the inputs and the configuration, so re-runs are
//! byte-identical.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use xmodal_core::baseline::{concat_blocks, corpus_stats, extract_all, fuse, fuse_weighted, FUSED_DIM};
use xmodal_core::corpus::{Corpus, Record};
use xmodal_core::dsp::{extract_segment, mel_spectrogram, AudioClip, SegmentSpec, MEL_BANDS, MEL_FRAMES};
use xmodal_core::eval::{build_term_queries, evaluate, EmbeddingStore, StoreTag, TermQuerySet};
use xmodal_core::lsi::{build_tfidf, fit_lsi, FitOptions, LsiError, LsiModel, SvdMethod};
use xmodal_core::mining::{MiningStrategy, TripletBatch};
use xmodal_core::net::{Adam, Crnn, CrnnConfig};
use xmodal_core::textprep::{preprocess, StopwordTable, TokenList};
use xmodal_core::trainer::{
    train, EpochRow, RelatednessSource, TrainError, TrainHooks,
};

use crate::config::RunConfig;
use crate::formats::{self, CheckpointHeader, FormatError, NetHeader, TrainHeader};
use crate::report::{self, StoreEval};
use crate::synth::{self, SynthSpec};
use crate::wav;
use crate::{io_at, CliError};

fn fmt_err(path: &Path, e: FormatError) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| io_at(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| io_at(path, e))
}

/// UTC timestamp for report file names; never part of file contents.
fn stamp() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string()
}

/// File-name slug of a store label: lowercase, runs of other characters
/// collapse to single dashes.
fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

/// Run `f` over every item, sequentially for one worker and on a sized
/// thread pool otherwise; results keep item order and the first error (in
/// item order, not completion order) wins.
fn run_jobs<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, CliError> + Sync + Send,
{
    let results: Vec<Result<R, CliError>> = if workers <= 1 {
        items.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::data(format!("worker pool: {e}")))?;
        pool.install(|| items.par_iter().map(&f).collect())
    };
    results.into_iter().collect()
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let path = cfg.path("paths.corpus");
    if !path.is_file() {
        return Err(CliError::missing(
            "corpus",
            &format!("no corpus at {}; run ingest first", path.display()),
        ));
    }
    formats::read_corpus(&path).map_err(|e| fmt_err(&path, e))
}

fn resolve_audio(cfg: &RunConfig, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        cfg.path("paths.audio_dir").join(p)
    }
}

fn read_clip(path: &Path) -> Result<AudioClip, CliError> {
    let w = wav::read_wav(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(AudioClip::from_interleaved(&w.samples, w.channels, w.sample_rate).standardized())
}

// ------------------------------------------------------------------ ingest

enum IngestFormat {
    Jsonl,
    Csv,
}

fn pick_format(input: &Path, flag: Option<&str>) -> Result<IngestFormat, CliError> {
    if let Some(f) = flag {
        return match f.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" | "json" => Ok(IngestFormat::Jsonl),
            "csv" => Ok(IngestFormat::Csv),
            other => Err(CliError::config("--format", format!("unknown format {other:?}; expected jsonl or csv"))),
        };
    }
    let ext = input.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("jsonl") | Some("ndjson") | Some("json") => Ok(IngestFormat::Jsonl),
        Some("csv") => Ok(IngestFormat::Csv),
        _ => Err(CliError::config(
            "--format",
            format!("cannot infer the format of {}; pass --format jsonl|csv", input.display()),
        )),
    }
}

/// Attribute values of one JSON field; empty strings and nulls vanish,
/// arrays flatten, scalars keep their JSON rendering.
fn json_values(v: &serde_json::Value) -> Vec<String> {
    match v {
        serde_json::Value::Null => Vec::new(),
        serde_json::Value::String(s) => {
            if s.is_empty() {
                Vec::new()
            } else {
                vec![s.clone()]
            }
        }
        serde_json::Value::Array(items) => items.iter().flat_map(json_values).collect(),
        other => vec![other.to_string()],
    }
}

/// Route one attribute onto the record; list-valued fields keep every
/// value, scalar fields join multiples with spaces, anything unknown lands
/// in the free map.
fn assign_field(rec: &mut Record, key: &str, mut values: Vec<String>) {
    let single = values.join(" ");
    match key {
        "record_id" => rec.record_id = single,
        "collection_id" => rec.collection_id = single,
        "collection_name" => rec.collection_name = Some(single),
        "data_provider" => rec.data_provider = Some(single),
        "provider" => rec.provider = Some(single),
        "language" => rec.language = Some(single),
        "country" => rec.country = Some(single),
        "title" => rec.title = Some(single),
        "subject" => rec.subject.append(&mut values),
        "description" => rec.description = Some(single),
        "type" | "kind" => rec.kind = Some(single),
        "contributor" => rec.contributor.append(&mut values),
        "date" => rec.date = Some(single),
        "year" => rec.year = Some(single),
        "coverage" => rec.coverage = Some(single),
        "terms_spatial" => rec.terms_spatial = Some(single),
        "terms_temporal" => rec.terms_temporal = Some(single),
        "terms_created" => rec.terms_created = Some(single),
        "terms_medium" => rec.terms_medium = Some(single),
        "audio_path" => rec.audio_path = Some(single),
        other => {
            rec.extra.insert(other.to_string(), single);
        }
    }
}

fn build_record(fields: Vec<(String, Vec<String>)>, line: u64) -> Result<Record, CliError> {
    let mut rec = Record::default();
    for (key, values) in fields {
        if values.is_empty() {
            continue;
        }
        assign_field(&mut rec, &key, values);
    }
    for (name, value) in [("record_id", &rec.record_id), ("collection_id", &rec.collection_id)] {
        if value.is_empty() {
            return Err(CliError::data(format!("missing mandatory field {name:?} (line {line})")));
        }
    }
    Ok(rec)
}

fn parse_jsonl(input: &Path) -> Result<Vec<Record>, CliError> {
    let text = fs::read_to_string(input).map_err(|e| io_at(input, e))?;
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(raw)
            .map_err(|e| CliError::data(format!("malformed row (line {line}): {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::data(format!("malformed row (line {line}): not an object")))?;
        let fields = obj.iter().map(|(k, v)| (k.clone(), json_values(v))).collect();
        records.push(build_record(fields, line)?);
    }
    Ok(records)
}

/// CSV rows with a header line; `|` separates multiple values in one cell.
fn parse_csv(input: &Path) -> Result<Vec<Record>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .from_path(input)
        .map_err(|e| CliError::data(format!("{}: {e}", input.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::data(format!("malformed header: {e}")))?
        .clone();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CliError::data(format!("malformed row: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let fields = headers
            .iter()
            .zip(row.iter())
            .map(|(h, cell)| {
                let values = cell
                    .split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
                (h.trim().to_string(), values)
            })
            .collect();
        records.push(build_record(fields, line)?);
    }
    Ok(records)
}

pub fn ingest(cfg: &RunConfig, input: &Path, format: Option<&str>) -> Result<(), CliError> {
    let records = match pick_format(input, format)? {
        IngestFormat::Jsonl => parse_jsonl(input)?,
        IngestFormat::Csv => parse_csv(input)?,
    };
    let corpus = Corpus::from_records(records).map_err(|e| CliError::data(e.to_string()))?;
    let out = cfg.path("paths.corpus");
    formats::write_corpus(&out, &corpus).map_err(|e| fmt_err(&out, e))?;
    println!(
        "ingested records={} collections={} out={}",
        corpus.len(),
        corpus.collections().len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- textprep

pub fn textprep_run(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(cfg)?;
    let stop = StopwordTable::bundled();
    let docs: Vec<TokenList> =
        corpus.records().iter().map(|r| preprocess(&r.concat_metadata(), &stop)).collect();
    let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
    let out = cfg.path("paths.tokens");
    formats::write_tokens(&out, &docs).map_err(|e| fmt_err(&out, e))?;
    println!("preprocessed records={} tokens={} out={}", docs.len(), total, out.display());
    Ok(())
}

// ------------------------------------------------------------------ lsi-fit

pub fn lsi_fit(cfg: &RunConfig, seed_flag: Option<u64>) -> Result<(), CliError> {
    let corpus = load_corpus(cfg)?;
    let tokens_path = cfg.path("paths.tokens");
    if !tokens_path.is_file() {
        return Err(CliError::missing(
            "token cache",
            &format!("no token cache at {}; run textprep first", tokens_path.display()),
        ));
    }
    let docs = formats::read_tokens(&tokens_path).map_err(|e| fmt_err(&tokens_path, e))?;
    if docs.len() != corpus.len() {
        return Err(CliError::data(format!(
            "token cache is stale: {} documents for {} records; re-run textprep",
            docs.len(),
            corpus.len()
        )));
    }
    let (index, w) = build_tfidf(&docs).map_err(|e| CliError::data(e.to_string()))?;
    let requested = cfg.usize("lsi.topics")?;
    if requested == 0 {
        return Err(CliError::config("lsi.topics", "topic count must be at least 1"));
    }
    let cap = w.num_terms.min(w.num_docs);
    let l = requested.min(cap);
    if l < requested {
        eprintln!("note: lsi.topics clamped to {l} (weight matrix is {}x{})", w.num_terms, w.num_docs);
    }
    let seed = match seed_flag {
        Some(s) => s,
        None => cfg.opt_u64("lsi.seed")?.unwrap_or(0),
    };
    let opts = FitOptions { method: SvdMethod::Auto, scale: cfg.scale()?, seed };
    let model = fit_lsi(&w, l, &opts).map_err(|e| CliError::data(e.to_string()))?;
    let out = cfg.path("paths.lsi");
    formats::write_lsi(&out, &model, &index).map_err(|e| fmt_err(&out, e))?;
    println!(
        "lsi topics={} terms={} records={} out={}",
        model.num_topics,
        model.num_terms(),
        model.num_records(),
        out.display()
    );
    Ok(())
}

// -------------------------------------------------------------- dsp-extract

pub fn dsp_extract(cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    let corpus = load_corpus(cfg)?;
    let dir = cfg.path("paths.mel_dir");
    fs::create_dir_all(&dir).map_err(|e| io_at(&dir, e))?;
    run_jobs(corpus.records(), workers, |rec| {
        let rel = rec.audio_path.as_deref().ok_or_else(|| {
            CliError::data(format!("record {} has no audio_path", rec.record_id))
        })?;
        let clip = read_clip(&resolve_audio(cfg, rel))?;
        let segment = extract_segment(&clip, &SegmentSpec::default());
        let mel = mel_spectrogram(&segment)
            .map_err(|e| CliError::data(format!("record {}: {e}", rec.record_id)))?;
        let out = dir.join(formats::record_filename(&rec.record_id, "mel"));
        formats::write_mel(&out, MEL_BANDS, MEL_FRAMES, mel.data()).map_err(|e| fmt_err(&out, e))
    })?;
    println!("mel records={} out_dir={}", corpus.len(), dir.display());
    Ok(())
}

// --------------------------------------------------------- baseline-extract

pub fn baseline_extract(cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    let corpus = load_corpus(cfg)?;
    let feature_dir = cfg.path("paths.feature_dir");
    fs::create_dir_all(&feature_dir).map_err(|e| io_at(&feature_dir, e))?;
    let rows: Vec<Vec<f64>> = run_jobs(corpus.records(), workers, |rec| {
        let rel = rec.audio_path.as_deref().ok_or_else(|| {
            CliError::data(format!("record {} has no audio_path", rec.record_id))
        })?;
        let clip = read_clip(&resolve_audio(cfg, rel))?;
        let blocks = extract_all(&clip);
        let row = concat_blocks(&blocks)
            .map_err(|e| CliError::data(format!("record {}: {e}", rec.record_id)))?;
        // audit cache of the raw per-block values (f32; fusion reads the
        // full-precision row, not this file)
        let cache: Vec<(String, Vec<f32>)> = blocks
            .iter()
            .map(|b| (b.name.label().to_string(), b.vector.iter().map(|&v| v as f32).collect()))
            .collect();
        let out = feature_dir.join(formats::record_filename(&rec.record_id, "feat"));
        formats::write_features(&out, &cache).map_err(|e| fmt_err(&out, e))?;
        Ok(row)
    })?;
    let stats = corpus_stats(&rows).map_err(|e| CliError::data(e.to_string()))?;
    let weights = cfg.baseline_weights()?;
    let mut flat = Vec::with_capacity(rows.len() * FUSED_DIM);
    for (rec, row) in corpus.records().iter().zip(&rows) {
        let fused = match &weights {
            Some(w) => fuse_weighted(row, &stats, w),
            None => fuse(row, &stats),
        }
        .map_err(|e| CliError::data(format!("record {}: {e}", rec.record_id)))?;
        flat.extend_from_slice(&fused);
    }
    let store = EmbeddingStore::new(flat, FUSED_DIM, StoreTag::Baseline)
        .map_err(|e| CliError::data(e.to_string()))?;
    let out = cfg.path("paths.embedding_dir").join("baseline.emb");
    formats::write_store(&out, &store, "baseline").map_err(|e| fmt_err(&out, e))?;
    println!("baseline records={} dim={} out={}", rows.len(), FUSED_DIM, out.display());
    Ok(())
}

// -------------------------------------------------------------------- train

/// Spectrogram cache by corpus ordinal; an empty row means "not cached",
/// which the trainer reports per record for the splits it needs.
fn load_mels(cfg: &RunConfig, corpus: &Corpus, require_all: bool) -> Result<Vec<Vec<f32>>, CliError> {
    let dir = cfg.path("paths.mel_dir");
    if !dir.is_dir() {
        return Err(CliError::missing(
            "spectrogram cache",
            &format!("no spectrograms at {}; run dsp-extract first", dir.display()),
        ));
    }
    let mut out = Vec::with_capacity(corpus.len());
    for rec in corpus.records() {
        let path = dir.join(formats::record_filename(&rec.record_id, "mel"));
        if !path.is_file() {
            if require_all {
                return Err(CliError::missing(
                    "spectrogram cache",
                    &format!(
                        "record {} has no cached spectrogram; run dsp-extract first",
                        rec.record_id
                    ),
                ));
            }
            out.push(Vec::new());
            continue;
        }
        let (_bands, _frames, data) = formats::read_mel(&path).map_err(|e| fmt_err(&path, e))?;
        out.push(data);
    }
    Ok(out)
}

fn strategy_name(s: MiningStrategy) -> &'static str {
    match s {
        MiningStrategy::Lsi => "lsi",
        MiningStrategy::Collection => "collection",
    }
}

fn validate_err(e: TrainError) -> CliError {
    let msg = e.to_string();
    match e {
        TrainError::BadFractions => CliError::config("train.split", msg),
        TrainError::BadConfig(m) if m.contains("batch") => CliError::config("mining.batch_size", m),
        TrainError::BadConfig(m) => CliError::config("train.margin", m),
        _ => CliError::data(msg),
    }
}

fn train_err(e: TrainError) -> CliError {
    let msg = e.to_string();
    match e {
        TrainError::CacheMiss(id) => CliError::missing(
            "spectrogram cache",
            &format!("record {id} has no cached spectrogram; run dsp-extract first"),
        ),
        TrainError::CorruptCache { .. } => CliError::data(format!("{msg}; re-run dsp-extract")),
        TrainError::BadFractions => CliError::config("train.split", msg),
        TrainError::BadConfig(_) => CliError::config("train.margin", msg),
        _ => CliError::data(msg),
    }
}

fn sqdist(emb: &[f32], dim: usize, i: usize, j: usize) -> f64 {
    let a = &emb[i * dim..(i + 1) * dim];
    let b = &emb[j * dim..(j + 1) * dim];
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Streaming CSV audit of every mined triple: record ids, the squared
/// embedding distances mining compared, and (for topic-model mining) the
/// metadata cosines behind the positive/negative decision.
struct TripletDump<'a> {
    path: PathBuf,
    out: Option<io::BufWriter<fs::File>>,
    corpus: &'a Corpus,
    lsi: Option<&'a LsiModel>,
    err: Option<io::Error>,
}

impl TripletDump<'_> {
    fn write_rows(&mut self, ordinals: &[usize], triples: &[(usize, usize, usize)], emb: &[f32], dim: usize) {
        if self.err.is_some() {
            return;
        }
        if let Err(e) = self.try_write(ordinals, triples, emb, dim) {
            self.err = Some(e);
        }
    }

    fn try_write(
        &mut self,
        ordinals: &[usize],
        triples: &[(usize, usize, usize)],
        emb: &[f32],
        dim: usize,
    ) -> io::Result<()> {
        if self.out.is_none() {
            if let Some(dir) = self.path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            let mut w = io::BufWriter::new(fs::File::create(&self.path)?);
            writeln!(w, "anchor_id,positive_id,negative_id,d_ap,d_an,cos_ap,cos_an")?;
            self.out = Some(w);
        }
        let w = self.out.as_mut().expect("created above");
        let fmt_cos = |c: Option<f64>| c.map_or(String::new(), |v| format!("{v}"));
        for &(a, p, n) in triples {
            let (oa, op, on) = (ordinals[a], ordinals[p], ordinals[n]);
            let (cos_ap, cos_an) = match self.lsi {
                Some(m) => (fmt_cos(m.cosine(oa, op)), fmt_cos(m.cosine(oa, on))),
                None => (String::new(), String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.corpus.get(oa).record_id,
                self.corpus.get(op).record_id,
                self.corpus.get(on).record_id,
                sqdist(emb, dim, a, p),
                sqdist(emb, dim, a, n),
                cos_ap,
                cos_an
            )?;
        }
        Ok(())
    }

    fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.err.take() {
            return Err(e);
        }
        if let Some(mut w) = self.out.take() {
            w.flush()?;
        }
        Ok(())
    }
}

struct CliHooks<'a> {
    checkpoint_dir: PathBuf,
    header: CheckpointHeader,
    dump: Option<TripletDump<'a>>,
    err: Option<CliError>,
}

impl TrainHooks for CliHooks<'_> {
    fn on_triples(
        &mut self,
        _epoch: usize,
        ordinals: &[usize],
        triples: &TripletBatch,
        emb: &[f32],
        dim: usize,
    ) {
        if let Some(d) = self.dump.as_mut() {
            d.write_rows(ordinals, &triples.triples, emb, dim);
        }
    }

    fn on_epoch(&mut self, row: &EpochRow) {
        println!("{}", row.progress_line());
    }

    fn on_checkpoint(&mut self, epoch: usize, model: &mut Crnn<f32>, adam: &Adam<f32>) {
        if self.err.is_some() {
            return;
        }
        self.header.epoch = epoch;
        let path = self.checkpoint_dir.join(format!("epoch-{epoch:04}.ckpt"));
        if let Err(e) = formats::write_checkpoint(&path, &self.header, model, adam) {
            self.err = Some(fmt_err(&path, e));
        }
    }
}

pub fn train_run(cfg: &RunConfig, seed_flag: Option<u64>) -> Result<(), CliError> {
    let seed = match seed_flag {
        Some(s) => s,
        None => cfg.opt_u64("train.seed")?.ok_or_else(|| {
            CliError::config("train.seed", "training requires an explicit seed; pass --seed or set train.seed")
        })?,
    };
    let corpus = load_corpus(cfg)?;
    let mels = load_mels(cfg, &corpus, false)?;
    let tc = cfg.train(seed)?;
    tc.validate().map_err(validate_err)?;
    let net = CrnnConfig::default();

    let lsi_model: Option<LsiModel>;
    let relatedness = match tc.mining.strategy {
        MiningStrategy::Lsi => {
            let path = cfg.path("paths.lsi");
            if !path.is_file() {
                return Err(CliError::missing(
                    "topic model",
                    &format!("no topic model at {}; run lsi-fit first", path.display()),
                ));
            }
            let (m, _index) = formats::read_lsi(&path).map_err(|e| fmt_err(&path, e))?;
            if m.num_records() != corpus.len() {
                return Err(CliError::data(format!(
                    "topic model covers {} records but the corpus has {}; re-run lsi-fit",
                    m.num_records(),
                    corpus.len()
                )));
            }
            lsi_model = Some(m);
            RelatednessSource::Lsi(lsi_model.as_ref().expect("just set"))
        }
        MiningStrategy::Collection => {
            lsi_model = None;
            RelatednessSource::Collections
        }
    };

    let ckpt_dir = cfg.path("paths.checkpoint_dir");
    fs::create_dir_all(&ckpt_dir).map_err(|e| io_at(&ckpt_dir, e))?;
    let header = CheckpointHeader {
        format: formats::CHECKPOINT_FORMAT.to_string(),
        epoch: 0,
        seed,
        strategy: strategy_name(tc.mining.strategy).to_string(),
        net: NetHeader::from_config(&net),
        train: TrainHeader {
            margin: tc.margin,
            batch_size: tc.batch_size,
            epochs: tc.epochs,
            lr: tc.adam.lr,
            beta1: tc.adam.beta1,
            beta2: tc.adam.beta2,
            epsilon: tc.adam.epsilon,
            pos_threshold: tc.mining.pos_threshold,
            neg_threshold: tc.mining.neg_threshold,
            split: [tc.fractions.0, tc.fractions.1, tc.fractions.2],
            checkpoint_every: tc.checkpoint_every,
        },
    };
    let dump = cfg.opt_path("paths.triplet_dump").map(|path| TripletDump {
        path,
        out: None,
        corpus: &corpus,
        lsi: lsi_model.as_ref(),
        err: None,
    });
    let mut hooks =
        CliHooks { checkpoint_dir: ckpt_dir.clone(), header: header.clone(), dump, err: None };

    let mut outcome = train(&corpus, &mels, relatedness, &net, &tc, &mut hooks).map_err(train_err)?;
    if let Some(e) = hooks.err.take() {
        return Err(e);
    }
    if let Some(d) = hooks.dump.take() {
        let path = d.path.clone();
        d.finish().map_err(|e| io_at(&path, e))?;
    }

    let mut final_header = header;
    final_header.epoch = outcome.log.rows.last().map_or(0, |r| r.epoch);
    let final_path = ckpt_dir.join("final.ckpt");
    formats::write_checkpoint(&final_path, &final_header, &mut outcome.model, &outcome.adam)
        .map_err(|e| fmt_err(&final_path, e))?;
    let log_path = cfg.path("paths.train_log");
    write_text(&log_path, &outcome.log.render_csv())?;
    println!(
        "trained epochs={} checkpoint={} log={}",
        outcome.log.rows.len(),
        final_path.display(),
        log_path.display()
    );
    Ok(())
}

// -------------------------------------------------------------------- embed

pub fn embed_run(cfg: &RunConfig, checkpoint: Option<PathBuf>) -> Result<(), CliError> {
    let corpus = load_corpus(cfg)?;
    let ckpt = checkpoint.unwrap_or_else(|| cfg.path("paths.checkpoint_dir").join("final.ckpt"));
    if !ckpt.is_file() {
        return Err(CliError::missing(
            "checkpoint",
            &format!("no checkpoint at {}; run train first", ckpt.display()),
        ));
    }
    let (header, mut model, _adam) = formats::read_checkpoint(&ckpt).map_err(|e| fmt_err(&ckpt, e))?;
    let mels = load_mels(cfg, &corpus, true)?;
    let net = header.net.to_config();
    let item_len = net.bands * net.frames();
    for (rec, m) in corpus.records().iter().zip(&mels) {
        if m.len() != item_len {
            return Err(CliError::data(format!(
                "cached spectrogram for {} has {} values, model expects {}; re-run dsp-extract",
                rec.record_id,
                m.len(),
                item_len
            )));
        }
    }

    let dim = net.embedding_dim();
    let chunk_size = 16usize;
    let mut all = Vec::with_capacity(corpus.len() * dim);
    let mut input = vec![0.0f32; chunk_size * item_len];
    let ordinals: Vec<usize> = (0..corpus.len()).collect();
    for chunk in ordinals.chunks(chunk_size) {
        for (i, &ord) in chunk.iter().enumerate() {
            input[i * item_len..(i + 1) * item_len].copy_from_slice(&mels[ord]);
        }
        let emb = model
            .forward(&input[..chunk.len() * item_len], chunk.len(), false)
            .map_err(|e| CliError::data(e.to_string()))?;
        all.extend_from_slice(&emb);
    }
    let store = EmbeddingStore::from_f32(&all, dim, StoreTag::Crnn)
        .map_err(|e| CliError::data(e.to_string()))?;
    let (label, file) = match header.strategy.as_str() {
        "lsi" => ("by LSI", "crnn-lsi.emb"),
        "collection" => ("by Collection", "crnn-collection.emb"),
        other => {
            return Err(CliError::data(format!("checkpoint has unknown mining strategy {other:?}")))
        }
    };
    let out = cfg.path("paths.embedding_dir").join(file);
    formats::write_store(&out, &store, label).map_err(|e| fmt_err(&out, e))?;
    println!("embedded records={} dim={} out={}", corpus.len(), dim, out.display());
    Ok(())
}

// ----------------------------------------------------------------- evaluate

fn read_terms(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let path = cfg.path("eval.terms");
    if !path.is_file() {
        return Err(CliError::missing(
            "term list",
            &format!("no term list at {}; create it with one term per line", path.display()),
        ));
    }
    let text = fs::read_to_string(&path).map_err(|e| io_at(&path, e))?;
    let terms: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    if terms.is_empty() {
        return Err(CliError::data(format!("{}: no terms", path.display())));
    }
    Ok(terms)
}

fn discover_stores(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = cfg.path("paths.embedding_dir");
    let mut out = Vec::new();
    if dir.is_dir() {
        for entry in fs::read_dir(&dir).map_err(|e| io_at(&dir, e))? {
            let path = entry.map_err(|e| io_at(&dir, e))?.path();
            if path.extension().is_some_and(|x| x == "emb") {
                out.push(path);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::missing(
            "embedding stores",
            &format!("no stores in {}; run baseline-extract or embed first", dir.display()),
        ));
    }
    out.sort();
    Ok(out)
}

fn load_and_eval(
    cfg: &RunConfig,
    paths: &[PathBuf],
) -> Result<(Vec<StoreEval>, TermQuerySet), CliError> {
    let corpus = load_corpus(cfg)?;
    let terms = read_terms(cfg)?;
    let stop = StopwordTable::bundled();
    let queries = build_term_queries(&corpus, &stop, &terms);
    let cutoffs = cfg.cutoffs()?;
    let mut evals = Vec::new();
    for path in paths {
        let (store, label) = formats::read_store(path).map_err(|e| fmt_err(path, e))?;
        if store.len() != corpus.len() {
            return Err(CliError::data(format!(
                "store {} covers {} records but the corpus has {}; re-run its extract stage",
                path.display(),
                store.len(),
                corpus.len()
            )));
        }
        let report =
            evaluate(&store, &corpus, &queries, &cutoffs).map_err(|e| CliError::data(e.to_string()))?;
        evals.push(StoreEval { label, report });
    }
    Ok((evals, queries))
}

pub fn evaluate_run(
    cfg: &RunConfig,
    stores: &[PathBuf],
    out: Option<&Path>,
    per_term: bool,
) -> Result<(), CliError> {
    let paths = if stores.is_empty() { discover_stores(cfg)? } else { stores.to_vec() };
    let (evals, queries) = load_and_eval(cfg, &paths)?;
    for (term, n) in &queries.excluded {
        println!("excluded term={term} matches={n}");
    }
    let (dest, csv_path) = match out {
        Some(d) => (d.to_path_buf(), d.join("eval.csv")),
        None => {
            let d = cfg.path("paths.report_dir");
            let p = d.join(format!("eval-{}.csv", stamp()));
            (d, p)
        }
    };
    write_text(&csv_path, &report::render_combined_csv(&evals))?;
    if per_term {
        for ev in &evals {
            let name = match out {
                Some(_) => format!("terms-{}.csv", slug(&ev.label)),
                None => format!("terms-{}-{}.csv", stamp(), slug(&ev.label)),
            };
            let path = dest.join(name);
            write_text(&path, &report::render_per_term_csv(ev))?;
            println!("per_term store={} csv={}", slug(&ev.label), path.display());
        }
    }
    println!(
        "evaluated stores={} terms={} excluded={} csv={}",
        evals.len(),
        evals[0].report.terms.len(),
        queries.excluded.len(),
        csv_path.display()
    );
    Ok(())
}

// ------------------------------------------------------------------- report

pub fn report_run(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let paths = discover_stores(cfg)?;
    let (mut evals, _queries) = load_and_eval(cfg, &paths)?;
    // baseline row first, learned stores after it in label order
    evals.sort_by(|a, b| {
        (a.label != "baseline", a.label.as_str()).cmp(&(b.label != "baseline", b.label.as_str()))
    });
    let (csv_path, txt_path) = match out {
        Some(d) => (d.join("report.csv"), d.join("report.txt")),
        None => {
            let d = cfg.path("paths.report_dir");
            let s = stamp();
            (d.join(format!("report-{s}.csv")), d.join(format!("report-{s}.txt")))
        }
    };
    write_text(&csv_path, &report::render_combined_csv(&evals))?;
    write_text(&txt_path, &report::render_table(&evals))?;
    println!(
        "report stores={} csv={} txt={}",
        evals.len(),
        csv_path.display(),
        txt_path.display()
    );
    Ok(())
}

// ------------------------------------------------------------------- topics

pub fn topics_run(cfg: &RunConfig, topic: usize, k: usize) -> Result<(), CliError> {
    let path = cfg.path("paths.lsi");
    if !path.is_file() {
        return Err(CliError::missing(
            "topic model",
            &format!("no topic model at {}; run lsi-fit first", path.display()),
        ));
    }
    let (model, index) = formats::read_lsi(&path).map_err(|e| fmt_err(&path, e))?;
    let top = model.top_topic_terms(topic, k).map_err(|e| match e {
        LsiError::TopicOutOfRange { .. } => CliError::config("--topic", e.to_string()),
        other => CliError::data(other.to_string()),
    })?;
    for (ordinal, weight) in top {
        println!("{} {}", index.term(ordinal), weight);
    }
    Ok(())
}

// ------------------------------------------------------------ make-synthetic

pub fn make_synthetic(
    out: &Path,
    tracks: usize,
    clusters: usize,
    seed: u64,
    shared_texture: bool,
) -> Result<(), CliError> {
    let spec = SynthSpec { tracks, clusters, seed, shared_texture };
    let n = synth::generate(out, &spec)?;
    println!("synthetic tracks={n} clusters={clusters} out={}", out.display());
    Ok(())
}

//! Run configuration: a flat `section.key = value` text file over a fixed
//! key registry, layered as defaults < config file < `--set key=value`
//! overrides < dedicated command flags. Every key is validated against the
//! registry at assignment time, so a typo fails before any stage runs.
//!
//! Relative paths resolve against the run root (`--root`, default the
//! working directory); absolute paths pass through.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use xmodal_core::lsi::SigmaScale;
use xmodal_core::mining::{MiningConfig, MiningStrategy};
use xmodal_core::net::AdamConfig;
use xmodal_core::TrainConfig;

use crate::CliError;

/// `(key, default, meaning)`. The empty default means "unset": optional
/// features stay off and required-at-use keys fail with a config error.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("paths.corpus", "build/corpus.xmc", "ingested corpus file"),
    ("paths.audio_dir", ".", "base directory that relative record audio paths resolve against"),
    ("paths.tokens", "build/tokens.txt", "normalized token cache"),
    ("paths.lsi", "build/model.lsi", "fitted topic model"),
    ("paths.mel_dir", "build/mel", "spectrogram cache directory"),
    ("paths.feature_dir", "build/features", "handcrafted feature cache directory"),
    ("paths.checkpoint_dir", "build/checkpoints", "encoder checkpoints"),
    ("paths.embedding_dir", "build/embeddings", "embedding stores"),
    ("paths.report_dir", "reports", "evaluation reports"),
    ("paths.train_log", "build/train_log.csv", "per-epoch training log"),
    ("paths.triplet_dump", "", "optional mined-triplet audit CSV; empty disables"),
    ("lsi.topics", "128", "requested topic count (capped at the matrix rank)"),
    ("lsi.scale", "none", "record-vector scaling before normalization: none|sigma"),
    ("lsi.seed", "0", "seed for the randomized factorization path"),
    ("mining.strategy", "lsi", "relatedness source: lsi|collection"),
    ("mining.pos_threshold", "0.8", "cosine at or above which a pair is positive"),
    ("mining.neg_threshold", "0.5", "cosine below which a pair is negative"),
    ("mining.batch_size", "400", "records per training batch"),
    ("train.margin", "0.2", "triplet loss margin"),
    ("train.lr", "0.0001", "Adam learning rate"),
    ("train.epochs", "100", "training epochs"),
    ("train.seed", "", "run seed; required for train (here or via --seed)"),
    ("train.split", "0.8,0.1,0.1", "train,val,test fractions"),
    ("train.checkpoint_every", "10", "intermediate checkpoint interval; 0 disables"),
    ("train.beta1", "0.9", "Adam first-moment decay"),
    ("train.beta2", "0.999", "Adam second-moment decay"),
    ("train.epsilon", "0.00000001", "Adam denominator epsilon"),
    ("eval.cutoffs", "1,2,3,5,10,50,100", "precision cut-offs, ascending"),
    ("eval.terms", "terms.txt", "content-term list, one term per line"),
    ("baseline.weights", "", "nine block weight overrides; empty keeps the built-ins"),
];

#[derive(Clone, Debug)]
pub struct RunConfig {
    root: PathBuf,
    values: BTreeMap<&'static str, String>,
}

fn registry_key(key: &str) -> Option<&'static str> {
    KEYS.iter().map(|(k, _, _)| *k).find(|k| *k == key)
}

impl RunConfig {
    pub fn defaults(root: &Path) -> RunConfig {
        RunConfig {
            root: root.to_path_buf(),
            values: KEYS.iter().map(|&(k, d, _)| (k, d.to_string())).collect(),
        }
    }

    /// Defaults, then the config file (if any), then `--set` overrides, in
    /// that order; later layers win.
    pub fn load(
        root: &Path,
        config_path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::defaults(root);
        if let Some(path) = config_path {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::config("config", format!("cannot read {}: {e}", path.display()))
            })?;
            for (line_no, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::config(
                        "config",
                        format!("line {}: expected `key = value`", line_no + 1),
                    )
                })?;
                cfg.set(key.trim(), value.trim())?;
            }
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let k = registry_key(key)
            .ok_or_else(|| CliError::config(key, "unknown configuration key"))?;
        self.values.insert(k, value.to_string());
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(registry_key(key).unwrap_or_else(|| panic!("unregistered key {key}")))
            .expect("registry keys are always populated")
    }

    /// Root-resolved path; the key must be non-empty.
    pub fn path(&self, key: &str) -> PathBuf {
        let v = self.get(key);
        assert!(!v.is_empty(), "{key} has no path");
        self.resolve(v)
    }

    /// Root-resolved path for keys whose empty value means "off".
    pub fn opt_path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        if v.is_empty() {
            None
        } else {
            Some(self.resolve(v))
        }
    }

    pub fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.get(key)
            .parse()
            .map_err(|_| CliError::config(key, format!("not a count: {:?}", self.get(key))))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.get(key)
            .parse()
            .map_err(|_| CliError::config(key, format!("not a number: {:?}", self.get(key))))
    }

    /// Empty means unset; anything else must parse.
    pub fn opt_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        let v = self.get(key);
        if v.is_empty() {
            return Ok(None);
        }
        v.parse()
            .map(Some)
            .map_err(|_| CliError::config(key, format!("not a seed: {v:?}")))
    }

    pub fn scale(&self) -> Result<SigmaScale, CliError> {
        match self.get("lsi.scale") {
            "none" => Ok(SigmaScale::None),
            "sigma" => Ok(SigmaScale::Sigma),
            v => Err(CliError::config("lsi.scale", format!("expected none|sigma, got {v:?}"))),
        }
    }

    pub fn strategy(&self) -> Result<MiningStrategy, CliError> {
        match self.get("mining.strategy") {
            "lsi" => Ok(MiningStrategy::Lsi),
            "collection" => Ok(MiningStrategy::Collection),
            v => Err(CliError::config(
                "mining.strategy",
                format!("expected lsi|collection, got {v:?}"),
            )),
        }
    }

    pub fn split(&self) -> Result<(f64, f64, f64), CliError> {
        let v = self.get("train.split");
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::config("train.split", format!("expected three fractions: {v:?}")));
        }
        let mut f = [0.0f64; 3];
        for (slot, p) in f.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| CliError::config("train.split", format!("not a fraction: {p:?}")))?;
        }
        Ok((f[0], f[1], f[2]))
    }

    pub fn cutoffs(&self) -> Result<Vec<usize>, CliError> {
        let v = self.get("eval.cutoffs");
        let mut out = Vec::new();
        for p in v.split(',').map(str::trim) {
            let k: usize = p
                .parse()
                .map_err(|_| CliError::config("eval.cutoffs", format!("not a cut-off: {p:?}")))?;
            if k == 0 {
                return Err(CliError::config("eval.cutoffs", "cut-offs start at 1"));
            }
            if let Some(&last) = out.last() {
                if k <= last {
                    return Err(CliError::config("eval.cutoffs", "cut-offs must ascend"));
                }
            }
            out.push(k);
        }
        if out.is_empty() {
            return Err(CliError::config("eval.cutoffs", "at least one cut-off required"));
        }
        Ok(out)
    }

    /// Nine block weights in declared block order, or `None` for built-ins.
    pub fn baseline_weights(&self) -> Result<Option<[f64; 9]>, CliError> {
        let v = self.get("baseline.weights");
        if v.is_empty() {
            return Ok(None);
        }
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        if parts.len() != 9 {
            return Err(CliError::config(
                "baseline.weights",
                format!("expected nine weights, got {}", parts.len()),
            ));
        }
        let mut w = [0.0f64; 9];
        for (slot, p) in w.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| CliError::config("baseline.weights", format!("not a weight: {p:?}")))?;
            if !slot.is_finite() || *slot < 0.0 {
                return Err(CliError::config("baseline.weights", "weights are non-negative"));
            }
        }
        Ok(Some(w))
    }

    pub fn mining(&self) -> Result<MiningConfig, CliError> {
        Ok(MiningConfig {
            strategy: self.strategy()?,
            pos_threshold: self.f64("mining.pos_threshold")?,
            neg_threshold: self.f64("mining.neg_threshold")?,
        })
    }

    /// Assemble the core training configuration around an explicit seed.
    pub fn train(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let margin = self.f64("train.margin")? as f32;
        Ok(TrainConfig {
            margin,
            batch_size: self.usize("mining.batch_size")?,
            epochs: self.usize("train.epochs")?,
            adam: AdamConfig {
                lr: self.f64("train.lr")?,
                beta1: self.f64("train.beta1")?,
                beta2: self.f64("train.beta2")?,
                epsilon: self.f64("train.epsilon")?,
            },
            seed,
            mining: self.mining()?,
            fractions: self.split()?,
            checkpoint_every: self.usize("train.checkpoint_every")?,
        })
    }
}

//! Learning audio embeddings from unstructured multilingual metadata text.
//!
//! The pipeline: metadata records are normalized into token lists
//! ([`textprep`]), weighted into a TF-IDF matrix and factorized by truncated
//! SVD into per-record topic vectors ([`lsi`]). Cosine relatedness over those
//! vectors (or plain collection membership) drives online triplet selection
//! ([`mining`]) while a convolutional recurrent encoder ([`net`]) maps
//! log-Mel spectrograms ([`dsp`]) into a 256-dimensional space. [`trainer`]
//! wires the loop together and [`eval`] measures retrieval precision by
//! collection and by content term. [`baseline`] provides the handcrafted
//! 1677-dimensional feature fusion the learned embedding is compared against.
//!
//! This crate is `no_std + alloc`: everything here is pure computation over
//! in-memory buffers. File formats, WAV decoding and the CLI live in the
//! companion `xmodal` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baseline;
pub mod corpus;
pub mod dsp;
pub mod eval;
pub mod lsi;
pub mod mat;
pub mod mining;
pub mod net;
pub mod rng;
pub mod textprep;
pub mod trainer;

pub use corpus::{Corpus, Record};
pub use dsp::{AudioClip, MelSpectrogram, SegmentSpec};
pub use eval::{EmbeddingStore, EvalReport, TermQuerySet};
pub use lsi::{LsiModel, TermIndex, TfidfMatrix};
pub use mining::{MiningConfig, MiningStrategy, TripletBatch};
pub use net::{Crnn, CrnnConfig};
pub use textprep::{StopwordTable, TokenList};
pub use trainer::{TrainConfig, TrainLog, TrainOutcome};

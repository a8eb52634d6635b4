//! `xmodal` — cross-modal audio retrieval pipeline.
//!
//! Subcommands run one stage each over a workspace root; every stage prints
//! a line-oriented `key=value` summary and fails with exit code 2 (config),
//! 3 (missing upstream artifact) or 4 (bad data).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xmodal::config::RunConfig;
use xmodal::pipeline;
use xmodal::CliError;

#[derive(Parser)]
#[command(name = "xmodal", version, about = "Cross-modal audio retrieval pipeline")]
struct Cli {
    /// Workspace root that relative configured paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    root: PathBuf,

    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration value (repeatable).
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Worker threads for the parallel stages; 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Read a metadata file into the corpus store.
    Ingest {
        /// Metadata file, one record per row.
        input: PathBuf,
        /// Input format (jsonl or csv); inferred from the extension if omitted.
        #[arg(long)]
        format: Option<String>,
    },
    /// Normalize record metadata into the token cache.
    Textprep,
    /// Fit the topic model over the token cache.
    LsiFit {
        /// Factorization seed; overrides lsi.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode each record's audio and cache its log-mel spectrogram.
    DspExtract,
    /// Extract the handcrafted feature store from each record's audio.
    BaselineExtract,
    /// Train the audio encoder on mined triplets.
    Train {
        /// Run seed; required here or as train.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Embed every record with a trained checkpoint.
    Embed {
        /// Checkpoint to load; defaults to the final checkpoint of the last run.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score embedding stores on the retrieval criteria.
    Evaluate {
        /// Store file to evaluate (repeatable); defaults to every store.
        #[arg(long = "store", value_name = "FILE")]
        stores: Vec<PathBuf>,
        /// Write into this directory under fixed names instead of timestamped reports.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one per-term detail file per store.
        #[arg(long)]
        per_term: bool,
    },
    /// Render the comparison report over every embedding store.
    Report {
        /// Write into this directory under fixed names instead of timestamped reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the strongest terms of one topic.
    Topics {
        /// Topic index, 0-based.
        #[arg(long, default_value_t = 0)]
        topic: usize,
        /// Number of terms to print.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Generate the synthetic audio-plus-metadata fixture.
    #[command(hide = true)]
    MakeSynthetic {
        #[arg(long, default_value_t = 90)]
        tracks: usize,
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Give the first two clusters the same audio texture and word pool.
        #[arg(long)]
        shared_texture: bool,
        /// Output directory; defaults to the workspace root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_set(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    args.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::config("--set", format!("expected key=value, got {s:?}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.workers == 0 {
        return Err(CliError::config("--workers", "at least one worker is required"));
    }
    if let Cmd::MakeSynthetic { tracks, clusters, seed, shared_texture, out } = &cli.cmd {
        let dest = out.clone().unwrap_or_else(|| cli.root.clone());
        return pipeline::make_synthetic(&dest, *tracks, *clusters, *seed, *shared_texture);
    }
    let overrides = parse_set(&cli.set)?;
    let cfg = RunConfig::load(&cli.root, cli.config.as_deref(), &overrides)?;
    match cli.cmd {
        Cmd::Ingest { input, format } => pipeline::ingest(&cfg, &input, format.as_deref()),
        Cmd::Textprep => pipeline::textprep_run(&cfg),
        Cmd::LsiFit { seed } => pipeline::lsi_fit(&cfg, seed),
        Cmd::DspExtract => pipeline::dsp_extract(&cfg, cli.workers),
        Cmd::BaselineExtract => pipeline::baseline_extract(&cfg, cli.workers),
        Cmd::Train { seed } => pipeline::train_run(&cfg, seed),
        Cmd::Embed { checkpoint } => pipeline::embed_run(&cfg, checkpoint),
        Cmd::Evaluate { stores, out, per_term } => {
            pipeline::evaluate_run(&cfg, &stores, out.as_deref(), per_term)
        }
        Cmd::Report { out } => pipeline::report_run(&cfg, out.as_deref()),
        Cmd::Topics { topic, k } => pipeline::topics_run(&cfg, topic, k),
        Cmd::MakeSynthetic { .. } => unreachable!("handled before config load"),
    }
}

fn main() -> ExitCode {
    // die quietly when stdout closes early (`xmodal ... | head`) instead of
    // panicking mid-print
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `mmreid`: corruption, augmentation preview, protocol files and
//! evaluation for multimodal person re-identification datasets.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 I/O error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use mmreid_core::augmentation::Preset;
use mmreid_core::corruption::{CorruptionMode, SeverityRule};
use mmreid_core::metrics::Metric;
use mmreid_core::protocol::DatasetKind;

/// Error in the command line or configuration (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "mmreid", version, about = "Visible-infrared ReID corruption, augmentation and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Dataset kind, overriding the manifest header.
    #[arg(long)]
    dataset: Option<DatasetKind>,
    /// Directory the manifest paths are relative to.
    #[arg(long)]
    root: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "MMREID_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a corrupted copy of the dataset with a replay log.
    Corrupt {
        #[command(flatten)]
        common: Common,
        /// clean, c (visible only) or c-star (both modalities).
        #[arg(long)]
        mode: Option<CorruptionMode>,
        /// random or a level 1..5.
        #[arg(long)]
        severity: Option<SeverityRule>,
    },
    /// Write before/after grids and a rect log for an augmentation preset.
    AugmentPreview {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        preset: Option<Preset>,
        /// Number of pairs to preview.
        #[arg(long, short = 'n')]
        samples: Option<usize>,
        #[arg(long)]
        masking_probability: Option<f64>,
        /// Keep only the deterministic steps of the preset.
        #[arg(long)]
        disable_random: bool,
    },
    /// Split identities into train/test sets and training folds.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Pair visible and infrared images, one file per trial.
    Pair {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Split file from `split`; pairs only the identities of `--set`.
        #[arg(long)]
        split: Option<PathBuf>,
        /// train, test or all.
        #[arg(long)]
        set: Option<String>,
    },
    /// Leave-one-out evaluation of pair embeddings, one file per trial.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Embedding files (or directories of them), one per trial.
        #[arg(long, num_args = 1..)]
        embeddings: Vec<PathBuf>,
        /// Pairing files (or a directory) the embeddings were made from.
        #[arg(long, num_args = 1..)]
        pairings: Vec<PathBuf>,
        #[arg(long)]
        metric: Option<Metric>,
        /// L2-normalize embeddings before matching.
        #[arg(long)]
        normalize: bool,
    },
    /// Cochran's Q over rank-1 outcomes of two or more evaluations.
    Compare {
        #[command(flatten)]
        common: Common,
        /// `outcomes.tsv` files written by `evaluate`, one per model.
        #[arg(required = true, num_args = 2..)]
        outcomes: Vec<PathBuf>,
    },
}

fn base_config(name: &str, common: &Common) -> anyhow::Result<RunConfig> {
    let mut c = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    c.command = name.to_string();
    if let Some(v) = &common.manifest {
        c.manifest = Some(v.clone());
    }
    if let Some(v) = common.dataset {
        c.dataset = Some(v);
    }
    if let Some(v) = &common.root {
        c.root = Some(v.clone());
    }
    if let Some(v) = common.seed {
        c.seed = v;
    }
    if let Some(v) = &common.out {
        c.out = v.clone();
    }
    if let Some(v) = common.workers {
        c.workers = v.max(1);
    }
    Ok(c)
}

fn resolve(command: Command) -> anyhow::Result<RunConfig> {
    Ok(match command {
        Command::Corrupt { common, mode, severity } => {
            let mut c = base_config("corrupt", &common)?;
            if let Some(m) = mode {
                c.corruption.mode = m;
            }
            if let Some(s) = severity {
                c.corruption.severity = s.to_string();
            }
            c
        }
        Command::AugmentPreview {
            common,
            preset,
            samples,
            masking_probability,
            disable_random,
        } => {
            let mut c = base_config("augment-preview", &common)?;
            if let Some(p) = preset {
                c.augment.preset = p.name();
            }
            if let Some(n) = samples {
                c.augment.samples = n;
            }
            if masking_probability.is_some() {
                c.augment.masking_probability = masking_probability;
            }
            c.augment.disable_random |= disable_random;
            c
        }
        Command::Split { common, folds } => {
            let mut c = base_config("split", &common)?;
            if let Some(k) = folds {
                c.protocol.folds = k;
            }
            c
        }
        Command::Pair {
            common,
            trials,
            split,
            set,
        } => {
            let mut c = base_config("pair", &common)?;
            if trials.is_some() {
                c.protocol.trials = trials;
            }
            if split.is_some() {
                c.protocol.split = split;
            }
            if let Some(s) = set {
                c.protocol.set = s;
            }
            c
        }
        Command::Evaluate {
            common,
            embeddings,
            pairings,
            metric,
            normalize,
        } => {
            let mut c = base_config("evaluate", &common)?;
            if !embeddings.is_empty() {
                c.evaluate.embeddings = embeddings;
            }
            if !pairings.is_empty() {
                c.evaluate.pairings = pairings;
            }
            if let Some(m) = metric {
                c.evaluate.metric = m;
            }
            c.evaluate.normalize |= normalize;
            c
        }
        Command::Compare { common, outcomes } => {
            let mut c = base_config("compare", &common)?;
            c.evaluate.outcomes = outcomes;
            c
        }
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use mmreid_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. } => 3,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match resolve(cli.command).and_then(|c| commands::run(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

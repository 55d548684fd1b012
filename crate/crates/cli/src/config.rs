//! Run configuration: loaded from `--config`, overridden by flags, and
//! written back into the output directory as `run_config.toml`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use mmreid_core::corruption::CorruptionMode;
use mmreid_core::metrics::Metric;
use mmreid_core::protocol::DatasetKind;

pub const SNAPSHOT_NAME: &str = "run_config.toml";
pub const DEFAULT_OUT: &str = "mmreid-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub dataset: Option<DatasetKind>,
    pub manifest: Option<PathBuf>,
    /// Directory the manifest paths are relative to; defaults to the
    /// manifest's directory.
    pub root: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub corruption: CorruptionSection,
    pub augment: AugmentSection,
    pub protocol: ProtocolSection,
    pub evaluate: EvaluateSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSection {
    pub mode: CorruptionMode,
    /// `random` or a level 1..5.
    pub severity: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub preset: String,
    pub masking_probability: Option<f64>,
    pub disable_random: bool,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub folds: usize,
    /// Number of pairing trials; unset means 30 for SYSU and 1 otherwise.
    pub trials: Option<usize>,
    /// Split file restricting pairing to one identity set.
    pub split: Option<PathBuf>,
    /// `train`, `test` or `all`.
    pub set: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub metric: Metric,
    pub normalize: bool,
    pub embeddings: Vec<PathBuf>,
    pub pairings: Vec<PathBuf>,
    pub outcomes: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            dataset: None,
            manifest: None,
            root: None,
            seed: 0,
            out: PathBuf::from(DEFAULT_OUT),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            corruption: CorruptionSection::default(),
            augment: AugmentSection::default(),
            protocol: ProtocolSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

impl Default for CorruptionSection {
    fn default() -> Self {
        Self {
            mode: CorruptionMode::Both,
            severity: "random".into(),
        }
    }
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self {
            preset: "ml-mda".into(),
            masking_probability: None,
            disable_random: false,
            samples: 4,
        }
    }
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            folds: 5,
            trials: None,
            split: None,
            set: "test".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| crate::UsageError(format!("config {}: {e}", path.display())).into())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config always serializes")
    }

    /// Writes the snapshot into the output directory.
    pub fn write_snapshot(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(SNAPSHOT_NAME);
        std::fs::write(&path, self.to_toml()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn input_root(&self) -> PathBuf {
        match (&self.root, &self.manifest) {
            (Some(root), _) => root.clone(),
            (None, Some(m)) => m.parent().map(Path::to_path_buf).unwrap_or_default(),
            (None, None) => PathBuf::new(),
        }
    }
}

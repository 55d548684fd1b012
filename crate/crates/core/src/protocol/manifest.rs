use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ModalityTag;

/// First field of the manifest header line.
pub const MANIFEST_TAG: &str = "#manifest";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Sysu,
    Regdb,
    Tworld,
    Custom,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Sysu => "sysu",
            DatasetKind::Regdb => "regdb",
            DatasetKind::Tworld => "tworld",
            DatasetKind::Custom => "custom",
        }
    }

    /// Published (train, test) identity counts; `None` for custom data.
    pub fn split_sizes(self) -> Option<(usize, usize)> {
        match self {
            DatasetKind::Sysu => Some((395, 96)),
            DatasetKind::Regdb => Some((206, 206)),
            DatasetKind::Tworld => Some((325, 84)),
            DatasetKind::Custom => None,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sysu" | "sysumm01" => Ok(DatasetKind::Sysu),
            "regdb" => Ok(DatasetKind::Regdb),
            "tworld" | "thermalworld" => Ok(DatasetKind::Tworld),
            "custom" => Ok(DatasetKind::Custom),
            other => Err(Error::invalid(format!("unknown dataset kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub identity: u64,
    pub camera: String,
    pub modality: ModalityTag,
    /// Relative to the dataset root.
    pub path: PathBuf,
}

/// Validated list of dataset images.
///
/// Text form: a header line `#manifest<TAB>dataset=<kind><TAB>paired=<bool>`,
/// then one record per line with the tab-separated fields `image_id`,
/// `identity`, `camera`, `modality`, `path`. Blank lines and lines starting
/// with `#` are ignored after the header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub dataset_kind: DatasetKind,
    /// True when visible and infrared images are co-registered: the n-th
    /// visible and n-th infrared image of an identity show the same moment.
    pub paired_cameras: bool,
    pub records: Vec<ImageRecord>,
}

impl DatasetManifest {
    pub fn new(dataset_kind: DatasetKind, paired_cameras: bool, records: Vec<ImageRecord>) -> Result<Self> {
        let m = Self {
            dataset_kind,
            paired_cameras,
            records,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.image_id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate image_id `{}`", r.image_id)));
            }
        }
        for (identity, [v, i]) in self.modality_counts() {
            if v == 0 || i == 0 {
                let missing = if v == 0 { ModalityTag::Visible } else { ModalityTag::Infrared };
                return Err(Error::InvalidDataset(format!("identity {identity} has no {missing} images")));
            }
        }
        Ok(())
    }

    fn modality_counts(&self) -> BTreeMap<u64, [usize; 2]> {
        let mut counts: BTreeMap<u64, [usize; 2]> = BTreeMap::new();
        for r in &self.records {
            counts.entry(r.identity).or_default()[modality_slot(r.modality)] += 1;
        }
        counts
    }

    /// Sorted distinct identities.
    pub fn identities(&self) -> Vec<u64> {
        self.modality_counts().into_keys().collect()
    }

    /// Record indices per identity and modality, in manifest order.
    pub fn by_identity(&self) -> BTreeMap<u64, [Vec<usize>; 2]> {
        let mut map: BTreeMap<u64, [Vec<usize>; 2]> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            map.entry(r.identity).or_default()[modality_slot(r.modality)].push(i);
        }
        map
    }

    pub fn record(&self, image_id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.image_id == image_id)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty manifest".into()))?;
        let mut fields = header.trim_end_matches('\r').split('\t');
        if fields.next() != Some(MANIFEST_TAG) {
            return Err(err(1, format!("header must start with `{MANIFEST_TAG}`")));
        }
        let mut kind = None;
        let mut paired = None;
        for f in fields {
            let (key, value) = f
                .split_once('=')
                .ok_or_else(|| err(1, format!("header field `{f}` is not key=value")))?;
            match key {
                "dataset" => kind = Some(value.parse::<DatasetKind>().map_err(|e| err(1, e.to_string()))?),
                "paired" => {
                    paired = Some(value.parse::<bool>().map_err(|_| err(1, format!("paired=`{value}` is not a bool")))?)
                }
                other => return Err(err(1, format!("unknown header key `{other}`"))),
            }
        }
        let dataset_kind = kind.ok_or_else(|| err(1, "header lacks dataset=".into()))?;
        let paired_cameras =
            paired.unwrap_or(matches!(dataset_kind, DatasetKind::Regdb | DatasetKind::Tworld));
        let mut records = Vec::new();
        for (idx, raw) in lines {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(err(idx + 1, format!("expected 5 tab-separated fields, found {}", cols.len())));
            }
            let identity = cols[1]
                .parse::<u64>()
                .map_err(|_| err(idx + 1, format!("identity `{}` is not a non-negative integer", cols[1])))?;
            let modality = cols[3].parse::<ModalityTag>().map_err(|e| err(idx + 1, e.to_string()))?;
            if cols[0].is_empty() || cols[4].is_empty() {
                return Err(err(idx + 1, "empty image_id or path".into()));
            }
            records.push(ImageRecord {
                image_id: cols[0].to_string(),
                identity,
                camera: cols[2].to_string(),
                modality,
                path: PathBuf::from(cols[4]),
            });
        }
        Self::new(dataset_kind, paired_cameras, records)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MANIFEST_TAG}\tdataset={}\tpaired={}\n",
            self.dataset_kind, self.paired_cameras
        );
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.image_id,
                r.identity,
                r.camera,
                r.modality,
                r.path.display()
            ));
        }
        out
    }
}

pub(crate) fn modality_slot(m: ModalityTag) -> usize {
    match m {
        ModalityTag::Visible => 0,
        ModalityTag::Infrared => 1,
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetManifest::parse(&text, &path.display().to_string())
}

use std::collections::HashSet;

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_FOLDS: usize = 5;

/// Disjoint train/test identity sets, optionally with validation folds
/// partitioning the training identities. All lists are sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: Vec<u64>,
    pub test: Vec<u64>,
    pub folds: Vec<Vec<u64>>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let train: HashSet<u64> = self.train.iter().copied().collect();
        if train.len() != self.train.len() || self.test.iter().collect::<HashSet<_>>().len() != self.test.len() {
            return Err(Error::InvalidDataset("split lists contain duplicates".into()));
        }
        if let Some(id) = self.test.iter().find(|id| train.contains(id)) {
            return Err(Error::InvalidDataset(format!("identity {id} is in both train and test")));
        }
        if !self.folds.is_empty() {
            let mut union: Vec<u64> = self.folds.iter().flatten().copied().collect();
            union.sort_unstable();
            if union != self.train {
                return Err(Error::InvalidDataset("folds do not partition the training identities".into()));
            }
        }
        Ok(())
    }

    /// Training identities outside fold `k`, and fold `k` itself.
    pub fn fold_split(&self, k: usize) -> Result<(Vec<u64>, Vec<u64>)> {
        let fold = self
            .folds
            .get(k)
            .ok_or_else(|| Error::invalid(format!("fold {k} of {}", self.folds.len())))?;
        let held: HashSet<u64> = fold.iter().copied().collect();
        let rest = self.train.iter().copied().filter(|id| !held.contains(id)).collect();
        Ok((rest, fold.clone()))
    }

    /// Rows `identity<TAB>set<TAB>fold`, `set` being `train` or `test` and
    /// `fold` the fold index or `-`.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(u64, &str, String)> = Vec::new();
        for &id in &self.train {
            let fold = self
                .folds
                .iter()
                .position(|f| f.contains(&id))
                .map_or("-".to_string(), |k| k.to_string());
            rows.push((id, "train", fold));
        }
        rows.extend(self.test.iter().map(|&id| (id, "test", "-".to_string())));
        let mut out = String::from("identity\tset\tfold\n");
        for (id, set, fold) in rows {
            out.push_str(&format!("{id}\t{set}\t{fold}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.into(),
            line,
            message,
        };
        let mut spec = SplitSpec::default();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [id, set, fold] = cols[..] else {
                return Err(err(i + 1, "expected 3 fields".into()));
            };
            let id: u64 = id.parse().map_err(|_| err(i + 1, format!("bad identity `{id}`")))?;
            match (set, fold) {
                ("test", _) => spec.test.push(id),
                ("train", "-") => spec.train.push(id),
                ("train", k) => {
                    let k: usize = k.parse().map_err(|_| err(i + 1, format!("bad fold `{k}`")))?;
                    if spec.folds.len() <= k {
                        spec.folds.resize(k + 1, Vec::new());
                    }
                    spec.folds[k].push(id);
                    spec.train.push(id);
                }
                _ => return Err(err(i + 1, format!("unknown set `{set}`"))),
            }
        }
        spec.train.sort_unstable();
        spec.test.sort_unstable();
        spec.folds.iter_mut().for_each(|f| f.sort_unstable());
        spec.validate()?;
        Ok(spec)
    }
}

/// Seeded uniform train/test split with the published identity counts.
///
/// Custom datasets keep the SYSU train ratio, `round(n * 395 / 491)`.
/// Datasets with more identities than a published split needs leave the
/// surplus out of both sets.
pub fn split_identities(manifest: &DatasetManifest, seed: u64) -> Result<SplitSpec> {
    let mut ids = manifest.identities();
    let (n_train, n_test) = match manifest.dataset_kind.split_sizes() {
        Some(sizes) => sizes,
        None => {
            let n_train = ((ids.len() * 395) as f64 / 491.0).round() as usize;
            (n_train, ids.len() - n_train)
        }
    };
    if ids.len() < n_train + n_test || n_train == 0 || n_test == 0 {
        return Err(Error::InvalidDataset(format!(
            "{} identities cannot form a {n_train}/{n_test} split for {}",
            ids.len(),
            manifest.dataset_kind
        )));
    }
    Rng::new(seed).shuffle(&mut ids);
    let mut train = ids[..n_train].to_vec();
    let mut test = ids[n_train..n_train + n_test].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitSpec {
        train,
        test,
        folds: Vec::new(),
    })
}

/// Partitions the training identities into `k` seeded folds. Folds differ
/// in size by at most one, larger folds first.
pub fn make_folds(split: &SplitSpec, k: usize, seed: u64) -> Result<SplitSpec> {
    if k < 2 || k > split.train.len() {
        return Err(Error::invalid(format!(
            "cannot make {k} folds from {} training identities",
            split.train.len()
        )));
    }
    let mut ids = split.train.clone();
    Rng::new(seed).shuffle(&mut ids);
    let (base, extra) = (ids.len() / k, ids.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = ids[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(SplitSpec {
        folds,
        ..split.clone()
    })
}

use std::collections::HashSet;

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

/// Number of repeated pairings averaged for unpaired datasets.
pub const DEFAULT_TRIALS: usize = 30;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairEntry {
    pub identity: u64,
    pub visible_id: String,
    pub infrared_id: String,
}

/// One visible/infrared pairing of a set of identities. A pair's index in
/// `pairs` is its pair id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairingResult {
    pub trial_index: usize,
    pub pairs: Vec<PairEntry>,
}

impl PairingResult {
    /// Checks that no image id is used twice.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for p in &self.pairs {
            for id in [&p.visible_id, &p.infrared_id] {
                if !seen.insert(id.as_str()) {
                    return Err(Error::InvalidDataset(format!("image `{id}` appears in two pairs")));
                }
            }
        }
        Ok(())
    }
}

/// Pairs every identity in `identities` as fully as the no-reuse rule allows:
/// `min(n_visible, n_infrared)` pairs per identity.
///
/// Co-registered datasets zip the two modalities in manifest order and ignore
/// the seed. Otherwise both image lists are shuffled and zipped, which gives
/// a uniformly random maximal matching. Pairs are grouped by ascending
/// identity.
pub fn pair_images(manifest: &DatasetManifest, identities: &[u64], seed: u64) -> Result<PairingResult> {
    let wanted: HashSet<u64> = identities.iter().copied().collect();
    let by_id = manifest.by_identity();
    if let Some(missing) = wanted.iter().find(|id| !by_id.contains_key(id)) {
        return Err(Error::InvalidDataset(format!("identity {missing} is not in the manifest")));
    }
    let mut rng = Rng::new(seed);
    let mut pairs = Vec::new();
    for (&identity, [vis, ir]) in &by_id {
        if !wanted.contains(&identity) {
            continue;
        }
        let (mut vis, mut ir) = (vis.clone(), ir.clone());
        if !manifest.paired_cameras {
            rng.shuffle(&mut vis);
            rng.shuffle(&mut ir);
        }
        pairs.extend(vis.iter().zip(&ir).map(|(&v, &i)| PairEntry {
            identity,
            visible_id: manifest.records[v].image_id.clone(),
            infrared_id: manifest.records[i].image_id.clone(),
        }));
    }
    Ok(PairingResult { trial_index: 0, pairs })
}

/// `trials` pairings, trial `t` seeded with `derive_seed(master_seed, t)`.
/// Co-registered datasets yield the same pair list every trial.
pub fn repeated_pairings(
    manifest: &DatasetManifest,
    identities: &[u64],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<PairingResult>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    (0..trials)
        .map(|t| {
            let mut p = pair_images(manifest, identities, derive_seed(master_seed, t as u64))?;
            p.trial_index = t;
            Ok(p)
        })
        .collect()
}

/// Each pair in turn is the probe; all others form the gallery.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LooqTrial {
    pub probe: usize,
    pub gallery: Vec<usize>,
}

pub fn looq_trials(pairing: &PairingResult) -> Result<Vec<LooqTrial>> {
    let n = pairing.pairs.len();
    if n < 2 {
        return Err(Error::invalid(format!("leave-one-out needs at least 2 pairs, got {n}")));
    }
    Ok((0..n)
        .map(|probe| LooqTrial {
            probe,
            gallery: (0..n).filter(|&g| g != probe).collect(),
        })
        .collect())
}

const PAIRING_HEADER: &str = "trial\tpair\tidentity\tvisible_id\tinfrared_id";

pub fn format_pairings(pairings: &[PairingResult]) -> String {
    let mut out = format!("{PAIRING_HEADER}\n");
    for p in pairings {
        for (i, e) in p.pairs.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{i}\t{}\t{}\t{}\n",
                p.trial_index, e.identity, e.visible_id, e.infrared_id
            ));
        }
    }
    out
}

/// Inverse of [`format_pairings`]; rows must be grouped by trial with pair
/// indices counting up from 0.
pub fn parse_pairings(text: &str, source: &str) -> Result<Vec<PairingResult>> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.into(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == PAIRING_HEADER => {}
        _ => return Err(err(1, format!("expected header `{PAIRING_HEADER}`"))),
    }
    let mut out: Vec<PairingResult> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        let [trial, pair, identity, v, ir] = cols[..] else {
            return Err(err(i + 1, "expected 5 fields".into()));
        };
        let num = |s: &str, what: &str| s.parse::<u64>().map_err(|_| err(i + 1, format!("bad {what} `{s}`")));
        let trial = num(trial, "trial")? as usize;
        let pair = num(pair, "pair")? as usize;
        let identity = num(identity, "identity")?;
        if out.last().is_none_or(|p| p.trial_index != trial) {
            out.push(PairingResult {
                trial_index: trial,
                pairs: Vec::new(),
            });
        }
        let current = out.last_mut().expect("pushed above");
        if pair != current.pairs.len() {
            return Err(err(i + 1, format!("pair index {pair} out of sequence")));
        }
        current.pairs.push(PairEntry {
            identity,
            visible_id: v.into(),
            infrared_id: ir.into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::ModalityTag;
    use crate::protocol::{DatasetKind, ImageRecord};

    fn manifest(kind: DatasetKind, paired: bool, counts: &[(u64, usize, usize)]) -> DatasetManifest {
        let mut records = Vec::new();
        for &(id, nv, ni) in counts {
            for (m, n) in [(ModalityTag::Visible, nv), (ModalityTag::Infrared, ni)] {
                for k in 0..n {
                    records.push(ImageRecord {
                        image_id: format!("{id}-{m}-{k}"),
                        identity: id,
                        camera: "c".into(),
                        modality: m,
                        path: format!("{id}/{m}/{k}.png").into(),
                    });
                }
            }
        }
        DatasetManifest::new(kind, paired, records).unwrap()
    }

    #[test]
    fn ten_by_six_gives_six_pairs() {
        let m = manifest(DatasetKind::Sysu, false, &[(4, 10, 6)]);
        let p = pair_images(&m, &[4], 1).unwrap();
        assert_eq!(p.pairs.len(), 6);
        p.validate().unwrap();
    }

    #[test]
    fn co_registered_follows_file_order() {
        let m = manifest(DatasetKind::Regdb, true, &[(1, 10, 10), (2, 10, 10)]);
        let a = pair_images(&m, &[1, 2], 1).unwrap();
        assert_eq!(a, pair_images(&m, &[1, 2], 99).unwrap());
        for e in &a.pairs {
            assert_eq!(e.visible_id.replace("visible", "infrared"), e.infrared_id);
        }
    }

    #[test]
    fn unpaired_seeds_differ() {
        let m = manifest(DatasetKind::Sysu, false, &[(1, 8, 8), (2, 5, 9)]);
        let a = pair_images(&m, &[1, 2], 1).unwrap();
        let b = pair_images(&m, &[1, 2], 2).unwrap();
        assert_ne!(a, b);
        a.validate().unwrap();
        b.validate().unwrap();
        assert_eq!(a.pairs.len(), 13);
    }

    #[test]
    fn looq_positives() {
        let m = manifest(DatasetKind::Sysu, false, &[(1, 2, 2), (2, 2, 2), (3, 2, 2)]);
        let p = pair_images(&m, &[1, 2, 3], 0).unwrap();
        let trials = looq_trials(&p).unwrap();
        assert_eq!(trials.len(), 6);
        for t in &trials {
            assert_eq!(t.gallery.len(), 5);
            let positives = t
                .gallery
                .iter()
                .filter(|&&g| p.pairs[g].identity == p.pairs[t.probe].identity)
                .count();
            assert_eq!(positives, 1);
        }
        assert!(looq_trials(&PairingResult { trial_index: 0, pairs: p.pairs[..1].to_vec() }).is_err());
    }

    #[test]
    fn repeated_trials() {
        let sysu = manifest(DatasetKind::Sysu, false, &[(1, 4, 3), (2, 3, 5)]);
        let r = repeated_pairings(&sysu, &[1, 2], 30, 7).unwrap();
        assert_eq!(r.len(), 30);
        assert!(r.iter().enumerate().all(|(t, p)| p.trial_index == t));
        assert_eq!(r, repeated_pairings(&sysu, &[1, 2], 30, 7).unwrap());
        let regdb = manifest(DatasetKind::Regdb, true, &[(1, 3, 3)]);
        let r = repeated_pairings(&regdb, &[1], 30, 7).unwrap();
        assert!(r.iter().all(|p| p.pairs == r[0].pairs));
    }

    #[test]
    fn tsv_round_trip() {
        let m = manifest(DatasetKind::Sysu, false, &[(1, 4, 3), (2, 3, 5)]);
        let r = repeated_pairings(&m, &[1, 2], 3, 7).unwrap();
        assert_eq!(parse_pairings(&format_pairings(&r), "p").unwrap(), r);
    }
}

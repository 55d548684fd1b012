use std::collections::{BTreeMap, HashSet};

use super::manifest::{modality_slot, DatasetManifest};
use super::pairing::PairingResult;
use crate::error::{Error, Result};
use crate::imaging::ModalityTag;
use crate::rng::Rng;

/// One training sample of a P×K batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PkItem {
    pub identity: u64,
    pub visible_id: String,
    pub infrared_id: String,
}

#[derive(Clone, Debug)]
enum Units {
    /// Fixed pairs.
    Pairs(Vec<(String, String)>),
    /// Visible images; each draw takes a fresh random infrared partner.
    Hetero { visible: Vec<String>, infrared: Vec<String> },
}

impl Units {
    fn len(&self) -> usize {
        match self {
            Units::Pairs(p) => p.len(),
            Units::Hetero { visible, .. } => visible.len(),
        }
    }
}

/// Per-identity sampling units for P×K batches.
#[derive(Clone, Debug)]
pub struct PkSource {
    groups: Vec<(u64, Units)>,
}

impl PkSource {
    /// Fixed pairs of `pairing` restricted to `identities`.
    pub fn from_pairing(pairing: &PairingResult, identities: &[u64]) -> Self {
        let keep: HashSet<u64> = identities.iter().copied().collect();
        let mut groups: BTreeMap<u64, Vec<(String, String)>> = BTreeMap::new();
        for p in pairing.pairs.iter().filter(|p| keep.contains(&p.identity)) {
            groups
                .entry(p.identity)
                .or_default()
                .push((p.visible_id.clone(), p.infrared_id.clone()));
        }
        Self {
            groups: groups.into_iter().map(|(id, p)| (id, Units::Pairs(p))).collect(),
        }
    }

    /// Co-registered datasets sample their fixed pairs; other datasets
    /// sample a visible image and draw its infrared partner per draw.
    pub fn from_manifest(manifest: &DatasetManifest, identities: &[u64]) -> Result<Self> {
        if manifest.paired_cameras {
            let pairing = super::pair_images(manifest, identities, 0)?;
            return Ok(Self::from_pairing(&pairing, identities));
        }
        let keep: HashSet<u64> = identities.iter().copied().collect();
        let ids = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| manifest.records[i].image_id.clone()).collect() };
        let groups = manifest
            .by_identity()
            .into_iter()
            .filter(|(id, _)| keep.contains(id))
            .map(|(id, lists)| {
                let visible = ids(&lists[modality_slot(ModalityTag::Visible)]);
                let infrared = ids(&lists[modality_slot(ModalityTag::Infrared)]);
                (id, Units::Hetero { visible, infrared })
            })
            .collect();
        Ok(Self { groups })
    }

    pub fn identities(&self) -> Vec<u64> {
        self.groups.iter().map(|(id, _)| *id).collect()
    }
}

/// One epoch of P×K batches: identities are shuffled and cut into groups of
/// `p` (a short last group is dropped), then `k` units are drawn per
/// identity, without replacement when the identity has at least `k` units.
pub fn pk_batches(source: &PkSource, p: usize, k: usize, seed: u64) -> Result<Vec<Vec<PkItem>>> {
    if p == 0 || k == 0 {
        return Err(Error::invalid("p and k must be >= 1"));
    }
    let usable: Vec<&(u64, Units)> = source.groups.iter().filter(|(_, u)| u.len() > 0).collect();
    if usable.len() < p {
        return Err(Error::invalid(format!(
            "{} identities with samples, batch needs {p}",
            usable.len()
        )));
    }
    let mut rng = Rng::new(seed);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    rng.shuffle(&mut order);
    let mut batches = Vec::with_capacity(order.len() / p);
    for chunk in order.chunks_exact(p) {
        let mut batch = Vec::with_capacity(p * k);
        for &g in chunk {
            let (identity, units) = usable[g];
            let n = units.len();
            let picks = if n >= k {
                rng.sample_indices(n, k)
            } else {
                (0..k).map(|_| rng.index(n)).collect()
            };
            for u in picks {
                let (visible_id, infrared_id) = match units {
                    Units::Pairs(pairs) => pairs[u].clone(),
                    Units::Hetero { visible, infrared } => {
                        (visible[u].clone(), infrared[rng.index(infrared.len())].clone())
                    }
                };
                batch.push(PkItem {
                    identity: *identity,
                    visible_id,
                    infrared_id,
                });
            }
        }
        batches.push(batch);
    }
    Ok(batches)
}

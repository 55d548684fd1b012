use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    /// Ranked by `1 - cosine similarity`.
    Cosine,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }

    pub fn distance(self, a: &[f32], b: &[f32]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (&x, &y) in a.iter().zip(b) {
                    let (x, y) = (f64::from(x), f64::from(y));
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na.sqrt() * nb.sqrt())
                }
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "cosine" | "cos" => Ok(Metric::Cosine),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

/// Gallery ordered by ascending distance to the probe, ties by ascending
/// pair id.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub probe: u64,
    pub order: Vec<u64>,
    pub distances: Vec<f64>,
    pub positives: Vec<bool>,
}

impl Ranking {
    pub fn positive_count(&self) -> usize {
        self.positives.iter().filter(|&&p| p).count()
    }
}

fn l2_normalized(v: &[f32]) -> Vec<f32> {
    let norm = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|&x| (f64::from(x) / norm) as f32).collect()
    }
}

fn rank_vector(
    probe: &[f32],
    probe_identity: u64,
    table: &EmbeddingTable,
    gallery: &[usize],
    metric: Metric,
    normalize: bool,
) -> (Vec<u64>, Vec<f64>, Vec<bool>) {
    let normalized = normalize.then(|| l2_normalized(probe));
    let p = normalized.as_deref().unwrap_or(probe);
    let mut scored: Vec<(f64, u64, bool)> = gallery
        .iter()
        .map(|&g| {
            let d = if normalize {
                metric.distance(p, &l2_normalized(table.row(g)))
            } else {
                metric.distance(p, table.row(g))
            };
            (d, table.ids()[g], table.identity(g) == probe_identity)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    (
        scored.iter().map(|s| s.1).collect(),
        scored.iter().map(|s| s.0).collect(),
        scored.iter().map(|s| s.2).collect(),
    )
}

/// Ranks the table rows `gallery` against row `probe`.
pub fn rank_rows(table: &EmbeddingTable, probe: usize, gallery: &[usize], metric: Metric, normalize: bool) -> Ranking {
    let (order, distances, positives) =
        rank_vector(table.row(probe), table.identity(probe), table, gallery, metric, normalize);
    Ranking {
        probe: table.ids()[probe],
        order,
        distances,
        positives,
    }
}

/// Ranks every row of `gallery` against a free-standing probe vector.
pub fn rank_gallery(
    probe_id: u64,
    probe: &[f32],
    probe_identity: u64,
    gallery: &EmbeddingTable,
    metric: Metric,
    normalize: bool,
) -> Result<Ranking> {
    if probe.len() != gallery.dim() {
        return Err(Error::invalid(format!(
            "probe dim {} does not match gallery dim {}",
            probe.len(),
            gallery.dim()
        )));
    }
    let rows: Vec<usize> = (0..gallery.len()).collect();
    let (order, distances, positives) = rank_vector(probe, probe_identity, gallery, &rows, metric, normalize);
    Ok(Ranking {
        probe: probe_id,
        order,
        distances,
        positives,
    })
}

/// AP over a ranked positive mask; `None` when there are no positives.
pub fn average_precision_from_mask(positives: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, _) in positives.iter().enumerate().filter(|(_, &p)| p) {
        hits += 1;
        sum += hits as f64 / (k + 1) as f64;
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// `|P| / rank of the last positive`; `None` when there are no positives.
pub fn inp_from_mask(positives: &[bool]) -> Option<f64> {
    let last = positives.iter().rposition(|&p| p)?;
    let count = positives.iter().filter(|&&p| p).count();
    Some(count as f64 / (last + 1) as f64)
}

pub fn average_precision(r: &Ranking) -> Option<f64> {
    average_precision_from_mask(&r.positives)
}

pub fn inverse_negative_penalty(r: &Ranking) -> Option<f64> {
    inp_from_mask(&r.positives)
}

/// True when a positive is within the top `k` (`k >= 1`).
pub fn cmc_at(r: &Ranking, k: usize) -> bool {
    r.positives.iter().take(k).any(|&p| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(ranks: &[usize], n: usize) -> Vec<bool> {
        (1..=n).map(|k| ranks.contains(&k)).collect()
    }

    #[test]
    fn hand_values() {
        assert_eq!(average_precision_from_mask(&mask(&[1], 4)), Some(1.0));
        assert!((average_precision_from_mask(&mask(&[1, 3], 5)).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!((average_precision_from_mask(&mask(&[2, 4], 5)).unwrap() - 0.5).abs() < 1e-12);
        assert!((inp_from_mask(&mask(&[1, 3], 5)).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((inp_from_mask(&mask(&[10], 10)).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(inp_from_mask(&mask(&[1, 2, 3], 6)), Some(1.0));
        assert_eq!(average_precision_from_mask(&mask(&[], 3)), None);
        assert_eq!(inp_from_mask(&mask(&[], 3)), None);
    }

    #[test]
    fn ordering_and_ties() {
        let mut g = EmbeddingTable::new(1);
        g.push(10, 1, &[2.0]).unwrap();
        g.push(11, 2, &[1.0]).unwrap();
        g.push(12, 1, &[3.0]).unwrap();
        g.push(9, 1, &[-1.0]).unwrap();
        let r = rank_gallery(99, &[0.0], 1, &g, Metric::Euclidean, false).unwrap();
        // 9 and 11 tie at distance 1; the lower id wins.
        assert_eq!(r.order, vec![9, 11, 10, 12]);
        assert_eq!(r.positives, vec![true, false, true, true]);
        assert!(!cmc_at(&r, 0));
        assert!(cmc_at(&r, 1));
        assert!(rank_gallery(99, &[0.0, 1.0], 1, &g, Metric::Euclidean, false).is_err());
    }

    #[test]
    fn cosine_prefers_direction() {
        let mut g = EmbeddingTable::new(2);
        g.push(0, 1, &[10.0, 0.0]).unwrap();
        g.push(1, 2, &[0.1, 0.1]).unwrap();
        let r = rank_gallery(99, &[1.0, 0.0], 1, &g, Metric::Cosine, false).unwrap();
        assert_eq!(r.order, vec![0, 1]);
        assert!(r.distances[0].abs() < 1e-12);
        let e = rank_gallery(99, &[1.0, 0.0], 1, &g, Metric::Euclidean, false).unwrap();
        assert_eq!(e.order, vec![1, 0]);
        let n = rank_gallery(99, &[1.0, 0.0], 1, &g, Metric::Euclidean, true).unwrap();
        assert_eq!(n.order, vec![0, 1]);
    }
}

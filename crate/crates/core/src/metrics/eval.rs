use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTable;
use super::ranking::{average_precision, cmc_at, inverse_negative_penalty, rank_rows, Metric};
use super::stats::{cochran_q, BinaryOutcomeMatrix, CochranResult};
use crate::error::{Error, Result};
use crate::protocol::LooqTrial;

pub const CMC_RANKS: [usize; 3] = [1, 5, 10];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub metric: Metric,
    /// L2-normalize rows before matching.
    pub normalize: bool,
    /// Labels carried into the report.
    pub corruption_mode: String,
    pub policy: String,
}

/// Embeddings of one pairing trial and its leave-one-out queries.
#[derive(Clone, Copy, Debug)]
pub struct TrialInput<'a> {
    pub embeddings: &'a EmbeddingTable,
    pub looq: &'a [LooqTrial],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub map: f64,
    pub minp: f64,
    pub cmc: [f64; 3],
}

impl MetricSet {
    fn values(&self) -> [f64; 5] {
        [self.map, self.minp, self.cmc[0], self.cmc[1], self.cmc[2]]
    }

    fn from_values(v: [f64; 5]) -> Self {
        Self {
            map: v[0],
            minp: v[1],
            cmc: [v[2], v[3], v[4]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub metrics: MetricSet,
    /// Queries with at least one positive in their gallery.
    pub queries: usize,
    pub excluded: usize,
    /// Rank-1 outcome per probe, in probe order (`None` when excluded).
    pub rank1: Vec<Option<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub trials: Vec<TrialMetrics>,
    pub mean: MetricSet,
    /// Sample standard deviation over trials; 0 for a single trial.
    pub std: MetricSet,
    pub excluded_queries: usize,
    pub significance: Option<CochranResult>,
}

struct Query {
    ap: f64,
    inp: f64,
    cmc: [bool; 3],
}

fn evaluate_one(t: usize, input: &TrialInput<'_>, config: &EvalConfig) -> Result<TrialMetrics> {
    let table = input.embeddings;
    let row = |id: usize| table.row_of(id as u64).ok_or(Error::MissingEmbedding(id as u64));
    let resolved: Vec<(usize, Vec<usize>)> = input
        .looq
        .iter()
        .map(|q| Ok((row(q.probe)?, q.gallery.iter().map(|&g| row(g)).collect::<Result<Vec<_>>>()?)))
        .collect::<Result<_>>()?;
    let normalized;
    let table = if config.normalize {
        normalized = normalize_table(table)?;
        &normalized
    } else {
        table
    };
    let queries: Vec<Option<Query>> = resolved
        .par_iter()
        .map(|(probe, gallery)| {
            let r = rank_rows(table, *probe, gallery, config.metric, false);
            Some(Query {
                ap: average_precision(&r)?,
                inp: inverse_negative_penalty(&r)?,
                cmc: CMC_RANKS.map(|k| cmc_at(&r, k)),
            })
        })
        .collect();
    // Sequential sums keep the result independent of thread count.
    let mut sums = [0.0f64; 5];
    let mut counted = 0usize;
    for q in queries.iter().flatten() {
        counted += 1;
        let v = [
            q.ap,
            q.inp,
            f64::from(u8::from(q.cmc[0])),
            f64::from(u8::from(q.cmc[1])),
            f64::from(u8::from(q.cmc[2])),
        ];
        for (s, x) in sums.iter_mut().zip(v) {
            *s += x;
        }
    }
    let metrics = if counted == 0 {
        MetricSet::default()
    } else {
        MetricSet::from_values(sums.map(|s| s / counted as f64))
    };
    Ok(TrialMetrics {
        trial: t,
        metrics,
        queries: counted,
        excluded: queries.len() - counted,
        rank1: queries.iter().map(|q| q.as_ref().map(|q| q.cmc[0])).collect(),
    })
}

fn normalize_table(table: &EmbeddingTable) -> Result<EmbeddingTable> {
    let mut out = EmbeddingTable::new(table.dim());
    for r in 0..table.len() {
        let v = table.row(r);
        let norm = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        let scaled: Vec<f32> = if norm == 0.0 {
            v.to_vec()
        } else {
            v.iter().map(|&x| (f64::from(x) / norm) as f32).collect()
        };
        out.push(table.ids()[r], table.identity(r), &scaled)?;
    }
    Ok(out)
}

/// Leave-one-out evaluation of every trial, aggregated as mean and sample
/// standard deviation over trials. Probes without a positive in their
/// gallery are left out of the averages and counted.
pub fn evaluate_trials(trials: &[TrialInput<'_>], config: &EvalConfig) -> Result<EvalReport> {
    if trials.is_empty() {
        return Err(Error::invalid("no trials to evaluate"));
    }
    let per_trial = trials
        .iter()
        .enumerate()
        .map(|(t, input)| evaluate_one(t, input, config))
        .collect::<Result<Vec<_>>>()?;
    let n = per_trial.len() as f64;
    let mut mean = [0.0; 5];
    for t in &per_trial {
        for (m, v) in mean.iter_mut().zip(t.metrics.values()) {
            *m += v / n;
        }
    }
    let mut std = [0.0; 5];
    if per_trial.len() > 1 {
        for t in &per_trial {
            for ((s, v), m) in std.iter_mut().zip(t.metrics.values()).zip(mean) {
                *s += (v - m).powi(2);
            }
        }
        std = std.map(|s| (s / (n - 1.0)).sqrt());
    }
    Ok(EvalReport {
        config: config.clone(),
        excluded_queries: per_trial.iter().map(|t| t.excluded).sum(),
        trials: per_trial,
        mean: MetricSet::from_values(mean),
        std: MetricSet::from_values(std),
        significance: None,
    })
}

/// Rank-1 outcomes of several reports over the same queries, one column per
/// report. Rows are every (trial, probe) query not excluded in any report.
pub fn outcome_matrix(reports: &[&EvalReport]) -> Result<BinaryOutcomeMatrix> {
    let first = reports.first().ok_or_else(|| Error::invalid("no reports"))?;
    let shape = |r: &EvalReport| r.trials.iter().map(|t| t.rank1.len()).collect::<Vec<_>>();
    if reports.iter().any(|r| shape(r) != shape(first)) {
        return Err(Error::invalid("reports cover different trials or probes"));
    }
    let mut rows = Vec::new();
    for (t, trial) in first.trials.iter().enumerate() {
        for q in 0..trial.rank1.len() {
            let row: Option<Vec<u8>> = reports.iter().map(|r| r.trials[t].rank1[q].map(u8::from)).collect();
            rows.extend(row);
        }
    }
    BinaryOutcomeMatrix::new(rows)
}

impl EvalReport {
    /// Runs Cochran's Q of this report against `others` and stores it.
    pub fn compare(&mut self, others: &[&EvalReport]) -> Result<CochranResult> {
        let mut all: Vec<&EvalReport> = vec![self];
        all.extend_from_slice(others);
        let result = cochran_q(&outcome_matrix(&all)?)?;
        self.significance = Some(result);
        Ok(result)
    }

    pub fn to_table(&self) -> String {
        let pct = |v: f64| format!("{:6.2}", 100.0 * v);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "metric: {}  normalize: {}  corruption: {}  policy: {}",
            self.config.metric,
            self.config.normalize,
            label(&self.config.corruption_mode),
            label(&self.config.policy)
        );
        let _ = writeln!(out, "{:>8}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>7}", "trial", "mAP", "mINP", "R1", "R5", "R10", "queries");
        for t in &self.trials {
            let m = &t.metrics;
            let _ = writeln!(
                out,
                "{:>8}  {}  {}  {}  {}  {}  {:>7}",
                t.trial,
                pct(m.map),
                pct(m.minp),
                pct(m.cmc[0]),
                pct(m.cmc[1]),
                pct(m.cmc[2]),
                t.queries
            );
        }
        for (name, m) in [("mean", &self.mean), ("std", &self.std)] {
            let _ = writeln!(
                out,
                "{:>8}  {}  {}  {}  {}  {}",
                name,
                pct(m.map),
                pct(m.minp),
                pct(m.cmc[0]),
                pct(m.cmc[1]),
                pct(m.cmc[2])
            );
        }
        let _ = writeln!(out, "excluded queries (no positive in gallery): {}", self.excluded_queries);
        if let Some(s) = &self.significance {
            let _ = writeln!(out, "cochran q: {:.6}  df: {}  p: {:.6e}", s.q, s.df, s.p_value);
        }
        out
    }

    /// Tab-separated records, one per trial plus `mean` and `std` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("row\tmap\tminp\tcmc1\tcmc5\tcmc10\tqueries\texcluded\n");
        let fmt = |m: &MetricSet| m.values().map(|v| format!("{v:.10}")).join("\t");
        for t in &self.trials {
            let _ = writeln!(out, "trial{}\t{}\t{}\t{}", t.trial, fmt(&t.metrics), t.queries, t.excluded);
        }
        let queries: usize = self.trials.iter().map(|t| t.queries).sum();
        let _ = writeln!(out, "mean\t{}\t{queries}\t{}", fmt(&self.mean), self.excluded_queries);
        let _ = writeln!(out, "std\t{}\t-\t-", fmt(&self.std));
        if let Some(s) = &self.significance {
            let _ = writeln!(out, "#cochran\tq={:.10}\tdf={}\tp={:.10e}", s.q, s.df, s.p_value);
        }
        out
    }
}

fn label(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

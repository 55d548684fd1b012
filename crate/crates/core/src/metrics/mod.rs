//! Retrieval evaluation over concatenated pair embeddings, significance
//! testing, and forward-only reference values for the training losses.

mod embedding;
mod eval;
mod loss;
mod ranking;
mod stats;

pub use embedding::{concat_embeddings, EmbeddingTable, EMBEDDING_MAGIC, EMBEDDING_VERSION};
pub use eval::{evaluate_trials, outcome_matrix, EvalConfig, EvalReport, MetricSet, TrialInput, TrialMetrics, CMC_RANKS};
pub use loss::{batch_hard_triplet_loss, label_smoothed_ce, TRIPLET_MARGIN};
pub use ranking::{
    average_precision, average_precision_from_mask, cmc_at, inverse_negative_penalty, inp_from_mask, rank_gallery,
    rank_rows, Metric, Ranking,
};
pub use stats::{chi_square_sf, cochran_q, mcnemar, regularized_gamma_q, BinaryOutcomeMatrix, CochranResult};

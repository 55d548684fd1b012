//! Dataset manifests and the evaluation protocol: identity splits, k-fold
//! validation, cross-modal pairing, leave-one-out-query trials and P×K
//! batch sampling.

mod manifest;
mod pairing;
mod pk;
mod split;

pub use manifest::{load_manifest, DatasetKind, DatasetManifest, ImageRecord, MANIFEST_TAG};
pub use pairing::{
    format_pairings, looq_trials, pair_images, parse_pairings, repeated_pairings, LooqTrial, PairEntry, PairingResult,
    DEFAULT_TRIALS,
};
pub use pk::{pk_batches, PkItem, PkSource};
pub use split::{make_folds, split_identities, SplitSpec, DEFAULT_FOLDS};

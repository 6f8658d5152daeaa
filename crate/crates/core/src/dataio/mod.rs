//! Rating logs in, paired leave-one-out datasets out.
//!
//! The preparation pipeline is `load_interactions` → `binarize` →
//! `kcore_filter` (per domain) → `pair_domains` → `loo_split`, and the result
//! is persisted with `save_dataset`.

pub mod kcore;
pub mod pairing;
pub mod raw;
pub mod split;
pub mod storage;

use std::path::Path;

pub use kcore::kcore_filter;
pub use pairing::{pair_domains, InteractionMatrix, MIN_USER_INTERACTIONS};
pub use raw::{binarize, load_interactions, parse_ratings, Interaction, RatingRecord, RawRatings};
pub use split::{
    loo_split, DatasetMeta, Domain, DomainData, DomainStats, PairedDataset, Phase, SplitOptions,
};
pub use storage::{load_dataset, save_dataset};

use crate::error::Result;

/// Rating threshold for a positive interaction.
pub const POSITIVE_THRESHOLD: f32 = 3.0;

/// Runs the full preparation pipeline on two rating files.
pub fn prepare_from_files(
    ratings_a: impl AsRef<Path>,
    ratings_b: impl AsRef<Path>,
    opts: &SplitOptions,
) -> Result<PairedDataset> {
    let mut filtered = Vec::with_capacity(2);
    for path in [ratings_a.as_ref(), ratings_b.as_ref()] {
        let raw = load_interactions(path)?;
        if raw.skipped > 0 {
            log::warn!(
                "{}: skipped {} malformed lines",
                path.display(),
                raw.skipped
            );
        }
        let positives = binarize(&raw, POSITIVE_THRESHOLD)?;
        let core = kcore_filter(&positives, opts.min_count)?;
        if core.is_empty() {
            log::warn!("{}: k-core filtering left no interactions", path.display());
        }
        filtered.push(core);
    }
    let (a, b) = pair_domains(&filtered[0], &filtered[1])?;
    loo_split(&a, &b, opts)
}

//! Preference-set construction, trajectory persistence and the state index
//! behind dataset-based counterfactual lookup.

mod index;
mod io;
mod overlap;
mod preference;

pub use index::{nearest_counterfactual, Neighbor, NormStats, SetTag, StateIndex};
pub use io::{load_trajectories, parse_trajectories, save_trajectories, write_trajectories};
pub use overlap::{jaccard_overlap, GRID_BINS};
pub use preference::{
    build_preference_sets, build_preference_sets_with, from_manifest, partition,
    partition_indices, NpOrder, PreferenceDatasets, PreferenceManifest, Provenance,
    SamplingOptions, Shortfall, QUANTILE_BINS,
};

//! Behavior cloning, the preference fine-tuner and its diagnostics.

mod bc;
mod config;
mod finetune;
mod loss;
mod mismatch;
mod triples;

pub use bc::{pretrain_bc, top_reward_subset, BcConfig, BcOutput};
pub use config::{AlignConfig, CounterfactualStrategy};
pub use finetune::{finetune, train_ppl, FinetuneOutput, HistoryRecord};
pub use loss::{dpo_loss, prefine_loss, LossGraph};
pub use mismatch::{mismatch_counts, mismatch_quartiles, MismatchLog, SideCounts, Snapshot};
pub use triples::{build_triples, CounterfactualIndex, Origin, PreferenceTriple};

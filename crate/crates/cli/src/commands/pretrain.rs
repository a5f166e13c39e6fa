use prefine_core::align::{pretrain_bc, top_reward_subset};
use prefine_core::nn::save_policy;
use serde::Serialize;

use super::{ensure_parent, load_corpus, write_json};
use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Serialize)]
struct PretrainSummary<'a> {
    trajectories_used: usize,
    corpus_size: usize,
    epoch_losses: &'a [f64],
    checksum: String,
    config: &'a RunConfig,
}

/// Clones the highest-return slice of the corpus into a reference policy.
pub fn pretrain(cfg: &RunConfig) -> CliResult<()> {
    let corpus = load_corpus(&cfg.dataset_path()?)?;
    let subset = top_reward_subset(&corpus, cfg.bc.top_fraction)?;
    let bc = prefine_core::align::BcConfig {
        seed: cfg.seed,
        ..cfg.bc.clone()
    };
    let out = pretrain_bc(&subset, &bc)?;
    let path = cfg.reference_path()?;
    ensure_parent(&path)?;
    save_policy(&out.policy, cfg.seed, &path)?;
    let summary_path = path.with_file_name(format!(
        "{}_training.json",
        path.file_stem().and_then(|s| s.to_str()).unwrap_or("reference")
    ));
    write_json(
        &summary_path,
        &PretrainSummary {
            trajectories_used: subset.len(),
            corpus_size: corpus.len(),
            epoch_losses: &out.epoch_losses,
            checksum: out.policy.checksum(),
            config: cfg,
        },
    )?;
    let last = out.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "reference policy from {} of {} trajectories, final loss {last:.4} -> {}",
        subset.len(),
        corpus.len(),
        path.display()
    );
    Ok(())
}

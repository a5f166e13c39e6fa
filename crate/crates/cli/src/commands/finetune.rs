use std::path::Path;

use prefine_core::align::{finetune as run_finetune, pretrain_bc, train_ppl, AlignConfig, BcConfig, MismatchLog};
use prefine_core::data::{build_preference_sets_with, SamplingOptions, Shortfall};
use prefine_core::envs::make_env;
use prefine_core::eval::NormalizationStats;
use prefine_core::nn::save_policy;
use prefine_core::{CmdpSpec, GaussianPolicy, PreferenceDatasets};
use serde::Serialize;

use super::{load_checkpoint, load_corpus, write_json, write_jsonl};
use crate::config::{method_label, Baseline, RunConfig};
use crate::error::CliResult;

#[derive(Serialize)]
struct RunSummary<'a> {
    method: &'a str,
    baseline: Baseline,
    tau: f64,
    seed: u64,
    gradient_updates: usize,
    reference_checksum_before: &'a str,
    reference_checksum_after: &'a str,
    policy_checksum: String,
    dataset_counterfactual_fraction: f64,
    shortfall: Shortfall,
    mismatch: Option<&'a MismatchLog>,
    align: &'a AlignConfig,
    config: &'a RunConfig,
}

/// Trains one method into `dir`, writing `<label>.json` plus its history,
/// mismatch log and run summary. Returns the trained policy.
#[allow(clippy::too_many_arguments)]
pub fn train_method(
    cfg: &RunConfig,
    baseline: Baseline,
    align: &AlignConfig,
    reference: &GaussianPolicy,
    sets: &PreferenceDatasets,
    env: &CmdpSpec,
    stats: &NormalizationStats,
    dir: &Path,
    label: &str,
) -> CliResult<GaussianPolicy> {
    let reference_checksum = reference.checksum();
    let effective;
    let align = if baseline == Baseline::Ppl {
        effective = AlignConfig { lambda: 0.0, ..align.clone() };
        &effective
    } else {
        align
    };
    let (policy, summary_parts) = match baseline {
        Baseline::Bc => {
            let bc = BcConfig {
                seed: align.seed,
                ..cfg.bc.clone()
            };
            let out = pretrain_bc(&sets.preferred, &bc)?;
            (out.policy, None)
        }
        Baseline::Prefine | Baseline::Ppl => {
            let out = if baseline == Baseline::Ppl {
                train_ppl(reference, sets, env, align, Some(stats))?
            } else {
                run_finetune(reference, sets, env, align, Some(stats))?
            };
            write_jsonl(&dir.join(format!("{label}_history.jsonl")), &out.history)?;
            write_json(&dir.join(format!("{label}_mismatch.json")), &out.mismatch)?;
            let parts = (
                out.gradient_updates,
                out.reference_checksum_before.clone(),
                out.reference_checksum_after.clone(),
                out.dataset_counterfactual_fraction,
                out.mismatch.clone(),
            );
            (out.policy, Some(parts))
        }
    };
    save_policy(&policy, align.seed, dir.join(format!("{label}.json")))?;
    let (updates, before, after, fraction, mismatch) = match &summary_parts {
        Some((u, b, a, f, m)) => (*u, b.as_str(), a.as_str(), *f, Some(m)),
        None => (0, reference_checksum.as_str(), reference_checksum.as_str(), 0.0, None),
    };
    write_json(
        &dir.join(format!("{label}_run.json")),
        &RunSummary {
            method: label,
            baseline,
            tau: align.tau,
            seed: align.seed,
            gradient_updates: updates,
            reference_checksum_before: before,
            reference_checksum_after: after,
            policy_checksum: policy.checksum(),
            dataset_counterfactual_fraction: fraction,
            shortfall: sets.shortfall,
            mismatch,
            align,
            config: cfg,
        },
    )?;
    Ok(policy)
}

pub(crate) fn preference_sets(
    cfg: &RunConfig,
    corpus: &[prefine_core::Trajectory],
    tau: f64,
    seed: u64,
) -> CliResult<PreferenceDatasets> {
    let source = cfg.dataset_path()?.display().to_string();
    let sets = build_preference_sets_with(corpus, tau, cfg.n_p, cfg.n_np, seed, &SamplingOptions::default(), &source)?;
    if sets.shortfall.any() {
        eprintln!(
            "warning: tau {tau} seed {seed}: preference sets short ({} of {} preferred, {} of {} non-preferred)",
            sets.preferred.len(),
            cfg.n_p,
            sets.non_preferred.len(),
            cfg.n_np
        );
    }
    Ok(sets)
}

/// Builds preference sets and trains the configured method for every
/// `(tau, seed)` pair under `<out>/<env>/<tau>/<seed>/`.
pub fn finetune(cfg: &RunConfig) -> CliResult<()> {
    let corpus = load_corpus(&cfg.dataset_path()?)?;
    let reference = load_checkpoint(&cfg.reference_path()?, "reference checkpoint")?;
    let env = make_env(cfg.env_name()?, 0);
    let label = method_label(cfg.baseline, cfg.align.strategy);
    for tau in cfg.taus()? {
        let stats = NormalizationStats::from_corpus(&corpus, tau)?;
        for &seed in &cfg.seeds {
            let dir = cfg.run_dir(tau, seed)?;
            let sets = preference_sets(cfg, &corpus, tau, seed)?;
            std::fs::create_dir_all(&dir)?;
            sets.manifest().save(dir.join("preferences.json"))?;
            let align = AlignConfig {
                tau,
                seed,
                eval_rollouts: cfg.eval.n_rollouts,
                ..cfg.align.clone()
            };
            train_method(cfg, cfg.baseline, &align, &reference, &sets, &env, &stats, &dir, &label)?;
            println!("{label} tau {tau} seed {seed} -> {}", dir.display());
        }
    }
    Ok(())
}

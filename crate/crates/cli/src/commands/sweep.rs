use prefine_core::align::AlignConfig;
use prefine_core::envs::make_env;
use prefine_core::eval::{evaluate as run_eval, normalized_cost, NormalizationStats};
use serde::{Deserialize, Serialize};

use super::evaluate::eval_settings;
use super::finetune::{preference_sets, train_method};
use super::{ensure_parent, load_checkpoint, load_corpus};
use crate::config::{method_label, Baseline, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub beta: f64,
    pub tau: f64,
    pub seed: u64,
    pub normalized_reward: f64,
    pub normalized_cost: f64,
    pub is_safe: bool,
    pub cvar_cost: f64,
    pub mean_reward: f64,
    pub mean_cost: f64,
}

/// A trained cell re-judged against another threshold with the same rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescoreRow {
    pub lambda: f64,
    pub beta: f64,
    pub train_tau: f64,
    pub seed: u64,
    pub eval_tau: f64,
    pub normalized_cost: f64,
    pub is_safe: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub rescore: Vec<RescoreRow>,
}

fn write_rows<S: Serialize>(path: &std::path::Path, rows: &[S]) -> CliResult<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One fine-tuning run per `λ × β × τ × seed` cell, plus every cell's
/// policy re-scored against all thresholds.
pub fn sweep(cfg: &RunConfig) -> CliResult<SweepOutput> {
    if cfg.lambdas.is_empty() || cfg.betas.is_empty() {
        return Err(CliError::Usage("sweep needs at least one lambda and one beta".into()));
    }
    let corpus = load_corpus(&cfg.dataset_path()?)?;
    let reference = load_checkpoint(&cfg.reference_path()?, "reference checkpoint")?;
    let env = make_env(cfg.env_name()?, 0);
    let taus = cfg.taus()?;
    let root = cfg.env_dir()?.join("sweep");
    let label = method_label(Baseline::Prefine, cfg.align.strategy);
    let mut out = SweepOutput::default();
    for &lambda in &cfg.lambdas {
        for &beta in &cfg.betas {
            for &tau in &taus {
                let stats = NormalizationStats::from_corpus(&corpus, tau)?;
                for &seed in &cfg.seeds {
                    let dir = root
                        .join(format!("lambda_{lambda}_beta_{beta}"))
                        .join(format!("{tau}"))
                        .join(seed.to_string());
                    std::fs::create_dir_all(&dir)?;
                    let sets = preference_sets(cfg, &corpus, tau, seed)?;
                    let align = AlignConfig {
                        lambda,
                        beta,
                        tau,
                        seed,
                        eval_rollouts: 0,
                        ..cfg.align.clone()
                    };
                    let policy =
                        train_method(cfg, Baseline::Prefine, &align, &reference, &sets, &env, &stats, &dir, &label)?;
                    let r = run_eval(&policy, &env, &stats, &eval_settings(cfg, seed))?;
                    out.rows.push(SweepRow {
                        lambda,
                        beta,
                        tau,
                        seed,
                        normalized_reward: r.normalized_reward,
                        normalized_cost: r.normalized_cost,
                        is_safe: r.is_safe,
                        cvar_cost: r.cvar_cost,
                        mean_reward: r.mean_reward,
                        mean_cost: r.mean_cost,
                    });
                    for &eval_tau in &taus {
                        let c = normalized_cost(r.mean_cost, eval_tau, cfg.align.epsilon_cost)?;
                        out.rescore.push(RescoreRow {
                            lambda,
                            beta,
                            train_tau: tau,
                            seed,
                            eval_tau,
                            normalized_cost: c,
                            is_safe: c <= 1.0,
                        });
                    }
                    println!("lambda {lambda} beta {beta} tau {tau} seed {seed}: cost {:.3} reward {:.3}", r.normalized_cost, r.normalized_reward);
                }
            }
        }
    }
    write_rows(&root.join("sweep.csv"), &out.rows)?;
    write_rows(&root.join("rescore.csv"), &out.rescore)?;
    Ok(out)
}

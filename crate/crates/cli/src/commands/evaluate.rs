use std::path::Path;

use prefine_core::envs::make_env;
use prefine_core::eval::{evaluate as run_eval, EvalReport, EvalSettings, NormalizationStats};
use serde::{Deserialize, Serialize};

use super::{ensure_parent, load_checkpoint, load_corpus, write_json};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Checkpoint stems looked up in every run directory, in table order.
pub const METHODS: [&str; 5] = ["bc", "prefine", "prefine_mixed", "ppl", "ppl_mixed"];

/// One line of the comparison table; `seed` is `mean` on aggregate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub tau: f64,
    pub seed: String,
    pub normalized_reward: f64,
    pub normalized_cost: f64,
    pub is_safe: bool,
    pub safe_fraction: f64,
    pub cvar_cost: f64,
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub n_rollouts: usize,
}

impl TableRow {
    fn from_report(method: &str, tau: f64, seed: u64, r: &EvalReport) -> Self {
        Self {
            method: method.to_string(),
            tau,
            seed: seed.to_string(),
            normalized_reward: r.normalized_reward,
            normalized_cost: r.normalized_cost,
            is_safe: r.is_safe,
            safe_fraction: if r.is_safe { 1.0 } else { 0.0 },
            cvar_cost: r.cvar_cost,
            mean_reward: r.mean_reward,
            mean_cost: r.mean_cost,
            n_rollouts: r.n_rollouts,
        }
    }

    /// Column-wise mean of per-seed rows; safety is judged on the mean cost.
    pub fn mean_of(rows: &[TableRow]) -> Self {
        let n = rows.len() as f64;
        let avg = |f: fn(&TableRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let normalized_cost = avg(|r| r.normalized_cost);
        Self {
            method: rows[0].method.clone(),
            tau: rows[0].tau,
            seed: "mean".into(),
            normalized_reward: avg(|r| r.normalized_reward),
            normalized_cost,
            is_safe: normalized_cost <= 1.0,
            safe_fraction: avg(|r| r.safe_fraction),
            cvar_cost: avg(|r| r.cvar_cost),
            mean_reward: avg(|r| r.mean_reward),
            mean_cost: avg(|r| r.mean_cost),
            n_rollouts: rows.iter().map(|r| r.n_rollouts).sum(),
        }
    }
}

#[derive(Serialize)]
struct ReportEntry<'a> {
    method: &'a str,
    tau: f64,
    seed: u64,
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a RunConfig,
    entries: Vec<ReportEntry<'a>>,
}

pub(crate) fn eval_settings(cfg: &RunConfig, seed: u64) -> EvalSettings {
    EvalSettings {
        n_rollouts: cfg.eval.n_rollouts,
        epsilon: cfg.align.epsilon_cost,
        cvar_alpha: cfg.eval.cvar_alpha,
        stochastic: true,
        seed: cfg.eval.seed_offset.wrapping_add(seed),
    }
}

pub(crate) fn write_table(path: &Path, rows: &[TableRow]) -> CliResult<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Scores the reference policy and every trained checkpoint found per
/// `(tau, seed)`, then writes `report.json` and `results.csv`.
pub fn evaluate(cfg: &RunConfig) -> CliResult<Vec<TableRow>> {
    let corpus = load_corpus(&cfg.dataset_path()?)?;
    let reference = load_checkpoint(&cfg.reference_path()?, "reference checkpoint")?;
    let env = make_env(cfg.env_name()?, 0);
    let mut reports: Vec<(String, f64, u64, EvalReport)> = Vec::new();
    for tau in cfg.taus()? {
        let stats = NormalizationStats::from_corpus(&corpus, tau)?;
        for &seed in &cfg.seeds {
            let dir = cfg.run_dir(tau, seed)?;
            let found: Vec<&str> = METHODS
                .iter()
                .copied()
                .filter(|m| dir.join(format!("{m}.json")).is_file())
                .collect();
            if found.is_empty() {
                return Err(CliError::MissingInput {
                    what: "trained checkpoint",
                    path: dir.display().to_string(),
                });
            }
            let settings = eval_settings(cfg, seed);
            reports.push(("reference".into(), tau, seed, run_eval(&reference, &env, &stats, &settings)?));
            for m in found {
                let policy = load_checkpoint(&dir.join(format!("{m}.json")), "trained checkpoint")?;
                reports.push((m.to_string(), tau, seed, run_eval(&policy, &env, &stats, &settings)?));
            }
        }
    }

    let mut rows = Vec::new();
    let mut keys: Vec<(String, f64)> = Vec::new();
    for (m, tau, _, _) in &reports {
        if !keys.iter().any(|(km, kt)| km == m && kt == tau) {
            keys.push((m.clone(), *tau));
        }
    }
    for (m, tau) in &keys {
        let group: Vec<TableRow> = reports
            .iter()
            .filter(|(rm, rt, _, _)| rm == m && rt == tau)
            .map(|(rm, rt, s, r)| TableRow::from_report(rm, *rt, *s, r))
            .collect();
        let mean = TableRow::mean_of(&group);
        rows.extend(group);
        rows.push(mean);
    }

    let env_dir = cfg.env_dir()?;
    write_json(
        &env_dir.join("report.json"),
        &ReportFile {
            config: cfg,
            entries: reports
                .iter()
                .map(|(m, tau, seed, report)| ReportEntry { method: m, tau: *tau, seed: *seed, report })
                .collect(),
        },
    )?;
    let table = env_dir.join("results.csv");
    write_table(&table, &rows)?;
    print!("{}", std::fs::read_to_string(&table)?);
    Ok(rows)
}

//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

use std::collections::HashSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use prefine_cli::commands::{self, TableRow};
use prefine_cli::{Baseline, RunConfig};
use prefine_core::align::{prefine_loss, CounterfactualStrategy, MismatchLog, Origin, PreferenceTriple};
use prefine_core::data::{build_preference_sets, NormStats, SetTag, StateIndex};
use prefine_core::envs::{default_mix, make_env, synthesize_dataset, EnvName};
use prefine_core::eval::{cvar, evaluate, normalized_cost, EvalSettings, NormalizationStats};
use prefine_core::nn::load_policy;
use prefine_core::rng::prng;
use prefine_core::{GaussianPolicy, Trajectory};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1, 2

fn micro_instance(seed: u64) -> (Vec<PreferenceTriple<f64>>, GaussianPolicy, GaussianPolicy, f64, f64) {
    let mut rng = prng(1_000 + seed);
    let s = rng.random_range(1..=3);
    let a = rng.random_range(1..=2);
    let hidden = [rng.random_range(2..=8), rng.random_range(2..=6)];
    let theta = GaussianPolicy::new(s, a, &hidden, rng.random_range(-1.0..0.5), &mut rng);
    let reference = GaussianPolicy::new(s, a, &hidden, rng.random_range(-1.0..0.5), &mut rng);
    let n = rng.random_range(2..=10);
    let triples = (0..n)
        .map(|i| PreferenceTriple {
            state: (0..s).map(|_| rng.random_range(-2.0..2.0)).collect(),
            action_plus: (0..a).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action_minus: (0..a).map(|_| rng.random_range(-1.0..1.0)).collect(),
            origin: match i {
                0 => Origin::FromPreferred,
                1 => Origin::FromNonPreferred,
                _ if rng.random_bool(0.5) => Origin::FromPreferred,
                _ => Origin::FromNonPreferred,
            },
            from_dataset: false,
        })
        .collect();
    let beta = [0.05, 0.2, 0.6, 0.95][rng.random_range(0..4)];
    let lambda = [0.0, 0.1, 1.0, 1.6, 2.0][rng.random_range(0..5)];
    (triples, theta, reference, beta, lambda)
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..20 {
        let (triples, theta, reference, beta, lambda) = micro_instance(seed);
        if theta.num_params() > 200 {
            return Err(format!("instance {seed} has {} params", theta.num_params()));
        }
        let analytic = prefine_loss(&triples, &theta, &reference, beta, lambda)
            .map_err(|e| e.to_string())?
            .gradients()
            .map_err(|e| e.to_string())?
            .flat();
        let base = theta.flat_params();
        let mut probe = theta.clone();
        for (k, g) in analytic.iter().enumerate() {
            let mut at = |d: f64| {
                let mut p = base.clone();
                p[k] += d;
                probe.set_flat_params(&p).unwrap();
                prefine_loss(&triples, &probe, &reference, beta, lambda).unwrap().value()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
            checked += 1;
        }
    }
    let took = start.elapsed();
    check(
        worst < 1e-4 && took < Duration::from_secs(60),
        format!("20 instances, {checked} partials, worst relative error {worst:.2e}, {took:.2?}"),
    )
}

fn closed_form_loss() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let (triples, theta, _, _, _) = micro_instance(seed);
        let groups = triples.iter().map(|t| t.origin).collect::<HashSet<_>>().len() as f64;
        for beta in [0.05, 0.2, 0.6, 0.95] {
            let loss = prefine_loss(&triples, &theta, &theta, beta, 0.0).map_err(|e| e.to_string())?;
            worst = worst.max((loss.value() - groups * std::f64::consts::LN_2).abs());
        }
    }
    check(worst < 1e-10, format!("max |loss - ln2 per group| = {worst:.2e} over beta in {{0.05,0.2,0.6,0.95}}"))
}

// ---------------------------------------------------------------- 3

fn normalized_cost_table() -> Outcome {
    let eps = 1e-3;
    let mut cases: Vec<(f64, f64)> = vec![(0.0, 40.0), (40.0, 40.0), (34.84, 40.0), (15.0, 15.0), (0.0, 0.0)];
    let mut rng = prng(77);
    while cases.len() < 50 {
        let kappa: f64 = rng.random_range(0.0..100.0);
        let c = match cases.len() % 3 {
            0 => kappa,
            1 => rng.random_range(0.0..kappa.max(1e-9)),
            _ => rng.random_range(kappa..kappa + 100.0),
        };
        cases.push((c, kappa));
    }
    let mut mismatches = 0;
    let mut law_violations = 0;
    for &(c, kappa) in &cases {
        let got = normalized_cost(c, kappa, eps).map_err(|e| e.to_string())?;
        if got != (c + eps) / (kappa + eps) {
            mismatches += 1;
        }
        if (got <= 1.0) != (c <= kappa) {
            law_violations += 1;
        }
    }
    let car_run = normalized_cost(34.84, 40.0, eps).unwrap();
    check(
        mismatches == 0 && law_violations == 0 && normalized_cost(40.0, 40.0, eps).unwrap() == 1.0,
        format!("50 cases, {mismatches} formula mismatches, {law_violations} threshold-law violations, C=34.84/κ=40 → {car_run:.5}"),
    )
}

// ---------------------------------------------------------------- 4

fn dataset_protocol() -> Outcome {
    let env = make_env(EnvName::SpeedLimit1D, 7);
    let corpus = synthesize_dataset(&env, 500, &default_mix(EnvName::SpeedLimit1D), 7).map_err(|e| e.to_string())?;
    let tau = 15.0;
    let sets = build_preference_sets(&corpus, tau, 100, 20, 3).map_err(|e| e.to_string())?;
    let again = build_preference_sets(&corpus, tau, 100, 20, 3).map_err(|e| e.to_string())?;
    let p: Vec<usize> = sets.preferred.iter().map(|t| t.id).collect();
    let np: Vec<usize> = sets.non_preferred.iter().map(|t| t.id).collect();

    // Independent stratification oracle over the top reward half of SAFE.
    let mut safe: Vec<&Trajectory> = corpus.iter().filter(|t| t.cumulative_cost < tau).collect();
    safe.sort_by(|a, b| b.cumulative_reward.total_cmp(&a.cumulative_reward).then(a.id.cmp(&b.id)));
    let pool = safe.len().div_ceil(2).max(100);
    let mut bins = [0usize; 5];
    for id in &p {
        let rank = safe.iter().position(|t| t.id == *id).ok_or(format!("{id} not SAFE"))?;
        if rank >= pool {
            return Err(format!("{id} outside the stratified pool"));
        }
        bins[(0..5).find(|b| b * pool / 5 <= rank && rank < (b + 1) * pool / 5).unwrap()] += 1;
    }
    let invariants = p.len() == 100
        && np.len() == 20
        && !sets.shortfall.any()
        && sets.preferred.iter().all(|t| t.cumulative_cost < tau)
        && sets.non_preferred.iter().all(|t| t.cumulative_cost >= tau)
        && p.iter().collect::<HashSet<_>>().len() == 100
        && np.iter().collect::<HashSet<_>>().len() == 20
        && p.iter().all(|id| !np.contains(id));
    check(
        invariants && bins == [20; 5] && again.manifest() == sets.manifest(),
        format!("|D_p|={} |D_np|={} stratum counts {bins:?}, deterministic={}", p.len(), np.len(), again.manifest() == sets.manifest()),
    )
}

// ---------------------------------------------------------------- 5-8

struct EndToEnd {
    cfg: RunConfig,
    rows: Vec<TableRow>,
    seeds: Vec<u64>,
    tau: f64,
    /// Wall-clock of the PREFINE fine-tuning run per seed.
    prefine_time: Vec<Duration>,
    /// Mean-mode normalized reward per method.
    mean_mode: Vec<(String, f64)>,
}

impl EndToEnd {
    fn mean_row(&self, method: &str) -> Result<&TableRow, String> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.seed == "mean")
            .ok_or(format!("no mean row for {method}"))
    }

    fn run_dir(&self, seed: u64) -> PathBuf {
        self.cfg.run_dir(self.tau, seed).unwrap()
    }
}

fn end_to_end(root: &Path) -> Result<EndToEnd, String> {
    let e = |err: prefine_cli::CliError| err.to_string();
    let tau = 15.0;
    let seeds = vec![0, 1, 2];
    let cfg = RunConfig {
        out: root.join("output"),
        taus: vec![tau],
        seeds: seeds.clone(),
        ..RunConfig::default()
    };
    commands::synth(&cfg).map_err(e)?;
    commands::pretrain(&cfg).map_err(e)?;
    let mut prefine_time = Vec::new();
    for &seed in &seeds {
        let single = RunConfig { seeds: vec![seed], ..cfg.clone() };
        let t = Instant::now();
        commands::finetune(&single).map_err(e)?;
        prefine_time.push(t.elapsed());
        let ppl = RunConfig { baseline: Baseline::Ppl, ..single.clone() };
        commands::finetune(&ppl).map_err(e)?;
        let mut mixed = single.clone();
        mixed.align.strategy = CounterfactualStrategy::Mixed;
        commands::finetune(&mixed).map_err(e)?;
        eprintln!("  seed {seed}: PREFINE fine-tuning took {:.1?}", prefine_time.last().unwrap());
    }
    let rows = commands::evaluate(&cfg).map_err(e)?;

    let corpus = prefine_core::data::load_trajectories::<f64>(cfg.dataset_path().unwrap()).map_err(|x| x.to_string())?;
    let stats = NormalizationStats::from_corpus(&corpus, tau).map_err(|x| x.to_string())?;
    let env = make_env::<f64>(EnvName::SpeedLimit1D, 0);
    let mut mean_mode = Vec::new();
    for method in ["reference", "prefine", "ppl"] {
        let mut total = 0.0;
        for &seed in &seeds {
            let path = if method == "reference" {
                cfg.reference_path().unwrap()
            } else {
                cfg.run_dir(tau, seed).unwrap().join(format!("{method}.json"))
            };
            let policy: GaussianPolicy = load_policy(path).map_err(|x| x.to_string())?;
            let settings = EvalSettings {
                n_rollouts: 100,
                stochastic: false,
                seed: cfg.eval.seed_offset + seed,
                ..EvalSettings::default()
            };
            total += evaluate(&policy, &env, &stats, &settings).map_err(|x| x.to_string())?.normalized_reward;
        }
        mean_mode.push((method.to_string(), total / seeds.len() as f64));
    }
    Ok(EndToEnd { cfg, rows, seeds, tau, prefine_time, mean_mode })
}

fn safety_alignment(run: &EndToEnd) -> Outcome {
    let r = run.mean_row("reference")?;
    let p = run.mean_row("prefine")?;
    let reduction = 1.0 - p.normalized_cost / r.normalized_cost;
    let retention = p.normalized_reward / r.normalized_reward;
    let slowest = run.prefine_time.iter().max().copied().unwrap_or_default();
    check(
        r.normalized_cost > 1.0
            && p.normalized_cost <= 1.0
            && reduction >= 0.5
            && retention >= 0.8
            && slowest <= Duration::from_secs(600),
        format!(
            "cost {:.3} -> {:.3} ({:.0}% lower), reward {:.3} -> {:.3} ({retention:.2}x), slowest seed {slowest:.0?}",
            r.normalized_cost,
            p.normalized_cost,
            100.0 * reduction,
            r.normalized_reward,
            p.normalized_reward
        ),
    )
}

fn ablation(run: &EndToEnd) -> Outcome {
    let mm = |m: &str| run.mean_mode.iter().find(|(k, _)| k == m).map(|(_, v)| *v).unwrap();
    let r = run.mean_row("reference")?;
    let p = run.mean_row("prefine")?;
    let d = run.mean_row("ppl")?;
    check(
        mm("ppl") < mm("prefine") && p.normalized_cost < r.normalized_cost && d.normalized_cost < r.normalized_cost,
        format!(
            "mean-mode reward lambda=0 {:.4} vs lambda=1.6 {:.4}; cost ref {:.3}, lambda=1.6 {:.3}, lambda=0 {:.3}",
            mm("ppl"),
            mm("prefine"),
            r.normalized_cost,
            p.normalized_cost,
            d.normalized_cost
        ),
    )
}

fn read_mismatch(path: &Path) -> Result<MismatchLog, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn mismatch_trend(run: &EndToEnd) -> Outcome {
    let mut q = [0.0f64; 4];
    let (mut policy_mean, mut mixed_mean) = (0.0, 0.0);
    for &seed in &run.seeds {
        let dir = run.run_dir(seed);
        let policy = read_mismatch(&dir.join("prefine_mismatch.json"))?;
        let mixed = read_mismatch(&dir.join("prefine_mixed_mismatch.json"))?;
        for (acc, v) in q.iter_mut().zip(policy.total_pct) {
            *acc += v / run.seeds.len() as f64;
        }
        policy_mean += policy.mean_total_pct() / run.seeds.len() as f64;
        mixed_mean += mixed.mean_total_pct() / run.seeds.len() as f64;
    }
    check(
        q[3] <= q[0] && mixed_mean >= policy_mean,
        format!(
            "policy-sampled quartiles {:.1}% {:.1}% {:.1}% {:.1}%; mean mixed {mixed_mean:.1}% vs policy-sampled {policy_mean:.1}%",
            q[0], q[1], q[2], q[3]
        ),
    )
}

fn single_stage(run: &EndToEnd) -> Outcome {
    let reference: GaussianPolicy = load_policy(run.cfg.reference_path().unwrap()).map_err(|e| e.to_string())?;
    let expected = run.cfg.align.iterations as u64;
    let mut notes = Vec::new();
    let mut good = true;
    for &seed in &run.seeds {
        for method in ["prefine", "ppl", "prefine_mixed"] {
            let path = run.run_dir(seed).join(format!("{method}_run.json"));
            let v: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let updates = v["gradient_updates"].as_u64().unwrap_or(0);
            let unchanged = v["reference_checksum_before"] == v["reference_checksum_after"]
                && v["reference_checksum_after"] == reference.checksum().as_str();
            good &= updates == expected && unchanged;
            notes.push(updates);
        }
    }
    check(
        good,
        format!("{} runs, updates per run {:?} (iterations {expected}), reference checksum unchanged", notes.len(), notes),
    )
}

// ---------------------------------------------------------------- 9

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.clone(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(root: &Path) -> Outcome {
    let run_all = |cfg: &RunConfig| -> Result<(), String> {
        let e = |err: prefine_cli::CliError| err.to_string();
        commands::synth(cfg).map_err(e)?;
        commands::pretrain(cfg).map_err(e)?;
        commands::finetune(cfg).map_err(e)?;
        let mut mixed = cfg.clone();
        mixed.align.strategy = CounterfactualStrategy::Mixed;
        commands::finetune(&mixed).map_err(e)?;
        commands::finetune(&RunConfig { baseline: Baseline::Ppl, ..cfg.clone() }).map_err(e)?;
        commands::finetune(&RunConfig { baseline: Baseline::Bc, ..cfg.clone() }).map_err(e)?;
        commands::evaluate(cfg).map_err(e)?;
        commands::sweep(&RunConfig { lambdas: vec![0.0, 1.6], betas: vec![0.05], ..cfg.clone() }).map_err(e)?;
        Ok(())
    };
    let mut cfg = RunConfig {
        out: root.join("determinism"),
        n: 120,
        taus: vec![15.0],
        seeds: vec![0, 1],
        ..RunConfig::default()
    };
    cfg.bc.epochs = 3;
    cfg.align.iterations = 30;
    cfg.eval.n_rollouts = 10;
    run_all(&cfg)?;
    let first = snapshot(&cfg.out);
    run_all(&cfg)?;
    let second = snapshot(&cfg.out);
    let differing: Vec<_> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    check(
        first.len() == second.len() && differing.is_empty(),
        format!("{} output files compared across two full command runs, {} differ", first.len(), differing.len()),
    )
}

// ---------------------------------------------------------------- 10

fn brute_force_oracles() -> Outcome {
    let mut rng = prng(10);
    let values: Vec<f64> = (0..1000).map(|_| rng.random_range(-50.0..150.0)).collect();
    let mut cvar_mismatch = 0;
    for alpha in [0.8, 0.9, 0.95, 0.99] {
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let k = ((1.0 - alpha) * 1000.0_f64).ceil() as usize;
        let oracle = sorted[..k].iter().sum::<f64>() / k as f64;
        if cvar(&values, alpha).map_err(|e| e.to_string())? != oracle {
            cvar_mismatch += 1;
        }
    }
    let states: Vec<Vec<f64>> = (0..1000)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-10.0..10.0)])
        .collect();
    let stats = NormStats::from_states(states.iter().map(|s| s.as_slice())).map_err(|e| e.to_string())?;
    let mut index = StateIndex::new(stats.clone());
    for (i, s) in states.iter().enumerate() {
        index.push(s, &[i as f64], SetTag::NonPreferred).map_err(|e| e.to_string())?;
    }
    let mut nn_mismatch = 0;
    for _ in 0..1000 {
        let q = vec![rng.random_range(-2.0..2.0), rng.random_range(-10.0..10.0)];
        let zq = stats.normalize(&q);
        let best = (0..states.len())
            .map(|i| {
                let z = stats.normalize(&states[i]);
                (i, (z[0] - zq[0]).powi(2) + (z[1] - zq[1]).powi(2))
            })
            .fold((usize::MAX, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        if index.nearest(&q).map(|n| n.index) != Some(best.0) {
            nn_mismatch += 1;
        }
    }
    check(
        cvar_mismatch == 0 && nn_mismatch == 0,
        format!("CVaR 4 alphas x 1000 values: {cvar_mismatch} mismatches; nearest neighbor 1000 queries: {nn_mismatch} mismatches"),
    )
}

// ----------------------------------------------------------------

fn guarded<F: FnOnce() -> Outcome>(f: F) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (1, "gradient oracle", guarded(gradient_oracle)),
        (2, "closed-form loss", guarded(closed_form_loss)),
        (3, "normalized-cost formula", guarded(normalized_cost_table)),
        (4, "dataset protocol", guarded(dataset_protocol)),
    ];
    for (n, name, r) in &results {
        report(*n, name, r);
    }
    let started = Instant::now();
    eprintln!("running the SpeedLimit1D end-to-end experiment (3 seeds, default settings)...");
    let run = catch_unwind(AssertUnwindSafe(|| end_to_end(root))).unwrap_or_else(|_| Err("panicked".into()));
    eprintln!("end-to-end experiment finished in {:.0?}", started.elapsed());
    let staged: [(u8, &str, fn(&EndToEnd) -> Outcome); 4] = [
        (5, "end-to-end safety alignment", safety_alignment),
        (6, "supervised-term ablation", ablation),
        (7, "mismatch diagnostic", mismatch_trend),
        (8, "single-stage contract", single_stage),
    ];
    for (n, name, f) in staged {
        let r = match &run {
            Ok(run) => guarded(|| f(run)),
            Err(e) => Err(format!("end-to-end run failed: {e}")),
        };
        report(n, name, &r);
        results.push((n, name, r));
    }
    let r = guarded(|| determinism(root));
    report(9, "determinism", &r);
    results.push((9, "determinism", r));
    let r = guarded(brute_force_oracles);
    report(10, "CVaR and nearest-neighbor oracles", &r);
    results.push((10, "CVaR and nearest-neighbor oracles", r));

    let failed: Vec<u8> = results.iter().filter(|(_, _, r)| r.is_err()).map(|(n, _, _)| *n).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!(" (failed: {failed:?})") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

fn report(n: u8, name: &str, r: &Outcome) {
    match r {
        Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
        Err(detail) => println!("criterion {n:>2} FAIL  {name}: {detail}"),
    }
}

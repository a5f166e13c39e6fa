use prefine_core::align::{pretrain_bc, BcConfig};
use prefine_core::envs::{make_env, rollout, synthesize_dataset, Behavior, Controller, EnvName, RolloutMode};

fn tracker_corpus(n: usize, seed: u64) -> Vec<prefine_core::Trajectory> {
    let env = make_env(EnvName::SpeedLimit1D, seed);
    let ctrl = Controller::SpeedTracker {
        target_lo: 0.8,
        target_hi: 0.8,
        gain: 2.0,
        noise_std: 0.0,
    };
    synthesize_dataset(&env, n, &[(Behavior::Scripted(ctrl), 1.0)], seed).unwrap()
}

#[test]
fn cloned_linear_controller_recovers_its_return() {
    let corpus = tracker_corpus(30, 11);
    let controller_return = corpus.iter().map(|t| t.cumulative_reward).sum::<f64>() / corpus.len() as f64;
    let cfg = BcConfig {
        epochs: 60,
        batch_size: 128,
        hidden: vec![32, 32],
        ..BcConfig::default()
    };
    let policy = pretrain_bc(&corpus, &cfg).unwrap().policy;
    let env = make_env(EnvName::SpeedLimit1D, 11);
    let cloned = (0..30)
        .map(|s| rollout(&env, &policy, RolloutMode::Mean, 1_000 + s).unwrap().cumulative_reward)
        .sum::<f64>()
        / 30.0;
    let rel = (cloned - controller_return).abs() / controller_return.abs();
    assert!(rel < 0.10, "controller {controller_return:.3} vs clone {cloned:.3}");
}

#[test]
fn loss_trends_down_after_warmup() {
    let corpus = tracker_corpus(10, 5);
    let cfg = BcConfig {
        epochs: 60,
        batch_size: 64,
        hidden: vec![16, 16],
        ..BcConfig::default()
    };
    let out = pretrain_bc(&corpus, &cfg).unwrap();
    let steps = &out.step_losses;
    let window = (steps.len() / 20).max(1);
    let smoothed: Vec<f64> = steps
        .chunks(window)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let start = smoothed.len() / 10;
    for pair in smoothed[start..].windows(2) {
        assert!(pair[1] <= pair[0] + 1e-9, "smoothed loss rose: {:?}", &smoothed[start..]);
    }
}

#[test]
fn same_seed_same_policy() {
    let corpus = tracker_corpus(5, 2);
    let cfg = BcConfig { epochs: 3, hidden: vec![8], ..BcConfig::default() };
    let a = pretrain_bc(&corpus, &cfg).unwrap();
    let b = pretrain_bc(&corpus, &cfg).unwrap();
    assert_eq!(a.policy.checksum(), b.policy.checksum());
    assert_eq!(a.epoch_losses, b.epoch_losses);
}

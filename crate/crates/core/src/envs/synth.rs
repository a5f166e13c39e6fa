use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;

use super::controllers::BehaviorActor;
use super::rollout::run_episode;
use super::{Behavior, CmdpSpec, Controller, EnvName, Trajectory};
use crate::error::{Error, Result};
use crate::rng::prng;
use crate::scalar::Scalar;

/// Behavior mix for the bundled corpora: safe and reckless scripted
/// controllers plus a uniform-random controller that anchors the low end of
/// the return range.
pub fn default_mix<T: Scalar>(env: EnvName) -> Vec<(Behavior<T>, f64)> {
    match env {
        EnvName::SpeedLimit1D => vec![
            (Behavior::Scripted(Controller::safe_speed()), 0.5),
            (Behavior::Scripted(Controller::reckless_speed()), 0.3),
            (Behavior::Scripted(Controller::Uniform), 0.2),
        ],
        EnvName::HazardNav2D => vec![
            (
                Behavior::Scripted(Controller::HazardAvoider {
                    margin: T::lit(0.35),
                    noise_std: T::lit(0.03),
                }),
                0.5,
            ),
            (
                Behavior::Scripted(Controller::GoalSeeker {
                    noise_std: T::lit(0.03),
                }),
                0.3,
            ),
            (Behavior::Scripted(Controller::Uniform), 0.2),
        ],
    }
}

/// Draws `n_traj` episodes, choosing each episode's behavior by weight.
pub fn synthesize_dataset<T: Scalar>(
    env: &CmdpSpec<T>,
    n_traj: usize,
    mix: &[(Behavior<T>, f64)],
    seed: u64,
) -> Result<Vec<Trajectory<T>>> {
    if mix.is_empty() {
        return Err(Error::Empty("behavior mix"));
    }
    if let Some((_, w)) = mix.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "behavior weights must be positive, got {w}"
        )));
    }
    let chooser = WeightedIndex::new(mix.iter().map(|(_, w)| *w))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = prng(seed);
    let mut out = Vec::with_capacity(n_traj);
    for id in 0..n_traj {
        let which = chooser.sample(&mut rng);
        let episode_seed = rng.next_u64();
        let mut actor = BehaviorActor::new(&mix[which].0, env);
        out.push(run_episode(env, &mut actor, None, episode_seed, id)?);
    }
    Ok(out)
}

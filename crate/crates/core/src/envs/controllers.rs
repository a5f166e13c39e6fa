use rand::Rng;
use rand_distr::StandardNormal;

use super::rollout::Actor;
use super::{CmdpSpec, Dynamics};
use crate::error::Result;
use crate::nn::GaussianPolicy;
use crate::rng::Prng;
use crate::scalar::Scalar;

/// Hand-written behavior policies used to synthesize offline corpora.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller<T> {
    /// Speed task. Each episode draws a target speed `v* ~ U[target_lo, target_hi]`
    /// and applies `gain · (v* − v)` plus Gaussian noise. With `gain · dt = 1`
    /// the noise-free closed loop never overshoots `v*`, so targets at or
    /// below the limit incur zero cost.
    SpeedTracker {
        target_lo: T,
        target_hi: T,
        gain: T,
        noise_std: T,
    },
    /// Navigation task. Heads for the goal at full step length and steers
    /// around hazards inside `radius + margin`.
    HazardAvoider { margin: T, noise_std: T },
    /// Navigation task. Heads straight for the goal, ignoring hazards.
    GoalSeeker { noise_std: T },
    /// Uniform actions over the action box.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Behavior<T> {
    Scripted(Controller<T>),
    Policy(GaussianPolicy<T>),
}

impl<T: Scalar> Controller<T> {
    /// The safe proportional speed tracker used by the default corpus.
    pub fn safe_speed() -> Self {
        Controller::SpeedTracker {
            target_lo: T::lit(0.75),
            target_hi: T::lit(1.0),
            gain: T::lit(10.0),
            noise_std: T::lit(0.3),
        }
    }

    /// Tracks a target above the limit, trading cost for reward.
    pub fn reckless_speed() -> Self {
        Controller::SpeedTracker {
            target_lo: T::lit(1.0),
            target_hi: T::lit(1.2),
            gain: T::lit(10.0),
            noise_std: T::lit(0.3),
        }
    }
}

pub(crate) struct ControllerActor<'a, T> {
    pub controller: &'a Controller<T>,
    pub env: &'a CmdpSpec<T>,
    target: T,
}

impl<'a, T: Scalar> ControllerActor<'a, T> {
    pub fn new(controller: &'a Controller<T>, env: &'a CmdpSpec<T>) -> Self {
        Self {
            controller,
            env,
            target: T::zero(),
        }
    }
}

fn noise<T: Scalar>(rng: &mut Prng, std: T) -> T {
    if std > T::zero() {
        let z: f64 = rng.sample(StandardNormal);
        std * T::lit(z)
    } else {
        T::zero()
    }
}

fn unit<T: Scalar>(v: [T; 2]) -> [T; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if n > T::lit(1e-12) {
        [v[0] / n, v[1] / n]
    } else {
        [T::zero(), T::zero()]
    }
}

impl<T: Scalar> Actor<T> for ControllerActor<'_, T> {
    fn reset(&mut self, rng: &mut Prng) {
        if let Controller::SpeedTracker {
            target_lo,
            target_hi,
            ..
        } = self.controller
        {
            let u: f64 = rng.random();
            self.target = *target_lo + (*target_hi - *target_lo) * T::lit(u);
        }
    }

    fn act(&mut self, state: &[T], rng: &mut Prng) -> Result<Vec<T>> {
        let env = self.env;
        Ok(match (self.controller, &env.dynamics) {
            (Controller::Uniform, _) => env
                .action_low
                .iter()
                .zip(&env.action_high)
                .map(|(&lo, &hi)| {
                    let u: f64 = rng.random();
                    lo + (hi - lo) * T::lit(u)
                })
                .collect(),
            (
                Controller::SpeedTracker {
                    gain, noise_std, ..
                },
                _,
            ) => vec![*gain * (self.target - state[1]) + noise(rng, *noise_std)],
            (
                Controller::GoalSeeker { noise_std },
                Dynamics::HazardNav { goal, .. },
            ) => {
                let step = env.action_high[0];
                let d = unit([goal[0] - state[0], goal[1] - state[1]]);
                let dist = ((goal[0] - state[0]).powi(2) + (goal[1] - state[1]).powi(2)).sqrt();
                let len = step.min(dist);
                vec![
                    d[0] * len + noise(rng, *noise_std),
                    d[1] * len + noise(rng, *noise_std),
                ]
            }
            (
                Controller::HazardAvoider { margin, noise_std },
                Dynamics::HazardNav {
                    goal,
                    hazards,
                    radius,
                    ..
                },
            ) => {
                let step = env.action_high[0];
                let to_goal = [goal[0] - state[0], goal[1] - state[1]];
                let dist = (to_goal[0] * to_goal[0] + to_goal[1] * to_goal[1]).sqrt();
                let g = unit(to_goal);
                let mut dir = g;
                let reach = *radius + *margin;
                for h in hazards {
                    let away = [state[0] - h[0], state[1] - h[1]];
                    let d = (away[0] * away[0] + away[1] * away[1]).sqrt();
                    if d < reach {
                        let w = (reach - d) / *margin;
                        let a = unit(away);
                        // tangent with a non-negative goal component
                        let mut tan = [-a[1], a[0]];
                        if tan[0] * g[0] + tan[1] * g[1] < T::zero() {
                            tan = [a[1], -a[0]];
                        }
                        let two = T::lit(2.0);
                        dir = [
                            dir[0] + two * w * a[0] + two * w * tan[0],
                            dir[1] + two * w * a[1] + two * w * tan[1],
                        ];
                    }
                }
                let dir = unit(dir);
                let len = step.min(dist);
                vec![
                    dir[0] * len + noise(rng, *noise_std),
                    dir[1] * len + noise(rng, *noise_std),
                ]
            }
            (_, _) => vec![T::zero(); env.action_dim],
        })
    }
}

pub(crate) struct BehaviorActor<'a, T> {
    inner: BehaviorActorKind<'a, T>,
}

enum BehaviorActorKind<'a, T> {
    Scripted(ControllerActor<'a, T>),
    Policy(&'a GaussianPolicy<T>),
}

impl<'a, T: Scalar> BehaviorActor<'a, T> {
    pub fn new(behavior: &'a Behavior<T>, env: &'a CmdpSpec<T>) -> Self {
        let inner = match behavior {
            Behavior::Scripted(c) => BehaviorActorKind::Scripted(ControllerActor::new(c, env)),
            Behavior::Policy(p) => BehaviorActorKind::Policy(p),
        };
        Self { inner }
    }
}

impl<T: Scalar> Actor<T> for BehaviorActor<'_, T> {
    fn reset(&mut self, rng: &mut Prng) {
        if let BehaviorActorKind::Scripted(c) = &mut self.inner {
            c.reset(rng);
        }
    }

    fn act(&mut self, state: &[T], rng: &mut Prng) -> Result<Vec<T>> {
        match &mut self.inner {
            BehaviorActorKind::Scripted(c) => c.act(state, rng),
            BehaviorActorKind::Policy(p) => {
                let mean = p.forward_mean(state)?;
                Ok(p.sample_at_mean(&mean, rng))
            }
        }
    }
}

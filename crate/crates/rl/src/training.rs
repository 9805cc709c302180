//! Episode loops: exploratory training with horizon-batched updates, and
//! deterministic evaluation.

use crate::env::Env;
use crate::ppo::{PpoAgent, Transition, UpdateStats};

/// Outcome of a training run. `returns` holds one (undiscounted, unscaled)
/// episode return per episode, in order.
#[derive(Debug, Clone)]
pub struct TrainingSummary {
    pub returns: Vec<f64>,
    pub faults: usize,
    pub rollbacks: usize,
}

/// Train for `n_episodes`. Transitions accumulate across episodes and the
/// agent updates every `cfg.rollout_horizon` episodes, so one update can see
/// several episodes worth of data; the buffer is cleared afterwards (a
/// trailing partial batch at the end of the run is dropped, matching the
/// update cadence). `on_episode` fires after every episode with its index,
/// return, and the stats of the update that just ran, if one did.
pub fn run_training(
    agent: &mut PpoAgent,
    env: &mut dyn Env,
    n_episodes: usize,
    mut on_episode: impl FnMut(usize, f64, Option<&UpdateStats>),
) -> TrainingSummary {
    let horizon = agent.cfg.rollout_horizon.max(1);
    let mut buf: Vec<Transition> = Vec::new();
    let mut returns = Vec::with_capacity(n_episodes);
    let mut faults = 0;
    let mut rollbacks = 0;

    for ep in 0..n_episodes {
        let mut o = env.reset();
        let mut ep_ret = 0.0;
        loop {
            let (action, raw, logp) = agent.act(&o, true);
            let r = env.step(action);
            buf.push(Transition {
                obs: o,
                raw,
                logp,
                reward: r.reward,
                done: if r.done { 1.0 } else { 0.0 },
                next_obs: r.obs,
            });
            ep_ret += r.reward;
            if r.fault {
                faults += 1;
            }
            o = r.obs;
            if r.done {
                break;
            }
        }
        returns.push(ep_ret);

        let stats = if (ep + 1) % horizon == 0 {
            let s = agent.update(&buf);
            buf.clear();
            if s.rolled_back {
                rollbacks += 1;
            }
            Some(s)
        } else {
            None
        };
        on_episode(ep, ep_ret, stats.as_ref());
    }

    TrainingSummary { returns, faults, rollbacks }
}

/// Roll the deterministic (mean-action) policy for `n_episodes`, returning
/// each episode's return. No randomness is consumed from the agent.
pub fn run_eval(agent: &mut PpoAgent, env: &mut dyn Env, n_episodes: usize) -> Vec<f64> {
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut o = env.reset();
        let mut ep_ret = 0.0;
        loop {
            let (action, _, _) = agent.act(&o, false);
            let r = env.step(action);
            ep_ret += r.reward;
            o = r.obs;
            if r.done {
                break;
            }
        }
        returns.push(ep_ret);
    }
    returns
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Obs, StepResult};
    use crate::ppo::PpoConfig;

    /// Scripted environment: fixed episode length, reward is the action, a
    /// fault on one designated step. Lets the loop mechanics be checked
    /// without any physics.
    struct Scripted {
        len: usize,
        t: usize,
        fault_at: Option<usize>,
        resets: usize,
    }

    impl Env for Scripted {
        fn reset(&mut self) -> Obs {
            self.t = 0;
            self.resets += 1;
            [0.0; 6]
        }

        fn step(&mut self, action: f64) -> StepResult {
            self.t += 1;
            let fault = self.fault_at == Some(self.t);
            StepResult {
                obs: [self.t as f64, 0.0, 0.0, 0.0, 0.0, 0.0],
                reward: action.clamp(-1.0, 1.0),
                done: fault || self.t >= self.len,
                fault,
            }
        }

        fn max_steps(&self) -> usize {
            self.len
        }
    }

    fn toy_agent(horizon: usize) -> PpoAgent {
        let cfg = PpoConfig { rollout_horizon: horizon, reward_scale: 10.0, ..PpoConfig::default() };
        PpoAgent::new(cfg, 0.2, [-8.0; 6], [16.0; 6], 0, 9)
    }

    #[test]
    fn returns_and_fault_counts_are_tracked() {
        let mut agent = toy_agent(1);
        let mut env = Scripted { len: 5, t: 0, fault_at: Some(3), resets: 0 };
        let summary = run_training(&mut agent, &mut env, 4, |_, _, _| {});
        assert_eq!(summary.returns.len(), 4);
        assert_eq!(summary.faults, 4, "every episode hits the scripted fault");
        assert_eq!(env.resets, 4);
    }

    #[test]
    fn updates_fire_on_the_horizon_boundary() {
        let mut agent = toy_agent(3);
        let mut env = Scripted { len: 4, t: 0, fault_at: None, resets: 0 };
        let mut update_eps = Vec::new();
        run_training(&mut agent, &mut env, 7, |ep, _, stats| {
            if stats.is_some() {
                update_eps.push(ep);
            }
        });
        // Updates after episodes 3 and 6 (1-based); the 7th episode's data is
        // a partial batch and is dropped.
        assert_eq!(update_eps, vec![2, 5]);
    }

    #[test]
    fn horizon_one_updates_every_episode() {
        let mut agent = toy_agent(1);
        let mut env = Scripted { len: 3, t: 0, fault_at: None, resets: 0 };
        let mut n_updates = 0;
        run_training(&mut agent, &mut env, 5, |_, _, s| n_updates += usize::from(s.is_some()));
        assert_eq!(n_updates, 5);
    }

    #[test]
    fn eval_is_deterministic_and_touches_no_agent_randomness() {
        let mut agent = toy_agent(1);
        let mut env = Scripted { len: 6, t: 0, fault_at: None, resets: 0 };
        let r1 = run_eval(&mut agent, &mut env, 3);
        let r2 = run_eval(&mut agent, &mut env, 3);
        assert_eq!(r1, r2);
        // All episodes identical: the scripted env has no randomness either.
        assert_eq!(r1[0], r1[1]);
    }
}

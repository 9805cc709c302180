//! Clipped-surrogate policy optimization with a Gaussian policy of fixed
//! exploration width.
//!
//! The actor maps a normalized observation to the mean of a Gaussian action
//! distribution; the critic regresses discounted returns. Updates reuse each
//! stored rollout for several epochs through importance ratios against the
//! behavior log-probabilities, with the ratio clipped so stale data cannot
//! drag the policy far. Advantages come from generalized advantage
//! estimation over the (possibly multi-episode) buffer and are standardized
//! per update.
//!
//! Exploration width zero degenerates gracefully: actions are the mean, no
//! randomness is consumed, and updates touch only the critic (the clipped
//! objective's gradient through a zero-width Gaussian is identically zero).

use crate::env::Obs;
use orclab_nn::checkpoint;
use orclab_nn::dense::{Act, Mlp};
use orclab_nn::flat::{Layout, TensorSpec};
use orclab_nn::{Adam, Mat, NnError};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::path::Path;

pub const ACTOR_SIZES: [usize; 4] = [6, 300, 200, 1];
pub const ACTOR_ACTS: [Act; 3] = [Act::Tanh, Act::Tanh, Act::Tanh];
pub const CRITIC_ACTS: [Act; 3] = [Act::Relu, Act::Relu, Act::Id];
/// Shrinks the actor's final layer so initial actions hug the midpoint.
pub const ACTOR_FINAL_SCALE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct PpoConfig {
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub clip: f64,
    pub gamma: f64,
    pub lam: f64,
    pub n_epoch: usize,
    pub minibatch: usize,
    /// Rewards are divided by this before the critic sees them.
    pub reward_scale: f64,
    /// Weight of the policy entropy in the reported objective. With a fixed
    /// exploration width the entropy does not depend on the parameters, so
    /// this term never produces a gradient; it is kept for the objective
    /// bookkeeping.
    pub entropy_coef: f64,
    /// Episodes accumulated per update.
    pub rollout_horizon: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            lr_actor: 2e-4,
            lr_critic: 3e-4,
            clip: 0.2,
            gamma: 0.9,
            lam: 0.95,
            n_epoch: 10,
            minibatch: 64,
            reward_scale: 100.0,
            entropy_coef: 0.0,
            rollout_horizon: 1,
        }
    }
}

/// One environment step as stored in the rollout buffer. `raw` is the
/// pre-clip action sample the log-probability refers to; `done` is 1.0 at
/// episode ends (including faults) and 0.0 otherwise.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub obs: Obs,
    pub raw: f64,
    pub logp: f64,
    pub reward: f64,
    pub done: f64,
    pub next_obs: Obs,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub actor_objective: f64,
    pub critic_loss: f64,
    /// True when a non-finite loss or gradient forced the update to restore
    /// the pre-update parameters (optimizer state is reset too).
    pub rolled_back: bool,
}

/// Log-density of a scalar Gaussian.
pub fn gaussian_logp(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Generalized advantage estimation over a buffer that may span several
/// episodes; `dones` cuts both the bootstrap and the recursion. `v_last`
/// bootstraps the final transition (irrelevant when it ends an episode).
pub fn gae(
    rews: &[f64],
    dones: &[f64],
    v: &[f64],
    v_last: f64,
    gamma: f64,
    lam: f64,
) -> Vec<f64> {
    let n = rews.len();
    let mut adv = vec![0.0; n];
    let mut a_next = 0.0;
    for t in (0..n).rev() {
        let v_next = if t == n - 1 { v_last } else { v[t + 1] };
        let nd = 1.0 - dones[t];
        let delta = rews[t] + gamma * v_next * nd - v[t];
        adv[t] = delta + gamma * lam * nd * a_next;
        a_next = adv[t];
    }
    adv
}

pub struct PpoAgent {
    pub cfg: PpoConfig,
    pub sigma: f64,
    pub actor: Mlp,
    pub critic: Mlp,
    opt_actor: Adam,
    opt_critic: Adam,
    obs_lo: [f64; 6],
    obs_scale: [f64; 6],
    rng: ChaCha12Rng,
}

impl PpoAgent {
    /// Fresh networks from `init_seed`; `sample_seed` drives exploration
    /// noise and minibatch shuffling. Keeping the two streams apart means a
    /// zero-width agent behaves identically whatever the sample seed.
    pub fn new(
        cfg: PpoConfig,
        sigma: f64,
        obs_lo: [f64; 6],
        obs_scale: [f64; 6],
        init_seed: u64,
        sample_seed: u64,
    ) -> Self {
        let mut init_rng = ChaCha12Rng::seed_from_u64(init_seed);
        let actor = Mlp::init(&ACTOR_SIZES, &ACTOR_ACTS, ACTOR_FINAL_SCALE, &mut init_rng);
        let critic = Mlp::init(&ACTOR_SIZES, &CRITIC_ACTS, 1.0, &mut init_rng);
        Self::from_networks(cfg, sigma, actor, critic, obs_lo, obs_scale, sample_seed)
    }

    /// Assemble an agent around existing networks (used by tests and by
    /// checkpoint loading). Optimizers start fresh.
    pub fn from_networks(
        cfg: PpoConfig,
        sigma: f64,
        actor: Mlp,
        critic: Mlp,
        obs_lo: [f64; 6],
        obs_scale: [f64; 6],
        sample_seed: u64,
    ) -> Self {
        let opt_actor = Adam::new(actor.params.len(), cfg.lr_actor);
        let opt_critic = Adam::new(critic.params.len(), cfg.lr_critic);
        PpoAgent {
            cfg,
            sigma,
            actor,
            critic,
            opt_actor,
            opt_critic,
            obs_lo,
            obs_scale,
            rng: ChaCha12Rng::seed_from_u64(sample_seed),
        }
    }

    fn nobs(&self, o: &Obs) -> [f64; 6] {
        let mut n = [0.0; 6];
        for c in 0..6 {
            n[c] = 2.0 * (o[c] - self.obs_lo[c]) / self.obs_scale[c] - 1.0;
        }
        n
    }

    fn nobs_mat(&self, rows: &[Obs]) -> Mat {
        let mut m = Mat::zeros(rows.len(), 6);
        for (r, o) in rows.iter().enumerate() {
            m.row_mut(r).copy_from_slice(&self.nobs(o));
        }
        m
    }

    /// Policy mean at an observation.
    pub fn mean_action(&self, o: &Obs) -> f64 {
        let x = self.nobs_mat(std::slice::from_ref(o));
        let (y, _) = self.actor.forward(&x);
        y.get(0, 0)
    }

    /// Sample (or evaluate) the policy. Returns `(action, raw, logp)`:
    /// `action` is clipped to `[-1, 1]`, `raw` is the unclipped sample the
    /// log-probability describes. Without exploration the mean is returned
    /// unclipped (environments clip) and no randomness is consumed.
    pub fn act(&mut self, o: &Obs, explore: bool) -> (f64, f64, f64) {
        let mu = self.mean_action(o);
        if !explore || self.sigma == 0.0 {
            return (mu, mu, 0.0);
        }
        let z: f64 = self.rng.sample(StandardNormal);
        let raw = mu + self.sigma * z;
        let logp = gaussian_logp(raw, mu, self.sigma);
        (raw.clamp(-1.0, 1.0), raw, logp)
    }

    /// Critic value at an observation (normalized-reward units).
    pub fn value(&self, o: &Obs) -> f64 {
        let x = self.nobs_mat(std::slice::from_ref(o));
        let (y, _) = self.critic.forward(&x);
        y.get(0, 0)
    }

    /// One PPO update over the accumulated rollout buffer. The buffer should
    /// end at an episode boundary. Restores the pre-update parameters and
    /// resets both optimizers if anything goes non-finite.
    pub fn update(&mut self, buf: &[Transition]) -> UpdateStats {
        assert!(!buf.is_empty(), "update needs at least one transition");
        let n = buf.len();
        let cfg = self.cfg.clone();

        let obs: Vec<Obs> = buf.iter().map(|t| t.obs).collect();
        let x_all = self.nobs_mat(&obs);
        let (v_mat, _) = self.critic.forward(&x_all);
        let v: Vec<f64> = (0..n).map(|i| v_mat.get(i, 0)).collect();
        let v_last = self.value(&buf[n - 1].next_obs);

        let rews: Vec<f64> = buf.iter().map(|t| t.reward / cfg.reward_scale).collect();
        let dones: Vec<f64> = buf.iter().map(|t| t.done).collect();
        let adv = gae(&rews, &dones, &v, v_last, cfg.gamma, cfg.lam);
        let ret: Vec<f64> = adv.iter().zip(&v).map(|(a, b)| a + b).collect();
        let mean = adv.iter().sum::<f64>() / n as f64;
        let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt() + 1e-8;
        let an: Vec<f64> = adv.iter().map(|a| (a - mean) / std).collect();

        let snapshot_actor = self.actor.params.clone();
        let snapshot_critic = self.critic.params.clone();
        let rollback = |agent: &mut Self, stats: &mut UpdateStats| {
            agent.actor.params.copy_from_slice(&snapshot_actor);
            agent.critic.params.copy_from_slice(&snapshot_critic);
            agent.opt_actor = Adam::new(agent.actor.params.len(), agent.cfg.lr_actor);
            agent.opt_critic = Adam::new(agent.critic.params.len(), agent.cfg.lr_critic);
            stats.rolled_back = true;
        };

        let mut stats = UpdateStats::default();
        let mut seen = 0usize;
        let mut clipped_count = 0usize;
        let entropy = if self.sigma > 0.0 {
            0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * self.sigma * self.sigma)
                .ln()
        } else {
            0.0
        };

        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..cfg.n_epoch {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(cfg.minibatch) {
                let b = chunk.len();
                let mut xb = Mat::zeros(b, 6);
                for (r, &i) in chunk.iter().enumerate() {
                    xb.row_mut(r).copy_from_slice(x_all.row(i));
                }

                if self.sigma > 0.0 {
                    let (mu_mat, cache) = self.actor.forward(&xb);
                    let mut dmu = Mat::zeros(b, 1);
                    for (r, &i) in chunk.iter().enumerate() {
                        let mu = mu_mat.get(r, 0);
                        let logp = gaussian_logp(buf[i].raw, mu, self.sigma);
                        let ratio = (logp - buf[i].logp).exp();
                        let a_b = an[i];
                        let unclipped = ratio * a_b;
                        let clipped =
                            ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * a_b;
                        let take = if unclipped <= clipped { 1.0 } else { 0.0 };
                        let dratio = -a_b * take / b as f64;
                        let dlogp = dratio * ratio;
                        dmu.set(r, 0, dlogp * (buf[i].raw - mu) / (self.sigma * self.sigma));

                        stats.mean_ratio += ratio;
                        stats.actor_objective +=
                            unclipped.min(clipped) + cfg.entropy_coef * entropy;
                        if ratio < 1.0 - cfg.clip || ratio > 1.0 + cfg.clip {
                            clipped_count += 1;
                        }
                    }
                    let (_, ga) = self.actor.backward(&cache, &dmu);
                    if self.opt_actor.step(&mut self.actor.params, &ga).is_err() {
                        rollback(self, &mut stats);
                        return stats;
                    }
                } else {
                    stats.mean_ratio += b as f64;
                }
                seen += b;

                let (vb, cache_c) = self.critic.forward(&xb);
                let mut dv = Mat::zeros(b, 1);
                for (r, &i) in chunk.iter().enumerate() {
                    let d = vb.get(r, 0) - ret[i];
                    dv.set(r, 0, 2.0 * d / b as f64);
                    stats.critic_loss += d * d;
                }
                let (_, gc) = self.critic.backward(&cache_c, &dv);
                if self.opt_critic.step(&mut self.critic.params, &gc).is_err() {
                    rollback(self, &mut stats);
                    return stats;
                }
            }
            let finite = self.actor.params.iter().chain(&self.critic.params).all(|p| p.is_finite());
            if !finite {
                rollback(self, &mut stats);
                return stats;
            }
        }

        stats.mean_ratio /= seen.max(1) as f64;
        stats.clip_fraction = clipped_count as f64 / seen.max(1) as f64;
        stats.actor_objective /= seen.max(1) as f64;
        stats.critic_loss /= seen.max(1) as f64;
        stats
    }

    pub fn get_params(&self) -> (Vec<f64>, Vec<f64>) {
        (self.actor.params.clone(), self.critic.params.clone())
    }

    /// Replace both networks and reset the optimizers (fresh moment
    /// estimates; stale ones would steer the first steps after a transfer).
    pub fn set_params(&mut self, actor: &[f64], critic: &[f64]) -> Result<(), NnError> {
        if actor.len() != self.actor.params.len() || critic.len() != self.critic.params.len() {
            return Err(NnError::ShapeMismatch {
                what: "policy parameters",
                expected: format!("{}+{}", self.actor.params.len(), self.critic.params.len()),
                got: format!("{}+{}", actor.len(), critic.len()),
            });
        }
        self.actor.params.copy_from_slice(actor);
        self.critic.params.copy_from_slice(critic);
        self.opt_actor = Adam::new(actor.len(), self.cfg.lr_actor);
        self.opt_critic = Adam::new(critic.len(), self.cfg.lr_critic);
        Ok(())
    }

    pub fn obs_bounds(&self) -> ([f64; 6], [f64; 6]) {
        (self.obs_lo, self.obs_scale)
    }
}

// ---------------------------------------------------------------------------
// Persistence

fn prefixed_mlp_tensors(prefix: &str, sizes: &[usize]) -> Vec<TensorSpec> {
    let mut tensors = Vec::new();
    for (i, w) in sizes.windows(2).enumerate() {
        tensors.push(TensorSpec::new(format!("{prefix}_w{i}"), vec![w[1], w[0]]));
        tensors.push(TensorSpec::new(format!("{prefix}_b{i}"), vec![w[1]]));
    }
    tensors
}

/// Layout of a policy checkpoint: actor, critic, observation bounds.
pub fn policy_layout() -> Layout {
    let mut tensors = prefixed_mlp_tensors("actor", &ACTOR_SIZES);
    tensors.extend(prefixed_mlp_tensors("critic", &ACTOR_SIZES));
    tensors.push(TensorSpec::new("obs_lo", vec![6]));
    tensors.push(TensorSpec::new("obs_scale", vec![6]));
    Layout { tensors }
}

pub fn save_policy(
    path: &Path,
    agent: &PpoAgent,
    metas: &[(&str, String)],
) -> Result<(), NnError> {
    let layout = policy_layout();
    let mut data = agent.actor.params.clone();
    data.extend_from_slice(&agent.critic.params);
    data.extend_from_slice(&agent.obs_lo);
    data.extend_from_slice(&agent.obs_scale);
    let mut all: Vec<(&str, String)> = vec![("sigma", agent.sigma.to_string())];
    all.extend(metas.iter().map(|(k, v)| (*k, v.clone())));
    checkpoint::save(path, &layout, &data, &all)
}

/// A reloaded policy checkpoint.
#[derive(Debug, Clone)]
pub struct PolicyCheckpoint {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub obs_lo: [f64; 6],
    pub obs_scale: [f64; 6],
    pub metas: Vec<(String, String)>,
}

pub fn load_policy(path: &Path) -> Result<PolicyCheckpoint, NnError> {
    let (layout, data, metas) = checkpoint::load(path)?;
    policy_layout().expect_eq(&layout)?;
    let n_net: usize = ACTOR_SIZES.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
    let actor = data[..n_net].to_vec();
    let critic = data[n_net..2 * n_net].to_vec();
    let mut obs_lo = [0.0; 6];
    let mut obs_scale = [0.0; 6];
    obs_lo.copy_from_slice(&data[2 * n_net..2 * n_net + 6]);
    obs_scale.copy_from_slice(&data[2 * n_net + 6..]);
    Ok(PolicyCheckpoint { actor, critic, obs_lo, obs_scale, metas })
}

impl PpoAgent {
    /// Rebuild an agent from a saved policy. `sigma` and the sample seed are
    /// fresh choices of the new run, not checkpoint properties.
    pub fn from_checkpoint(
        ckpt: &PolicyCheckpoint,
        cfg: PpoConfig,
        sigma: f64,
        sample_seed: u64,
    ) -> Result<Self, NnError> {
        let mut agent =
            PpoAgent::new(cfg, sigma, ckpt.obs_lo, ckpt.obs_scale, 0, sample_seed);
        agent.set_params(&ckpt.actor, &ckpt.critic)?;
        Ok(agent)
    }
}

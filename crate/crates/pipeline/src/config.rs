//! Experiment configuration: one TOML document that fully determines a run.
//!
//! Every randomized component draws from a seed that is either stated in the
//! config or derived from one by a fixed offset, so re-running any stage
//! with the same config reproduces its outputs bit for bit. The SHA-256
//! hash of the canonical re-serialization (comments and key order in the
//! file do not matter) stamps every output file.
//!
//! Environment seeds used for training and the scenario seeds used for
//! evaluation must be disjoint; [`ExperimentConfig::seed_plan`] expands both
//! sets and [`ExperimentConfig::validate`] enforces the disjointness rather
//! than trusting the defaults.

use crate::error::{PipelineError, Result};
use orclab_core::{Fluid, Plant, PlantParams, SolverSettings};
use orclab_rl::EpisodeMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::Path;

/// Offset added to a pre-training seed to seed the fixed-setpoint phase env.
pub const PRETRAIN_FIXED_ENV_OFFSET: u64 = 1000;
/// Offset added to a pre-training seed to seed the multi-setpoint phase env.
pub const PRETRAIN_MULTI_ENV_OFFSET: u64 = 2000;
/// Offset added to a fine-tune/scratch seed to seed its plant env.
pub const TRANSFER_ENV_OFFSET: u64 = 3000;
/// Offset from an agent's init seed to its action-sampling seed.
pub const SAMPLE_SEED_OFFSET: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiSection {
    pub kp: f64,
    pub ki: f64,
}

impl Default for PiSection {
    fn default() -> Self {
        PiSection { kp: 0.15, ki: 0.03 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSection {
    pub seed: u64,
    pub n_points: usize,
    /// Steps between setpoint redraws.
    pub setpoint_interval: usize,
    /// Std-dev of the per-step random-walk increment on the heat-source flow.
    pub sigma_walk: f64,
}

impl Default for CollectSection {
    fn default() -> Self {
        CollectSection {
            seed: 42,
            n_points: 10_000,
            setpoint_interval: 100,
            sigma_walk: orclab_rl::SIGMA_WALK,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    /// Drives minibatch order and input noise; `seed + 1` initializes the net.
    pub seed: u64,
    pub window: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout: f64,
    pub noise_sigma: f64,
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Rows before this index are the fit/train region, the rest is test.
    pub split: usize,
    pub patience: usize,
    pub min_delta: f64,
    /// Test-MSE gate a checkpoint must pass before pre-training may use it.
    pub validation_mse: f64,
    /// Plant scenario seeds for the paired free-run diagnostic.
    pub freerun_seeds: Vec<u64>,
    pub freerun_steps: usize,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        SurrogateSection {
            seed: 1,
            window: 10,
            hidden1: 80,
            hidden2: 100,
            dropout: 0.2,
            noise_sigma: 0.06,
            batch: 64,
            epochs: 15,
            lr: 1e-3,
            split: 8000,
            patience: 5,
            min_delta: 1e-5,
            validation_mse: 0.05,
            freerun_seeds: vec![101, 102, 103],
            freerun_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoSection {
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub clip: f64,
    pub gamma: f64,
    pub lam: f64,
    pub n_epoch: usize,
    pub minibatch: usize,
    pub reward_scale: f64,
    pub entropy_coef: f64,
}

impl Default for PpoSection {
    fn default() -> Self {
        PpoSection {
            lr_actor: 2e-4,
            lr_critic: 3e-4,
            clip: 0.2,
            gamma: 0.9,
            lam: 0.95,
            n_epoch: 10,
            minibatch: 64,
            reward_scale: 100.0,
            entropy_coef: 0.0,
        }
    }
}

impl PpoSection {
    pub fn to_ppo_config(&self, rollout_horizon: usize) -> orclab_rl::PpoConfig {
        orclab_rl::PpoConfig {
            lr_actor: self.lr_actor,
            lr_critic: self.lr_critic,
            clip: self.clip,
            gamma: self.gamma,
            lam: self.lam,
            n_epoch: self.n_epoch,
            minibatch: self.minibatch,
            reward_scale: self.reward_scale,
            entropy_coef: self.entropy_coef,
            rollout_horizon,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    pub seeds: Vec<u64>,
    pub episodes_fixed: usize,
    pub episodes_multi: usize,
    pub sigma: f64,
    pub rollout_horizon: usize,
}

impl Default for PretrainSection {
    fn default() -> Self {
        PretrainSection {
            seeds: vec![0, 1, 2],
            episodes_fixed: 150,
            episodes_multi: 80,
            sigma: 0.2,
            rollout_horizon: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSection {
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub sigma: f64,
    pub rollout_horizon: usize,
    pub mode: String,
}

impl Default for FinetuneSection {
    fn default() -> Self {
        FinetuneSection {
            seeds: vec![0, 1, 2],
            episodes: 200,
            sigma: 0.1,
            rollout_horizon: 4,
            mode: "fixed200".into(),
        }
    }
}

/// Scratch training deliberately has a single knob of its own: the episode
/// budget. Everything else (seeds, sigma, horizon, mode, environment seeds)
/// comes from the fine-tune section, so the two arms can only ever differ in
/// where the networks come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScratchSection {
    pub episodes: usize,
}

impl Default for ScratchSection {
    fn default() -> Self {
        ScratchSection { episodes: 2000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub scenario_seed_base: u64,
    pub n_scenarios: usize,
    /// Half-width (K) of the band used for settling-time measurement.
    pub settle_band: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection { scenario_seed_base: 9000, n_scenarios: 5, settle_band: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sigmas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub rollout_horizon: usize,
    pub env_seed_base: u64,
    /// Frozen scenario seeds for the deterministic final evaluation.
    pub eval_seed_base: u64,
    pub eval_scenarios: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            sigmas: vec![0.05, 0.1, 0.2, 0.35],
            seeds: vec![0, 1, 2],
            episodes: 120,
            rollout_horizon: 4,
            env_seed_base: 7000,
            eval_seed_base: 424_242,
            eval_scenarios: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub seed: u64,
    pub mode: String,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { seed: 7, mode: "multi500".into() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantParams,
    pub fluid: Fluid,
    pub solver: SolverSettings,
    pub pi: PiSection,
    pub collect: CollectSection,
    pub surrogate: SurrogateSection,
    pub ppo: PpoSection,
    pub pretrain: PretrainSection,
    pub finetune: FinetuneSection,
    pub scratch: ScratchSection,
    pub evaluate: EvaluateSection,
    pub sweep: SweepSection,
    pub simulate: SimulateSection,
}

/// The environment seeds a config expands to, split by purpose. Training
/// covers everything whose data can influence the learned controllers (the
/// collection rollout, surrogate diagnostics, and all training envs);
/// evaluation covers the held-out scenario seeds.
#[derive(Debug, Clone)]
pub struct SeedPlan {
    pub training: BTreeSet<u64>,
    pub evaluation: BTreeSet<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 over the canonical serialization, hex-encoded. Stable against
    /// comments, whitespace, and key order in the source file.
    pub fn hash(&self) -> String {
        let canon = toml::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_plant(&self) -> Plant {
        let mut plant = Plant::new(self.fluid.clone(), self.plant.clone());
        plant.solver = self.solver.clone();
        plant
    }

    pub fn finetune_mode(&self) -> EpisodeMode {
        EpisodeMode::parse(&self.finetune.mode).expect("validated")
    }

    pub fn simulate_mode(&self) -> EpisodeMode {
        EpisodeMode::parse(&self.simulate.mode).expect("validated")
    }

    pub fn surrogate_train_config(&self) -> orclab_nn::SurrogateTrainConfig {
        orclab_nn::SurrogateTrainConfig {
            batch: self.surrogate.batch,
            epochs: self.surrogate.epochs,
            lr: self.surrogate.lr,
            noise_sigma: self.surrogate.noise_sigma,
            patience: self.surrogate.patience,
            min_delta: self.surrogate.min_delta,
        }
    }

    /// Expand every environment seed the config will ever use.
    pub fn seed_plan(&self) -> SeedPlan {
        let mut training = BTreeSet::new();
        training.insert(self.collect.seed);
        training.insert(self.simulate.seed);
        training.extend(self.surrogate.freerun_seeds.iter().copied());
        for &s in &self.pretrain.seeds {
            training.insert(s + PRETRAIN_FIXED_ENV_OFFSET);
            training.insert(s + PRETRAIN_MULTI_ENV_OFFSET);
        }
        for &s in &self.finetune.seeds {
            training.insert(s + TRANSFER_ENV_OFFSET);
        }
        for &s in &self.sweep.seeds {
            training.insert(self.sweep.env_seed_base + s);
        }

        let mut evaluation = BTreeSet::new();
        for k in 0..self.evaluate.n_scenarios as u64 {
            evaluation.insert(self.evaluate.scenario_seed_base + k);
        }
        for j in 0..self.sweep.eval_scenarios as u64 {
            evaluation.insert(self.sweep.eval_seed_base + j);
        }
        SeedPlan { training, evaluation }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PipelineError::Config(msg));

        if !(self.pi.kp > 0.0) || !(self.pi.ki >= 0.0) {
            return bad(format!("pi gains out of range: kp {}, ki {}", self.pi.kp, self.pi.ki));
        }
        if self.collect.n_points == 0 || self.collect.setpoint_interval == 0 {
            return bad("collect.n_points and collect.setpoint_interval must be positive".into());
        }
        if !(self.collect.sigma_walk >= 0.0) {
            return bad(format!("collect.sigma_walk must be >= 0, got {}", self.collect.sigma_walk));
        }

        let s = &self.surrogate;
        if s.window < 2 {
            return bad(format!("surrogate.window must be >= 2, got {}", s.window));
        }
        if s.split <= s.window || s.split >= self.collect.n_points {
            return bad(format!(
                "surrogate.split ({}) must lie between the window ({}) and n_points ({})",
                s.split, s.window, self.collect.n_points
            ));
        }
        if s.hidden1 == 0 || s.hidden2 == 0 || s.batch == 0 {
            return bad("surrogate layer and batch sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&s.dropout) {
            return bad(format!("surrogate.dropout must be in [0, 1), got {}", s.dropout));
        }
        if !(s.lr > 0.0) || !(s.noise_sigma >= 0.0) || !(s.validation_mse > 0.0) {
            return bad("surrogate.lr, noise_sigma, validation_mse out of range".into());
        }
        if s.freerun_seeds.is_empty() || s.freerun_steps == 0 {
            return bad("surrogate free-run diagnostic needs seeds and steps".into());
        }

        let p = &self.ppo;
        if !(p.gamma > 0.0 && p.gamma <= 1.0) || !(p.lam > 0.0 && p.lam <= 1.0) {
            return bad(format!("ppo.gamma ({}) and ppo.lam ({}) must be in (0, 1]", p.gamma, p.lam));
        }
        if !(p.clip > 0.0 && p.clip < 1.0) {
            return bad(format!("ppo.clip must be in (0, 1), got {}", p.clip));
        }
        if p.n_epoch == 0 || p.minibatch == 0 {
            return bad("ppo.n_epoch and ppo.minibatch must be positive".into());
        }
        if !(p.lr_actor > 0.0) || !(p.lr_critic > 0.0) || !(p.reward_scale > 0.0) {
            return bad("ppo learning rates and reward_scale must be positive".into());
        }

        for (name, seeds) in [
            ("pretrain", &self.pretrain.seeds),
            ("finetune", &self.finetune.seeds),
            ("sweep", &self.sweep.seeds),
        ] {
            if seeds.is_empty() {
                return bad(format!("{name}.seeds must not be empty"));
            }
        }
        for (name, sigma) in [
            ("pretrain.sigma", self.pretrain.sigma),
            ("finetune.sigma", self.finetune.sigma),
        ] {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return bad(format!("{name} must be a finite value >= 0, got {sigma}"));
            }
        }
        if self.pretrain.episodes_fixed == 0
            || self.pretrain.episodes_multi == 0
            || self.pretrain.rollout_horizon == 0
        {
            return bad("pretrain episode budgets and rollout_horizon must be positive".into());
        }
        if self.finetune.episodes == 0
            || self.finetune.rollout_horizon == 0
            || self.scratch.episodes == 0
        {
            return bad("finetune/scratch episode budgets and horizon must be positive".into());
        }
        if EpisodeMode::parse(&self.finetune.mode).is_none() {
            return bad(format!("finetune.mode unknown: {:?}", self.finetune.mode));
        }
        if EpisodeMode::parse(&self.simulate.mode).is_none() {
            return bad(format!("simulate.mode unknown: {:?}", self.simulate.mode));
        }

        if self.evaluate.n_scenarios == 0 || !(self.evaluate.settle_band > 0.0) {
            return bad("evaluate.n_scenarios and settle_band must be positive".into());
        }
        let w = &self.sweep;
        if w.sigmas.is_empty() || w.episodes == 0 || w.eval_scenarios == 0 || w.rollout_horizon == 0
        {
            return bad("sweep.sigmas, episodes, eval_scenarios, rollout_horizon must be set".into());
        }
        if w.sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad(format!("sweep.sigmas must be positive and finite: {:?}", w.sigmas));
        }

        let pp = &self.plant;
        if !(pp.omega_p_range[0] < pp.omega_p_range[1]) {
            return bad(format!("plant.omega_p_range must be increasing: {:?}", pp.omega_p_range));
        }
        if !(pp.m_a_lo <= pp.m_a_nom && pp.m_a_nom <= pp.m_a_hi) {
            return bad(format!(
                "plant heat-source flow bounds must bracket the nominal: lo {}, nom {}, hi {}",
                pp.m_a_lo, pp.m_a_nom, pp.m_a_hi
            ));
        }

        let plan = self.seed_plan();
        let clash: Vec<u64> = plan.training.intersection(&plan.evaluation).copied().collect();
        if !clash.is_empty() {
            return bad(format!(
                "evaluation scenario seeds collide with training-side seeds: {clash:?}"
            ));
        }
        Ok(())
    }
}

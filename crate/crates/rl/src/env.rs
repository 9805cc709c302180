//! The superheat-tracking decision process, backed either by the mechanistic
//! plant or by the learned surrogate.
//!
//! Conventions shared by both backends:
//!
//! - observation `[P_e, T_oe, m_a(t), omega_p(t), SH, err]`, where
//!   `omega_p(t)` is the standing pump speed (applied over the step that
//!   produced this observation) and `m_a(t)` is the gas flow that will apply
//!   over the next step;
//! - action in `[-1, 1]`, mapped affinely onto the pump speed range;
//! - the reward scores the post-step error together with the change in
//!   commanded action, so setpoint changes (every 100 steps) bite on the
//!   reward of the step that crosses them;
//! - a faulted plant step ends the episode: the observation stays stale, the
//!   step reward is computed from it and docked by the worst band value, and
//!   neither the step counter nor the action memory advances.

use crate::reward::{reward, FAULT_PENALTY};
use orclab_core::{EvaporatorState, Plant};
use orclab_nn::surrogate::{roll_step, N_CHANNELS};
use orclab_nn::{Mat, Normalizer, SurrogateNet};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Setpoint draw range (K superheat).
pub const SETPOINT_RANGE: (f64, f64) = (10.0, 30.0);
/// Std-dev of the per-step gas-flow random walk (kg/s).
pub const SIGMA_WALK: f64 = 0.008;

/// Episode shapes used across the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeMode {
    /// 200 steps, a single setpoint.
    Fixed200,
    /// 500 steps, a new setpoint every 100 steps.
    Multi500,
}

impl EpisodeMode {
    pub fn max_steps(self) -> usize {
        match self {
            EpisodeMode::Fixed200 => 200,
            EpisodeMode::Multi500 => 500,
        }
    }

    pub fn n_setpoints(self) -> usize {
        match self {
            EpisodeMode::Fixed200 => 1,
            EpisodeMode::Multi500 => 5,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "fixed200" => Some(EpisodeMode::Fixed200),
            "multi500" => Some(EpisodeMode::Multi500),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EpisodeMode::Fixed200 => "fixed200",
            EpisodeMode::Multi500 => "multi500",
        }
    }
}

/// Observation vector; see the module docs for the channel meanings.
pub type Obs = [f64; 6];

#[derive(Debug, Clone, Copy)]
pub struct StepResult {
    pub obs: Obs,
    pub reward: f64,
    pub done: bool,
    pub fault: bool,
}

/// Common interface the training loop drives.
pub trait Env {
    fn reset(&mut self) -> Obs;
    fn step(&mut self, action: f64) -> StepResult;
    fn max_steps(&self) -> usize;
}

/// Draws the episode's setpoint schedule and gas-flow walk. The walk has
/// `max_steps + 1` entries so the terminal observation still has a value.
pub fn draw_schedules(
    rng: &mut ChaCha12Rng,
    mode: EpisodeMode,
    m_a_nom: f64,
    m_a_lo: f64,
    m_a_hi: f64,
) -> (Vec<f64>, Vec<f64>) {
    let sps = (0..mode.n_setpoints())
        .map(|_| rng.gen_range(SETPOINT_RANGE.0..SETPOINT_RANGE.1))
        .collect();
    let mut dist = Vec::with_capacity(mode.max_steps() + 1);
    dist.push(m_a_nom);
    for k in 1..=mode.max_steps() {
        let z: f64 = rng.sample(StandardNormal);
        dist.push((dist[k - 1] + SIGMA_WALK * z).clamp(m_a_lo, m_a_hi));
    }
    (sps, dist)
}

pub fn setpoint_at(sps: &[f64], t: usize) -> f64 {
    sps[(t / 100).min(sps.len() - 1)]
}

// ---------------------------------------------------------------------------
// Mechanistic backend

pub struct PlantEnv {
    pub plant: Plant,
    eq: EvaporatorState,
    rng: ChaCha12Rng,
    mode: EpisodeMode,
    /// Reset perturbation half-widths: wall temperatures (K) and the
    /// subcooled zone length (m).
    pub band_tw: f64,
    pub band_l1: f64,
    state: EvaporatorState,
    sps: Vec<f64>,
    dist: Vec<f64>,
    t: usize,
    u_prev: f64,
    om_prev: f64,
    done: bool,
}

impl PlantEnv {
    /// `eq` is the nominal equilibrium used as the reset anchor; resets
    /// perturb the differential states around it and re-solve the algebraic
    /// ones so every episode starts from a consistent state.
    pub fn new(plant: Plant, eq: EvaporatorState, seed: u64, mode: EpisodeMode) -> Self {
        let om_mid = plant.params.omega_p_mid();
        PlantEnv {
            plant,
            eq,
            rng: ChaCha12Rng::seed_from_u64(seed),
            mode,
            band_tw: 1.0,
            band_l1: 0.1,
            state: eq,
            sps: Vec::new(),
            dist: Vec::new(),
            t: 0,
            u_prev: 0.0,
            om_prev: om_mid,
            done: false,
        }
    }

    pub fn setpoint(&self) -> f64 {
        setpoint_at(&self.sps, self.t)
    }

    pub fn observe(&self) -> Obs {
        let sh = self
            .plant
            .superheat(&self.state)
            .expect("superheat at a state the solver accepted");
        let t_oe = self
            .plant
            .fluid
            .t_from_ph(self.state.p_e, self.state.h_o)
            .expect("outlet temperature at a state the solver accepted");
        [self.state.p_e, t_oe, self.dist[self.t], self.om_prev, sh, sh - self.setpoint()]
    }
}

impl Env for PlantEnv {
    fn reset(&mut self) -> Obs {
        let pp = &self.plant.params;
        let (sps, dist) =
            draw_schedules(&mut self.rng, self.mode, pp.m_a_nom, pp.m_a_lo, pp.m_a_hi);
        self.sps = sps;
        self.dist = dist;
        let om_mid = self.plant.params.omega_p_mid();

        // Randomize the slow states, then restore algebraic consistency.
        // A perturbation the solver rejects is redrawn; after several misses
        // the episode starts from the unperturbed equilibrium.
        self.state = self.eq;
        for _ in 0..8 {
            let mut cand = self.eq;
            cand.t_w1 += self.rng.gen_range(-self.band_tw..self.band_tw);
            cand.t_w2 += self.rng.gen_range(-self.band_tw..self.band_tw);
            cand.t_w3 += self.rng.gen_range(-self.band_tw..self.band_tw);
            cand.l1 += self.rng.gen_range(-self.band_l1..self.band_l1);
            let pp = &self.plant.params;
            if let Ok((resolved, _)) = self.plant.resolve_consistent(
                &cand,
                om_mid,
                pp.omega_x_nom,
                pp.m_a_nom,
                pp.t_a_nom,
            ) {
                self.state = resolved;
                break;
            }
        }
        self.t = 0;
        self.u_prev = 0.0;
        self.om_prev = om_mid;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: f64) -> StepResult {
        let a = action.clamp(-1.0, 1.0);
        let pp = &self.plant.params;
        let om = pp.speed_from_action(a);
        match self.plant.step(
            &self.state,
            om,
            pp.omega_x_nom,
            self.dist[self.t],
            pp.t_a_nom,
            Some(self.om_prev),
        ) {
            Err(_) => {
                // Stale observation, worst band docked on top; the episode
                // ends here and the action memory stays untouched.
                let obs = self.observe();
                let r = reward(obs[5], a - self.u_prev) + FAULT_PENALTY;
                self.done = true;
                StepResult { obs, reward: r, done: true, fault: true }
            }
            Ok((next, _)) => {
                self.state = next;
                self.om_prev = om;
                self.t += 1;
                let obs = self.observe();
                let r = reward(obs[5], a - self.u_prev);
                self.u_prev = a;
                self.done = self.t >= self.mode.max_steps();
                StepResult { obs, reward: r, done: self.done, fault: false }
            }
        }
    }

    fn max_steps(&self) -> usize {
        self.mode.max_steps()
    }
}

// ---------------------------------------------------------------------------
// Surrogate backend

/// Bounds the surrogate environment needs from the plant description.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateEnvBounds {
    pub omega_p_min: f64,
    pub omega_p_max: f64,
    pub m_a_nom: f64,
    pub m_a_lo: f64,
    pub m_a_hi: f64,
}

impl SurrogateEnvBounds {
    pub fn from_params(pp: &orclab_core::PlantParams) -> Self {
        SurrogateEnvBounds {
            omega_p_min: pp.omega_p_range[0],
            omega_p_max: pp.omega_p_range[1],
            m_a_nom: pp.m_a_nom,
            m_a_lo: pp.m_a_lo,
            m_a_hi: pp.m_a_hi,
        }
    }
}

/// Same decision process, but the dynamics come from the learned one-step
/// model rolled forward on its own predictions. Channels the environment
/// owns (gas flow, standing speed, error) are overwritten after every
/// prediction; the rest feed back.
pub struct SurrogateEnv {
    net: SurrogateNet,
    norm: Normalizer,
    obs_eq: Obs,
    bounds: SurrogateEnvBounds,
    rng: ChaCha12Rng,
    mode: EpisodeMode,
    /// Half-width of the superheat offset drawn at reset (K).
    pub band_sh: f64,
    window: Mat,
    sps: Vec<f64>,
    dist: Vec<f64>,
    t: usize,
    u_prev: f64,
    done: bool,
}

impl SurrogateEnv {
    /// `obs_eq` is the observation at the plant's nominal equilibrium; resets
    /// start from it with a randomized superheat offset.
    pub fn new(
        net: SurrogateNet,
        norm: Normalizer,
        obs_eq: Obs,
        bounds: SurrogateEnvBounds,
        seed: u64,
        mode: EpisodeMode,
    ) -> Self {
        assert_eq!(norm.n_channels(), N_CHANNELS, "normalizer channel count");
        SurrogateEnv {
            net,
            norm,
            obs_eq,
            bounds,
            rng: ChaCha12Rng::seed_from_u64(seed),
            mode,
            band_sh: 2.0,
            window: Mat::zeros(0, 0),
            sps: Vec::new(),
            dist: Vec::new(),
            t: 0,
            u_prev: 0.0,
            done: false,
        }
    }

    fn om_mid(&self) -> f64 {
        0.5 * (self.bounds.omega_p_min + self.bounds.omega_p_max)
    }

    fn om_half(&self) -> f64 {
        0.5 * (self.bounds.omega_p_max - self.bounds.omega_p_min)
    }

    pub fn setpoint(&self) -> f64 {
        setpoint_at(&self.sps, self.t)
    }

    /// Window length the rolled model sees.
    pub const WINDOW: usize = 10;
}

impl Env for SurrogateEnv {
    fn reset(&mut self) -> Obs {
        let b = self.bounds;
        let (sps, dist) =
            draw_schedules(&mut self.rng, self.mode, b.m_a_nom, b.m_a_lo, b.m_a_hi);
        self.sps = sps;
        self.dist = dist;
        let mut o = self.obs_eq;
        // One shared offset on superheat and outlet temperature: superheat
        // moves one-for-one with outlet temperature at fixed pressure.
        let d = self.rng.gen_range(-self.band_sh..self.band_sh);
        o[4] += d;
        o[1] += d;
        o[2] = self.dist[0];
        o[3] = self.om_mid();
        self.t = 0;
        o[5] = o[4] - self.setpoint();
        self.u_prev = 0.0;
        self.window = Mat::from_fn(Self::WINDOW, N_CHANNELS, |_, c| {
            if c < 6 {
                o[c]
            } else {
                0.0
            }
        });
        self.done = false;
        o
    }

    fn step(&mut self, action: f64) -> StepResult {
        let a = action.clamp(-1.0, 1.0);
        self.t += 1;
        let om = self.om_mid() + self.om_half() * a;
        let sp = self.setpoint();
        let pred = roll_step(
            &self.net,
            &self.norm,
            &mut self.window,
            a,
            Some(self.dist[self.t]),
            Some(om),
            Some(sp),
        )
        .expect("window shape is fixed by construction");
        let obs: Obs = pred.as_slice().try_into().expect("six predicted channels");
        let r = reward(obs[5], a - self.u_prev);
        self.u_prev = a;
        self.done = self.t >= self.mode.max_steps();
        StepResult { obs, reward: r, done: self.done, fault: false }
    }

    fn max_steps(&self) -> usize {
        self.mode.max_steps()
    }
}

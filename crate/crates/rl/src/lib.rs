//! Reinforcement learning for superheat tracking: the decision process over
//! the mechanistic plant or its learned surrogate, the banded tracking
//! reward, a clipped-objective policy-gradient agent, and the episode loops
//! that tie them together.

pub mod env;
pub mod gradcheck;
pub mod ppo;
pub mod reward;
pub mod toy;
pub mod training;

pub use env::{
    draw_schedules, setpoint_at, EpisodeMode, Env, Obs, PlantEnv, StepResult, SurrogateEnv,
    SurrogateEnvBounds, SETPOINT_RANGE, SIGMA_WALK,
};
pub use ppo::{
    gae, gaussian_logp, load_policy, policy_layout, save_policy, PolicyCheckpoint, PpoAgent,
    PpoConfig, Transition, UpdateStats,
};
pub use reward::{reward, BAND_EDGES, BAND_VALUES, FAULT_PENALTY};
pub use toy::{ToyEnv, TOY_OBS_LO, TOY_OBS_SCALE, TOY_STEPS};
pub use training::{run_eval, run_training, TrainingSummary};

//! Fast end-to-end check of the learning stack: train on the scalar
//! tracking toy for 200 episodes and report early/late returns, then roll an
//! untrained policy through one mechanistic plant episode to exercise the
//! environment plumbing.

use anyhow::Result;
use orclab_core::{Fluid, Plant, PlantParams};
use orclab_rl::{
    run_training, EpisodeMode, Env, PlantEnv, PpoAgent, PpoConfig, ToyEnv, TOY_OBS_LO,
    TOY_OBS_SCALE,
};
use std::time::Instant;

fn main() -> Result<()> {
    let t0 = Instant::now();
    let cfg = PpoConfig { reward_scale: 10.0, ..PpoConfig::default() };
    let mut agent = PpoAgent::new(cfg, 0.2, TOY_OBS_LO, TOY_OBS_SCALE, 0, 9);
    let mut env = ToyEnv::new(100);
    let summary = run_training(&mut agent, &mut env, 200, |_, _, _| {});
    let early: f64 = summary.returns[..20].iter().sum::<f64>() / 20.0;
    let late: f64 = summary.returns[180..].iter().sum::<f64>() / 20.0;
    println!(
        "toy: early {early:8.1}  late {late:8.1}  rollbacks {}  ({:.1?})",
        summary.rollbacks,
        t0.elapsed()
    );
    assert!(late > early && late > -30.0, "toy learning regressed");

    let t1 = Instant::now();
    let plant = Plant::new(Fluid::default(), PlantParams::default());
    let eq = plant.nominal_equilibrium()?;
    let mut penv = PlantEnv::new(plant, eq, 7, EpisodeMode::Fixed200);
    let cfg = PpoConfig::default();
    let mut fresh = PpoAgent::new(
        cfg,
        0.2,
        [5e5, 350.0, 0.33, 16.0, 0.0, -20.0],
        [5e5, 80.0, 0.14, 7.5, 40.0, 40.0],
        1,
        2,
    );
    let mut o = penv.reset();
    let mut ret = 0.0;
    let mut steps = 0;
    loop {
        let (a, _, _) = fresh.act(&o, true);
        let r = penv.step(a);
        ret += r.reward;
        steps += 1;
        o = r.obs;
        if r.done {
            break;
        }
    }
    println!("plant episode: {steps} steps, return {ret:9.1}  ({:.1?})", t1.elapsed());
    Ok(())
}

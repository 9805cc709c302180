//! Closed-loop demo: PI superheat control of the mechanistic plant under a
//! setpoint step and a wandering heat-source flow.
//!
//! Run with `cargo run -p orclab-core --example closed_loop`.

use orclab_core::pi::PiController;
use orclab_core::{Plant, PlantError};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let plant = Plant::default();

    let eq = plant.nominal_equilibrium().expect("equilibrium search failed");
    let sh0 = plant.superheat(&eq).expect("superheat");
    println!("equilibrium: p_e = {:.1} Pa, SH = {:.4} K", eq.p_e, sh0);

    // Setpoint step 25 K -> 20 K at t = 100 s, heat-source flow random walk.
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut state = eq;
    let mut pi = PiController::new(0.15, 0.03);
    let mut m_a = plant.params.m_a_nom;
    let t_a = plant.params.t_a_nom;
    let mut omega = plant.params.omega_p_mid();
    let mut iae = 0.0;
    for step in 0..300u32 {
        let sp = if step < 100 { 25.0 } else { 20.0 };
        let sh = plant.superheat(&state).expect("superheat");
        let e = sh - sp;
        iae += e.abs();
        let u = pi.step(e, 1.0);
        let omega_new = plant.params.speed_from_action(u);
        let z: f64 = StandardNormal.sample(&mut rng);
        m_a = (m_a + 0.008 * z).clamp(plant.params.m_a_lo, plant.params.m_a_hi);
        let (next, out) = plant
            .step(&state, omega_new, plant.params.omega_x_nom, m_a, t_a, Some(omega))
            .unwrap_or_else(|err| panic!("fault at step {step}: {err}"));
        if step % 50 == 0 {
            println!(
                "step {step:3}  sp {sp:4.1}  SH {sh:7.3} K  omega {omega_new:6.3}  m_a {m_a:.4}  W_x {:7.1} W",
                out.w_x
            );
        }
        state = next;
        omega = omega_new;
    }
    let sh_end = plant.superheat(&state).expect("superheat");
    println!("final SH = {sh_end:.3} K (setpoint 20.0), IAE = {iae:.1} K s");

    // What the error surface looks like when a step cannot be completed.
    match plant.step(&eq, omega, plant.params.omega_x_nom, 0.0, t_a, None) {
        Err(PlantError::StepFault { source, .. }) => {
            println!("degenerate heat-source flow -> fault: {source}");
        }
        other => println!("degenerate heat-source flow -> unexpected: {other:?}"),
    }
    let mut bad = eq;
    bad.h_o = 3.0e5;
    match plant.step(&bad, omega, plant.params.omega_x_nom, m_a, t_a, None) {
        Err(e) => println!("subcooled expander inlet    -> fault: {e}"),
        Ok(_) => println!("subcooled expander inlet    -> unexpected success"),
    }
}

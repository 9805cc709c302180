//! Finite-difference validation of the policy-gradient arithmetic: the
//! Gaussian log-density gradient pushed through the actor network, and the
//! clipped importance-ratio objective with both clip branches active.
//!
//! Each runner builds a small random actor, computes the analytic gradient
//! exactly the way the learner does, and compares it coordinate by
//! coordinate against central differences. The returned value is the worst
//! relative error; anything at or above `orclab_nn::gradcheck::GRAD_TOL`
//! means the backward pass disagrees with the objective it claims to
//! differentiate.

use crate::ppo::gaussian_logp;
use orclab_nn::dense::{Act, Mlp};
use orclab_nn::gradcheck::worst_rel_err;
use orclab_nn::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

const SIZES: [usize; 4] = [6, 16, 12, 1];
const ACTS: [Act; 3] = [Act::Tanh, Act::Tanh, Act::Tanh];
const SIGMA: f64 = 0.2;
const CLIP: f64 = 0.2;

fn random_actor(rng: &mut ChaCha12Rng) -> Mlp {
    Mlp::init(&SIZES, &ACTS, 1.0, rng)
}

fn random_batch(n: usize, rng: &mut ChaCha12Rng) -> Mat {
    Mat::from_fn(n, 6, |_, _| rng.gen_range(-1.0..1.0))
}

fn with_params(reference: &Mlp, params: &[f64]) -> Mlp {
    Mlp { sizes: reference.sizes.clone(), acts: reference.acts.clone(), params: params.to_vec() }
}

/// Gradient of a weighted sum of Gaussian log-densities with respect to the
/// actor parameters, where the actor supplies the mean.
pub fn check_gaussian_logp(seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let actor = random_actor(&mut rng);
    let n = 8;
    let x = random_batch(n, &mut rng);

    let (mu0, cache) = actor.forward(&x);
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            mu0.get(i, 0) + SIGMA * z
        })
        .collect();
    let w: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();

    // d logp / d mu = (raw - mu) / sigma^2.
    let mut dy = Mat::zeros(n, 1);
    for i in 0..n {
        dy.set(i, 0, w[i] * (raw[i] - mu0.get(i, 0)) / (SIGMA * SIGMA));
    }
    let (_, analytic) = actor.backward(&cache, &dy);

    let loss = |p: &[f64]| {
        let net = with_params(&actor, p);
        let (mu, _) = net.forward(&x);
        (0..n).map(|i| w[i] * gaussian_logp(raw[i], mu.get(i, 0), SIGMA)).sum()
    };
    let coords: Vec<usize> = (0..actor.params.len()).collect();
    let mut params = actor.params.clone();
    worst_rel_err(&mut params, &analytic, &coords, loss)
}

/// Gradient of the clipped-ratio policy loss. The behavior log-probabilities
/// are offset so that some ratios sit well inside the clip band and others
/// well outside it, with enough margin that the finite-difference probe
/// never crosses a kink; advantages of both signs make both the clipped and
/// the unclipped branch of the `min` active somewhere in the batch.
pub fn check_clipped_objective(seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let actor = random_actor(&mut rng);
    let n = 12;
    let x = random_batch(n, &mut rng);

    let (mu0, cache) = actor.forward(&x);
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            mu0.get(i, 0) + SIGMA * z
        })
        .collect();
    let adv: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    // Even samples: ratio near 1 (inside the band). Odd samples: ratio
    // pushed outside the band (exp(0.25) > 1.2 and exp(-0.25) < 0.8).
    let logp_old: Vec<f64> = (0..n)
        .map(|i| {
            let truth = gaussian_logp(raw[i], mu0.get(i, 0), SIGMA);
            let off = if i % 2 == 0 {
                rng.gen_range(-0.1..0.1)
            } else {
                rng.gen_range(0.25..0.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
            };
            truth + off
        })
        .collect();

    // Analytic gradient, exactly as the update rule computes it.
    let mut dy = Mat::zeros(n, 1);
    let mut takes = 0;
    for i in 0..n {
        let mu = mu0.get(i, 0);
        let logp = gaussian_logp(raw[i], mu, SIGMA);
        let ratio = (logp - logp_old[i]).exp();
        let unclipped = ratio * adv[i];
        let clipped = ratio.clamp(1.0 - CLIP, 1.0 + CLIP) * adv[i];
        let take = if unclipped <= clipped { 1.0 } else { 0.0 };
        takes += take as usize;
        let dratio = -adv[i] * take / n as f64;
        dy.set(i, 0, dratio * ratio * (raw[i] - mu) / (SIGMA * SIGMA));
    }
    assert!(takes > 0 && takes < n, "fixture must exercise both min branches");
    let (_, analytic) = actor.backward(&cache, &dy);

    let loss = |p: &[f64]| {
        let net = with_params(&actor, p);
        let (mu, _) = net.forward(&x);
        -(0..n)
            .map(|i| {
                let ratio = (gaussian_logp(raw[i], mu.get(i, 0), SIGMA) - logp_old[i]).exp();
                (ratio * adv[i]).min(ratio.clamp(1.0 - CLIP, 1.0 + CLIP) * adv[i])
            })
            .sum::<f64>()
            / n as f64
    };
    let coords: Vec<usize> = (0..actor.params.len()).collect();
    let mut params = actor.params.clone();
    worst_rel_err(&mut params, &analytic, &coords, loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use orclab_nn::gradcheck::GRAD_TOL;

    #[test]
    fn gaussian_logp_gradient_passes_three_seeds() {
        for seed in [21, 22, 23] {
            let worst = check_gaussian_logp(seed);
            assert!(worst < GRAD_TOL, "seed {seed}: worst {worst:.3e}");
        }
    }

    #[test]
    fn clipped_objective_gradient_passes_three_seeds() {
        for seed in [31, 32, 33] {
            let worst = check_clipped_objective(seed);
            assert!(worst < GRAD_TOL, "seed {seed}: worst {worst:.3e}");
        }
    }

    #[test]
    fn a_corrupted_gradient_would_be_caught() {
        // Same setup as the log-prob check but with the sign flipped on the
        // analytic side: the relative error must blow past the tolerance.
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let actor = random_actor(&mut rng);
        let x = random_batch(4, &mut rng);
        let (mu0, cache) = actor.forward(&x);
        let raw: Vec<f64> =
            (0..4).map(|i| mu0.get(i, 0) + SIGMA * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut dy = Mat::zeros(4, 1);
        for (i, r) in raw.iter().enumerate() {
            // Deliberately wrong: missing the 1/sigma^2 factor.
            dy.set(i, 0, r - mu0.get(i, 0));
        }
        let (_, bad) = actor.backward(&cache, &dy);
        let loss = |p: &[f64]| {
            let net = with_params(&actor, p);
            let (mu, _) = net.forward(&x);
            (0..4).map(|i| gaussian_logp(raw[i], mu.get(i, 0), SIGMA)).sum()
        };
        let coords: Vec<usize> = (0..actor.params.len()).collect();
        let mut params = actor.params.clone();
        let worst = worst_rel_err(&mut params, &bad, &coords, loss);
        assert!(worst > GRAD_TOL * 100.0, "wrong gradient slipped through: {worst:.3e}");
    }
}

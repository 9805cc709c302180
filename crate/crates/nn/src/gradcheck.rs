//! Central-difference verification of analytic gradients.
//!
//! Every backward pass in this workspace is hand-written, so each layer kind
//! gets a runner that builds a small random instance, computes analytic
//! parameter gradients, and compares them against finite differences. The
//! relative error uses a symmetric denominator so it stays meaningful when
//! one side is tiny.

use crate::dense::{Act, Mlp};
use crate::lstm::Lstm;
use crate::mat::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Perturbation used by all finite-difference checks.
pub const FD_EPS: f64 = 1e-5;

/// Threshold a healthy hand-written gradient should beat with `FD_EPS`.
pub const GRAD_TOL: f64 = 1e-4;

pub fn relative_error(numeric: f64, analytic: f64) -> f64 {
    (numeric - analytic).abs() / f64::max(1e-12, numeric.abs() + analytic.abs())
}

/// Evenly strided coordinate sample covering `[0, n)`, at most `max_checks`
/// entries. Striding (rather than a random subset) touches every tensor in a
/// flat parameter vector.
pub fn strided_coords(n: usize, max_checks: usize) -> Vec<usize> {
    if n <= max_checks {
        return (0..n).collect();
    }
    let stride = n.div_ceil(max_checks);
    (0..n).step_by(stride).collect()
}

/// Worst relative error between `analytic` and central differences of `loss`
/// over the given coordinates. `params` is restored before returning. A net
/// with no parameters trivially checks out at 0.
pub fn worst_rel_err(
    params: &mut [f64],
    analytic: &[f64],
    coords: &[usize],
    mut loss: impl FnMut(&[f64]) -> f64,
) -> f64 {
    assert_eq!(params.len(), analytic.len(), "gradient length vs parameters");
    let mut worst = 0.0f64;
    for &i in coords {
        let orig = params[i];
        params[i] = orig + FD_EPS;
        let up = loss(params);
        params[i] = orig - FD_EPS;
        let down = loss(params);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * FD_EPS);
        worst = worst.max(relative_error(numeric, analytic[i]));
    }
    worst
}

/// Gradient check for a small mixed-activation MLP under a random weighted
/// sum of its outputs. Returns the worst relative error over all parameters.
pub fn check_dense(seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sizes = [5, 8, 6, 2];
    let acts = [Act::Tanh, Act::Relu, Act::Id];
    let mut net = Mlp::init(&sizes, &acts, 1.0, &mut rng);
    // Zero biases put every relu input exactly on its kink for a zero input,
    // so randomize them and keep inputs generic.
    for v in net.params.iter_mut() {
        if *v == 0.0 {
            *v = rng.gen_range(-0.3..0.3);
        }
    }
    let x = Mat::from_fn(3, 5, |_, _| rng.gen_range(-1.0..1.0));
    let w = Mat::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));

    let (_, cache) = net.forward(&x);
    let (_, analytic) = net.backward(&cache, &w);

    let mut probe = net.clone();
    let coords: Vec<usize> = (0..probe.params.len()).collect();
    let mut params = probe.params.clone();
    let worst = worst_rel_err(&mut params, &analytic, &coords, |p| {
        probe.params.copy_from_slice(p);
        let (y, _) = probe.forward(&x);
        y.data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
    });
    worst
}

/// Gradient check for a recurrent layer unrolled over several timesteps,
/// under a random weighted sum of every hidden state it emits. Exercises the
/// full backpropagation through time, including the carry paths.
pub fn check_lstm(seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let layer = Lstm::new(3, 4);
    let mut params = vec![0.0; layer.n_params()];
    layer.init(&mut params, &mut rng);
    let steps = 5;
    let batch = 2;
    let xs: Vec<Mat> = (0..steps)
        .map(|_| Mat::from_fn(batch, 3, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let ws: Vec<Mat> = (0..steps)
        .map(|_| Mat::from_fn(batch, 4, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();

    let (_, cache) = layer.forward(&params, &xs);
    let (_, analytic) = layer.backward(&params, &xs, &cache, &ws);

    let coords: Vec<usize> = (0..params.len()).collect();
    worst_rel_err(&mut params, &analytic, &coords, |p| {
        let (hs, _) = layer.forward(p, &xs);
        hs.iter()
            .zip(&ws)
            .map(|(h, w)| h.data.iter().zip(&w.data).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_parameter_vector_checks_out() {
        let worst = worst_rel_err(&mut [], &[], &[], |_| 0.0);
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn linear_loss_matches_to_machine_precision() {
        let mut params = vec![0.7, -1.2, 3.0];
        let analytic = vec![2.0, -4.0, 0.5];
        let coords = [0, 1, 2];
        let worst = worst_rel_err(&mut params, &analytic, &coords, |p| {
            2.0 * p[0] - 4.0 * p[1] + 0.5 * p[2]
        });
        assert!(worst < 1e-9, "worst {worst}");
    }

    #[test]
    fn deliberately_wrong_gradient_is_flagged() {
        let mut params = vec![0.5];
        let analytic = vec![2.0 * 0.5 * 1.5]; // off by 1.5x
        let worst = worst_rel_err(&mut params, &analytic, &[0], |p| p[0] * p[0]);
        assert!(worst > 0.1, "worst {worst}");
    }

    #[test]
    fn params_are_restored_after_probing() {
        let mut params = vec![1.0, 2.0];
        let before = params.clone();
        let _ = worst_rel_err(&mut params, &[1.0, 1.0], &[0, 1], |p| p[0] + p[1]);
        assert_eq!(params, before);
    }

    #[test]
    fn dense_gradients_pass_across_seeds() {
        for seed in [11, 12, 13] {
            let worst = check_dense(seed);
            assert!(worst < GRAD_TOL, "seed {seed}: worst {worst}");
        }
    }

    #[test]
    fn lstm_gradients_pass_across_seeds() {
        for seed in [11, 12, 13] {
            let worst = check_lstm(seed);
            assert!(worst < GRAD_TOL, "seed {seed}: worst {worst}");
        }
    }

    #[test]
    fn strided_sampling_covers_the_range() {
        let coords = strided_coords(1000, 64);
        assert!(coords.len() <= 64);
        assert_eq!(coords[0], 0);
        assert!(*coords.last().unwrap() >= 1000 - 16);
        let all = strided_coords(10, 64);
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}

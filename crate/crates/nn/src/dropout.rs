//! Inverted dropout masks. Only training code draws masks; inference paths
//! simply never apply one, which keeps evaluation deterministic.

use crate::mat::Mat;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// A keep/zero mask scaled by `1/(1-rate)` so activations keep their
/// expected magnitude. Multiply element-wise into the activation matrix on
/// the forward pass and into its upstream gradient on the backward pass.
pub fn mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha12Rng) -> Mat {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    let keep_scale = 1.0 / (1.0 - rate);
    Mat::from_fn(rows, cols, |_, _| {
        if rng.gen::<f64>() >= rate {
            keep_scale
        } else {
            0.0
        }
    })
}

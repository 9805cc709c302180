//! First-order moment optimizer with bias correction.

use crate::error::NnError;

/// Adam over a flat parameter vector. Moments persist across calls; `t` is
/// the update count used for bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam { lr, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// Apply one update in place. A non-finite gradient rejects the whole
    /// update: parameters, moments, and the step count stay untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::ShapeMismatch {
                what: "optimizer state vs parameters",
                expected: self.m.len().to_string(),
                got: format!("params {}, grads {}", params.len(), grads.len()),
            });
        }
        if !grads.iter().all(|g| g.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= self.lr * mh / (vh.sqrt() + EPS);
        }
        Ok(())
    }
}

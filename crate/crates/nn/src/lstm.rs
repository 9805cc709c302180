//! LSTM layer with hand-derived backpropagation through time.
//!
//! Gate blocks are stored in the order input, forget, candidate, output
//! within the stacked weight matrices. The layer does not own parameters;
//! callers pass the slice that belongs to it, which keeps whole networks in
//! one contiguous vector.

use crate::mat::{accumulate_outer, matmul_nn, matmul_nt, Mat};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Shape descriptor for one LSTM layer; parameters are
/// `[w_ih (4H, n_in) | w_hh (4H, H) | b (4H)]` in the layer's slice.
#[derive(Debug, Clone, Copy)]
pub struct Lstm {
    pub n_in: usize,
    pub n_h: usize,
}

/// Per-timestep intermediates kept for the backward pass.
pub struct LstmCache {
    steps: Vec<StepCache>,
}

struct StepCache {
    h_prev: Mat,
    c_prev: Mat,
    i: Mat,
    f: Mat,
    g: Mat,
    o: Mat,
    tc: Mat,
}

impl Lstm {
    pub fn new(n_in: usize, n_h: usize) -> Self {
        Lstm { n_in, n_h }
    }

    pub fn n_params(&self) -> usize {
        4 * self.n_h * (self.n_in + self.n_h) + 4 * self.n_h
    }

    fn wih_end(&self) -> usize {
        4 * self.n_h * self.n_in
    }

    fn whh_end(&self) -> usize {
        self.wih_end() + 4 * self.n_h * self.n_h
    }

    /// Uniform `1/sqrt(fan_in)` weights, zero biases except the forget-gate
    /// block at +1 so early training does not dump the cell state.
    pub fn init(&self, p: &mut [f64], rng: &mut ChaCha12Rng) {
        assert_eq!(p.len(), self.n_params(), "lstm parameter slice");
        let s_ih = 1.0 / (self.n_in as f64).sqrt();
        let s_hh = 1.0 / (self.n_h as f64).sqrt();
        let (wih, rest) = p.split_at_mut(self.wih_end());
        let (whh, b) = rest.split_at_mut(4 * self.n_h * self.n_h);
        for v in wih {
            *v = rng.gen_range(-s_ih..s_ih);
        }
        for v in whh {
            *v = rng.gen_range(-s_hh..s_hh);
        }
        b.fill(0.0);
        b[self.n_h..2 * self.n_h].fill(1.0);
    }

    fn wih(&self, p: &[f64]) -> Mat {
        Mat { rows: 4 * self.n_h, cols: self.n_in, data: p[..self.wih_end()].to_vec() }
    }

    fn whh(&self, p: &[f64]) -> Mat {
        Mat { rows: 4 * self.n_h, cols: self.n_h, data: p[self.wih_end()..self.whh_end()].to_vec() }
    }

    /// Run the sequence `xs` (one `(B, n_in)` matrix per timestep) from zero
    /// initial hidden and cell state. Returns the hidden sequence and cache.
    pub fn forward(&self, p: &[f64], xs: &[Mat]) -> (Vec<Mat>, LstmCache) {
        assert_eq!(p.len(), self.n_params(), "lstm parameter slice");
        let b_all = &p[self.whh_end()..];
        let wih = self.wih(p);
        let whh = self.whh(p);
        let batch = xs.first().map_or(0, |x| x.rows);
        let h_dim = self.n_h;
        let mut h = Mat::zeros(batch, h_dim);
        let mut c = Mat::zeros(batch, h_dim);
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            assert_eq!(x.cols, self.n_in, "lstm input width");
            let mut z = matmul_nt(x, &wih);
            let zh = matmul_nt(&h, &whh);
            for (zv, hv) in z.data.iter_mut().zip(&zh.data) {
                *zv += hv;
            }
            for r in 0..batch {
                let row = z.row_mut(r);
                for (v, bv) in row.iter_mut().zip(b_all) {
                    *v += bv;
                }
            }
            let mut i = Mat::zeros(batch, h_dim);
            let mut f = Mat::zeros(batch, h_dim);
            let mut g = Mat::zeros(batch, h_dim);
            let mut o = Mat::zeros(batch, h_dim);
            for r in 0..batch {
                let zr = z.row(r);
                for k in 0..h_dim {
                    i.set(r, k, sigmoid(zr[k]));
                    f.set(r, k, sigmoid(zr[h_dim + k]));
                    g.set(r, k, zr[2 * h_dim + k].tanh());
                    o.set(r, k, sigmoid(zr[3 * h_dim + k]));
                }
            }
            let mut c_new = Mat::zeros(batch, h_dim);
            let mut tc = Mat::zeros(batch, h_dim);
            let mut h_new = Mat::zeros(batch, h_dim);
            for idx in 0..batch * h_dim {
                c_new.data[idx] = f.data[idx] * c.data[idx] + i.data[idx] * g.data[idx];
                tc.data[idx] = c_new.data[idx].tanh();
                h_new.data[idx] = o.data[idx] * tc.data[idx];
            }
            steps.push(StepCache { h_prev: h, c_prev: c, i, f, g, o, tc: tc.clone() });
            h = h_new.clone();
            c = c_new;
            hs.push(h_new);
        }
        (hs, LstmCache { steps })
    }

    /// Backward through time. `dhs` carries dLoss/d(h_t) for every timestep;
    /// `xs` must be the same sequence given to `forward`. Returns per-step
    /// input gradients and this layer's parameter gradients.
    pub fn backward(
        &self,
        p: &[f64],
        xs: &[Mat],
        cache: &LstmCache,
        dhs: &[Mat],
    ) -> (Vec<Mat>, Vec<f64>) {
        assert_eq!(xs.len(), cache.steps.len(), "sequence length vs cache");
        assert_eq!(dhs.len(), cache.steps.len(), "upstream grads vs cache");
        let wih = self.wih(p);
        let whh = self.whh(p);
        let mut grads = vec![0.0; self.n_params()];
        let batch = xs.first().map_or(0, |x| x.rows);
        let h_dim = self.n_h;
        let mut dx = vec![Mat::zeros(batch, self.n_in); xs.len()];
        let mut dh_next = Mat::zeros(batch, h_dim);
        let mut dc_next = Mat::zeros(batch, h_dim);
        for t in (0..xs.len()).rev() {
            let s = &cache.steps[t];
            let mut dz = Mat::zeros(batch, 4 * h_dim);
            for idx in 0..batch * h_dim {
                let dh = dhs[t].data[idx] + dh_next.data[idx];
                let do_ = dh * s.tc.data[idx];
                let dc = dh * s.o.data[idx] * (1.0 - s.tc.data[idx] * s.tc.data[idx])
                    + dc_next.data[idx];
                let di = dc * s.g.data[idx];
                let df = dc * s.c_prev.data[idx];
                let dg = dc * s.i.data[idx];
                dc_next.data[idx] = dc * s.f.data[idx];
                let (r, k) = (idx / h_dim, idx % h_dim);
                let iv = s.i.data[idx];
                let fv = s.f.data[idx];
                let gv = s.g.data[idx];
                let ov = s.o.data[idx];
                dz.set(r, k, di * iv * (1.0 - iv));
                dz.set(r, h_dim + k, df * fv * (1.0 - fv));
                dz.set(r, 2 * h_dim + k, dg * (1.0 - gv * gv));
                dz.set(r, 3 * h_dim + k, do_ * ov * (1.0 - ov));
            }
            let (gw_ih, rest) = grads.split_at_mut(self.wih_end());
            let (gw_hh, gb) = rest.split_at_mut(4 * h_dim * h_dim);
            accumulate_outer(gw_ih, &dz, &xs[t]);
            accumulate_outer(gw_hh, &dz, &s.h_prev);
            for r in 0..batch {
                for (g, v) in gb.iter_mut().zip(dz.row(r)) {
                    *g += v;
                }
            }
            dx[t] = matmul_nn(&dz, &wih);
            dh_next = matmul_nn(&dz, &whh);
        }
        (dx, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_seq(rng: &mut ChaCha12Rng, t: usize, b: usize, dim: usize) -> Vec<Mat> {
        (0..t)
            .map(|_| Mat::from_fn(b, dim, |_, _| StandardNormal.sample(rng)))
            .collect()
    }

    #[test]
    fn saturated_gates_freeze_the_cell() {
        let layer = Lstm::new(3, 4);
        let mut p = vec![0.0; layer.n_params()];
        // Zero weights; input gate pinned shut, forget gate pinned open,
        // candidate bias nonzero so a leak would be visible.
        let b_off = layer.whh_end();
        p[b_off..b_off + 4].fill(-100.0);
        p[b_off + 4..b_off + 8].fill(100.0);
        p[b_off + 8..b_off + 12].fill(0.7);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let xs = random_seq(&mut rng, 6, 2, 3);
        let (hs, cache) = layer.forward(&p, &xs);
        for s in &cache.steps {
            for &c in &s.c_prev.data {
                assert!(c.abs() < 1e-40, "cell state leaked: {c}");
            }
        }
        for h in &hs {
            for &v in &h.data {
                assert!(v.abs() < 1e-40, "hidden state leaked: {v}");
            }
        }
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let layer = Lstm::new(5, 6);
        let mut p = vec![0.0; layer.n_params()];
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        layer.init(&mut p, &mut rng);
        let b = &p[layer.whh_end()..];
        assert!(b[..6].iter().all(|&v| v == 0.0));
        assert!(b[6..12].iter().all(|&v| v == 1.0));
        assert!(b[12..].iter().all(|&v| v == 0.0));
        let bound_ih = 1.0 / (5.0f64).sqrt();
        assert!(p[..layer.wih_end()].iter().all(|&v| v.abs() < bound_ih));
    }

    #[test]
    fn bptt_gradients_match_finite_differences() {
        let layer = Lstm::new(3, 4);
        let mut p = vec![0.0; layer.n_params()];
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        layer.init(&mut p, &mut rng);
        let xs = random_seq(&mut rng, 5, 2, 3);
        // Scalar loss: sum over all timesteps of sum(h_t).
        let loss = |p: &[f64]| -> f64 {
            let (hs, _) = layer.forward(p, &xs);
            hs.iter().map(|h| h.data.iter().sum::<f64>()).sum()
        };
        let (hs, cache) = layer.forward(&p, &xs);
        let dhs: Vec<Mat> = hs.iter().map(|h| Mat::from_fn(h.rows, h.cols, |_, _| 1.0)).collect();
        let (_, grads) = layer.backward(&p, &xs, &cache, &dhs);
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for k in (0..p.len()).step_by(7) {
            let old = p[k];
            p[k] = old + eps;
            let lp = loss(&p);
            p[k] = old - eps;
            let lm = loss(&p);
            p[k] = old;
            let num = (lp - lm) / (2.0 * eps);
            let rel = (num - grads[k]).abs() / (num.abs() + grads[k].abs()).max(1e-12);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn input_gradients_flow_back_through_time() {
        // The loss reads only the final hidden state; earlier inputs must
        // still receive gradient through the recurrence.
        let layer = Lstm::new(2, 3);
        let mut p = vec![0.0; layer.n_params()];
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        layer.init(&mut p, &mut rng);
        let xs = random_seq(&mut rng, 4, 1, 2);
        let (hs, cache) = layer.forward(&p, &xs);
        let mut dhs: Vec<Mat> = hs.iter().map(|h| Mat::zeros(h.rows, h.cols)).collect();
        dhs[3] = Mat::from_fn(1, 3, |_, _| 1.0);
        let (dx, _) = layer.backward(&p, &xs, &cache, &dhs);
        assert!(dx[0].data.iter().any(|&v| v.abs() > 1e-12));
    }
}

//! Fully-connected stacks with hand-derived reverse-mode gradients.

use crate::flat::{Layout, TensorSpec};
use crate::mat::{accumulate_outer, matmul_nn, matmul_nt, Mat};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Activation applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Tanh,
    Relu,
    Id,
}

impl Act {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Act::Tanh => x.tanh(),
            Act::Relu => x.max(0.0),
            Act::Id => x,
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    pub fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Act::Tanh => 1.0 - y * y,
            Act::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Act::Id => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Act::Tanh => "tanh",
            Act::Relu => "relu",
            Act::Id => "id",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Act::Tanh),
            "relu" => Some(Act::Relu),
            "id" => Some(Act::Id),
            _ => None,
        }
    }
}

/// Multi-layer perceptron. Parameters live in one contiguous vector,
/// `[w0 | b0 | w1 | b1 | ...]` with weights stored row-major `(out, in)`,
/// so the optimizer, checkpoints, and gradient checks all see a flat slice.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub acts: Vec<Act>,
    pub params: Vec<f64>,
}

/// Cached activations from a forward pass; `hs[0]` is the input batch.
pub struct MlpCache {
    pub hs: Vec<Mat>,
}

impl Mlp {
    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases.
    /// `final_scale` shrinks the last weight matrix (a near-zero policy head
    /// keeps early actions close to the operating point).
    pub fn init(sizes: &[usize], acts: &[Act], final_scale: f64, rng: &mut ChaCha12Rng) -> Self {
        assert_eq!(sizes.len(), acts.len() + 1, "one activation per layer");
        let mut params = Vec::with_capacity(Self::count_params(sizes));
        for i in 0..acts.len() {
            let (n_in, n_out) = (sizes[i], sizes[i + 1]);
            let s = 1.0 / (n_in as f64).sqrt();
            let scale = if i == acts.len() - 1 { final_scale } else { 1.0 };
            for _ in 0..n_out * n_in {
                params.push(scale * rng.gen_range(-s..s));
            }
            params.extend(std::iter::repeat(0.0).take(n_out));
        }
        Mlp { sizes: sizes.to_vec(), acts: acts.to_vec(), params }
    }

    fn count_params(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn n_params(&self) -> usize {
        Self::count_params(&self.sizes)
    }

    /// Offset of layer `i`'s weight block; the bias block follows it.
    fn offset(&self, layer: usize) -> usize {
        self.sizes
            .windows(2)
            .take(layer)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    fn weight(&self, layer: usize) -> Mat {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.offset(layer);
        Mat { rows: n_out, cols: n_in, data: self.params[off..off + n_out * n_in].to_vec() }
    }

    fn bias(&self, layer: usize) -> &[f64] {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.offset(layer) + n_out * n_in;
        &self.params[off..off + n_out]
    }

    pub fn layout(&self) -> Layout {
        let mut tensors = Vec::new();
        for i in 0..self.acts.len() {
            tensors.push(TensorSpec::new(format!("w{i}"), vec![self.sizes[i + 1], self.sizes[i]]));
            tensors.push(TensorSpec::new(format!("b{i}"), vec![self.sizes[i + 1]]));
        }
        Layout { tensors }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, MlpCache) {
        assert_eq!(x.cols, self.sizes[0], "input width vs first layer");
        let mut hs = vec![x.clone()];
        let mut h = x.clone();
        for (i, &act) in self.acts.iter().enumerate() {
            let w = self.weight(i);
            let b = self.bias(i);
            let mut z = matmul_nt(&h, &w);
            for r in 0..z.rows {
                let row = z.row_mut(r);
                for (v, bv) in row.iter_mut().zip(b) {
                    *v = act.apply(*v + bv);
                }
            }
            h = z.clone();
            hs.push(z);
        }
        (h, MlpCache { hs })
    }

    /// Gradient of a scalar loss wrt parameters and input, given `dy` =
    /// dLoss/d(output). Returns `(dx, grads)` with `grads` laid out like
    /// `params`.
    pub fn backward(&self, cache: &MlpCache, dy: &Mat) -> (Mat, Vec<f64>) {
        let mut grads = vec![0.0; self.params.len()];
        let mut dh = dy.clone();
        for i in (0..self.acts.len()).rev() {
            let act = self.acts[i];
            let h_in = &cache.hs[i];
            let h_out = &cache.hs[i + 1];
            let mut dz = dh;
            for r in 0..dz.rows {
                for c in 0..dz.cols {
                    let d = act.deriv_from_output(h_out.get(r, c));
                    dz.set(r, c, dz.get(r, c) * d);
                }
            }
            let (n_in, n_out) = (self.sizes[i], self.sizes[i + 1]);
            let off = self.offset(i);
            accumulate_outer(&mut grads[off..off + n_out * n_in], &dz, h_in);
            let bg = &mut grads[off + n_out * n_in..off + n_out * n_in + n_out];
            for r in 0..dz.rows {
                for (g, v) in bg.iter_mut().zip(dz.row(r)) {
                    *g += v;
                }
            }
            dh = matmul_nn(&dz, &self.weight(i));
        }
        (dh, grads)
    }
}

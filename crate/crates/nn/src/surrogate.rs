//! Recurrent one-step plant model learned from closed-loop operating data.
//!
//! The net maps a sliding window of operating records to the next record.
//! Each record has seven channels: evaporating pressure, expander outlet
//! temperature, heat-source gas flow, pump speed, superheat, tracking error,
//! and the speed command applied during that step. The first six channels of
//! the following record are the regression target.
//!
//! Architecture: two stacked recurrent layers (dropout on the stack outputs,
//! raw recurrent paths) and a linear head on the final hidden state. Windows
//! hold physical values; normalization to `[-1, 1]` happens at net entry, and
//! predictions are clamped to twice that band before denormalizing so a bad
//! step cannot fling a rollout out of the fitted range.

use crate::adam::Adam;
use crate::checkpoint;
use crate::dropout;
use crate::error::NnError;
use crate::flat::{Layout, TensorSpec};
use crate::lstm::{Lstm, LstmCache};
use crate::mat::{accumulate_outer, matmul_nn, matmul_nt, Mat};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::path::Path;

/// Channels in one operating record (action included).
pub const N_CHANNELS: usize = 7;
/// Channels the net predicts (everything except the action).
pub const N_TARGETS: usize = 6;

// ---------------------------------------------------------------------------
// Normalization

/// Per-channel min-max map to `[-1, 1]`, fitted on a training prefix.
/// A channel that never moves gets scale 1 so the map stays invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub lo: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    /// Fit on the first `n_fit` rows of `rows` (all rows if `n_fit` exceeds
    /// the row count).
    pub fn fit(rows: &Mat, n_fit: usize) -> Self {
        let n = n_fit.min(rows.rows);
        assert!(n > 0, "cannot fit a normalizer on zero rows");
        let mut lo = vec![f64::INFINITY; rows.cols];
        let mut hi = vec![f64::NEG_INFINITY; rows.cols];
        for r in 0..n {
            for (c, &v) in rows.row(r).iter().enumerate() {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        let scale = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| if h == l { 1.0 } else { h - l })
            .collect();
        Normalizer { lo, scale }
    }

    pub fn n_channels(&self) -> usize {
        self.lo.len()
    }

    pub fn normalize_value(&self, channel: usize, v: f64) -> f64 {
        2.0 * (v - self.lo[channel]) / self.scale[channel] - 1.0
    }

    pub fn denormalize_value(&self, channel: usize, n: f64) -> f64 {
        self.lo[channel] + (n + 1.0) * self.scale[channel] / 2.0
    }

    pub fn normalize_rows(&self, m: &Mat) -> Mat {
        assert_eq!(m.cols, self.n_channels(), "channel count");
        Mat::from_fn(m.rows, m.cols, |r, c| self.normalize_value(c, m.get(r, c)))
    }
}

// ---------------------------------------------------------------------------
// Window dataset

/// Normalized operating records cut into overlapping windows. A window
/// starting at `k` spans rows `[k, k+window)` and its target is row
/// `k+window`; windows that straddle a recording gap are dropped, and the
/// train/test split is by target index so no test target leaks into training.
#[derive(Debug, Clone)]
pub struct WindowDataset {
    pub data: Mat,
    pub window: usize,
    pub train_starts: Vec<usize>,
    pub test_starts: Vec<usize>,
}

impl WindowDataset {
    /// `gaps` lists row indices that began a fresh recording after a restart;
    /// a window is kept only if no gap index `g` satisfies `k < g <= k+window`.
    pub fn build(
        data: Mat,
        gaps: &[usize],
        window: usize,
        split_at: usize,
    ) -> Result<Self, NnError> {
        assert_eq!(data.cols, N_CHANNELS, "record channel count");
        if data.rows <= window {
            return Err(NnError::TrajectoryTooShort { len: data.rows, window });
        }
        let ok = |k: usize| !gaps.iter().any(|&g| g > k && g <= k + window);
        let mut train_starts = Vec::new();
        let mut test_starts = Vec::new();
        for k in 0..data.rows - window {
            if !ok(k) {
                continue;
            }
            if k + window < split_at {
                train_starts.push(k);
            } else {
                test_starts.push(k);
            }
        }
        Ok(WindowDataset { data, window, train_starts, test_starts })
    }

    /// Assemble a batch: per-timestep input matrices `(b, 7)` plus the
    /// `(b, 6)` target block. `noise` perturbs every input entry (training
    /// only; targets stay clean).
    pub fn gather(
        &self,
        starts: &[usize],
        noise: Option<(f64, &mut ChaCha12Rng)>,
    ) -> (Vec<Mat>, Mat) {
        let b = starts.len();
        let mut xs: Vec<Mat> = (0..self.window)
            .map(|t| {
                Mat::from_fn(b, N_CHANNELS, |i, c| self.data.get(starts[i] + t, c))
            })
            .collect();
        if let Some((sigma, rng)) = noise {
            for x in &mut xs {
                for v in x.data.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += sigma * z;
                }
            }
        }
        let targets =
            Mat::from_fn(b, N_TARGETS, |i, c| self.data.get(starts[i] + self.window, c));
        (xs, targets)
    }
}

// ---------------------------------------------------------------------------
// The network

#[derive(Debug, Clone)]
pub struct SurrogateNet {
    pub l1: Lstm,
    pub l2: Lstm,
    pub n_out: usize,
    pub drop_rate: f64,
    pub params: Vec<f64>,
}

/// Everything the backward pass needs from a forward pass.
pub struct SurrogateCache {
    c1: LstmCache,
    c2: LstmCache,
    hs1_dropped: Vec<Mat>,
    h_last: Mat,
    masks: Option<(Vec<Mat>, Vec<Mat>)>,
}

impl SurrogateNet {
    pub fn new(
        n_in: usize,
        h1: usize,
        h2: usize,
        n_out: usize,
        drop_rate: f64,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let l1 = Lstm::new(n_in, h1);
        let l2 = Lstm::new(h1, h2);
        let n = l1.n_params() + l2.n_params() + n_out * h2 + n_out;
        let mut params = vec![0.0; n];
        let (o1, o2) = (l1.n_params(), l1.n_params() + l2.n_params());
        l1.init(&mut params[..o1], rng);
        l2.init(&mut params[o1..o2], rng);
        let s = 1.0 / (h2 as f64).sqrt();
        for v in &mut params[o2..o2 + n_out * h2] {
            *v = rng.gen_range(-s..s);
        }
        SurrogateNet { l1, l2, n_out, drop_rate, params }
    }

    /// Production shape used throughout the pipeline.
    pub fn standard(rng: &mut ChaCha12Rng) -> Self {
        Self::new(N_CHANNELS, 80, 100, N_TARGETS, 0.2, rng)
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let o1 = self.l1.n_params();
        let o2 = o1 + self.l2.n_params();
        let o3 = o2 + self.n_out * self.l2.n_h;
        (o1, o2, o3)
    }

    pub fn layout(&self) -> Layout {
        let (h1, h2) = (self.l1.n_h, self.l2.n_h);
        Layout {
            tensors: vec![
                TensorSpec::new("lstm1_wih", vec![4 * h1, self.l1.n_in]),
                TensorSpec::new("lstm1_whh", vec![4 * h1, h1]),
                TensorSpec::new("lstm1_b", vec![4 * h1]),
                TensorSpec::new("lstm2_wih", vec![4 * h2, h1]),
                TensorSpec::new("lstm2_whh", vec![4 * h2, h2]),
                TensorSpec::new("lstm2_b", vec![4 * h2]),
                TensorSpec::new("head_w", vec![self.n_out, h2]),
                TensorSpec::new("head_b", vec![self.n_out]),
            ],
        }
    }

    fn head_w(&self) -> Mat {
        let (_, o2, o3) = self.offsets();
        let mut w = Mat::zeros(self.n_out, self.l2.n_h);
        w.data.copy_from_slice(&self.params[o2..o3]);
        w
    }

    /// Forward with caller-supplied dropout masks (`None` runs clean).
    /// Training draws fresh masks; gradient tests freeze them so finite
    /// differences see the same function the backward pass differentiated.
    pub fn forward_masked(
        &self,
        xs: &[Mat],
        masks: Option<(Vec<Mat>, Vec<Mat>)>,
    ) -> (Mat, SurrogateCache) {
        let (o1, o2, o3) = self.offsets();
        let (hs1, c1) = self.l1.forward(&self.params[..o1], xs);
        let hs1_dropped = match &masks {
            Some((m1, _)) => hs1
                .into_iter()
                .zip(m1)
                .map(|(mut h, m)| {
                    mul_inplace(&mut h, m);
                    h
                })
                .collect(),
            None => hs1,
        };
        let (hs2, c2) = self.l2.forward(&self.params[o1..o2], &hs1_dropped);
        let mut h_last = hs2.into_iter().last().expect("nonempty window");
        if let Some((_, m2)) = &masks {
            mul_inplace(&mut h_last, m2.last().expect("mask per timestep"));
        }
        let w = self.head_w();
        let mut y = matmul_nt(&h_last, &w);
        let bias = &self.params[o3..];
        for r in 0..y.rows {
            for (v, b) in y.row_mut(r).iter_mut().zip(bias) {
                *v += b;
            }
        }
        (y, SurrogateCache { c1, c2, hs1_dropped, h_last, masks })
    }

    /// Training-mode forward: one fresh dropout mask per timestep and layer.
    pub fn forward_train(&self, xs: &[Mat], rng: &mut ChaCha12Rng) -> (Mat, SurrogateCache) {
        let b = xs.first().map_or(0, |x| x.rows);
        let m1: Vec<Mat> = (0..xs.len())
            .map(|_| dropout::mask(b, self.l1.n_h, self.drop_rate, rng))
            .collect();
        let m2: Vec<Mat> = (0..xs.len())
            .map(|_| dropout::mask(b, self.l2.n_h, self.drop_rate, rng))
            .collect();
        self.forward_masked(xs, Some((m1, m2)))
    }

    pub fn forward_eval(&self, xs: &[Mat]) -> Mat {
        self.forward_masked(xs, None).0
    }

    /// Gradient of a scalar loss with upstream `dy` on the outputs. Dropout
    /// masks are replayed on the gradients before each recurrent backward
    /// pass, mirroring where they sat in the forward pass.
    pub fn backward(&self, xs: &[Mat], cache: &SurrogateCache, dy: &Mat) -> Vec<f64> {
        let (o1, o2, o3) = self.offsets();
        let steps = xs.len();
        let batch = dy.rows;
        let (h1, h2) = (self.l1.n_h, self.l2.n_h);

        let mut grads = vec![0.0; self.n_params()];
        accumulate_outer(&mut grads[o2..o3], dy, &cache.h_last);
        for r in 0..batch {
            for (g, &d) in grads[o3..].iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }

        let w = self.head_w();
        let dh_last = matmul_nn(dy, &w);
        let mut dhs2 = vec![Mat::zeros(batch, h2); steps];
        dhs2[steps - 1] = dh_last;
        if let Some((_, m2)) = &cache.masks {
            mul_inplace(&mut dhs2[steps - 1], &m2[steps - 1]);
        }
        let (mut dhs1, g2) =
            self.l2.backward(&self.params[o1..o2], &cache.hs1_dropped, &cache.c2, &dhs2);
        if let Some((m1, _)) = &cache.masks {
            for (d, m) in dhs1.iter_mut().zip(m1) {
                mul_inplace(d, m);
            }
        }
        let (_, g1) = self.l1.backward(&self.params[..o1], xs, &cache.c1, &dhs1);
        grads[..o1].copy_from_slice(&g1);
        grads[o1..o2].copy_from_slice(&g2);
        let _ = h1;
        grads
    }
}

fn mul_inplace(a: &mut Mat, m: &Mat) {
    debug_assert_eq!(a.rows, m.rows);
    debug_assert_eq!(a.cols, m.cols);
    for (x, y) in a.data.iter_mut().zip(&m.data) {
        *x *= y;
    }
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone)]
pub struct SurrogateTrainConfig {
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Std-dev of Gaussian noise added to every training input entry.
    pub noise_sigma: f64,
    /// Stop after this many epochs without test-MSE improvement (0 disables).
    pub patience: usize,
    /// Improvement smaller than this does not reset the patience counter.
    pub min_delta: f64,
}

impl Default for SurrogateTrainConfig {
    fn default() -> Self {
        SurrogateTrainConfig {
            batch: 64,
            epochs: 15,
            lr: 1e-3,
            noise_sigma: 0.06,
            patience: 5,
            min_delta: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch (noisy inputs, dropout active).
    pub train_mse: Vec<f64>,
    /// Clean test MSE; index 0 is the pre-training baseline.
    pub test_mse: Vec<f64>,
    pub best_test_mse: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Mean squared error of clean (eval-mode) predictions over the given
/// window starts.
pub fn mse_over(net: &SurrogateNet, data: &WindowDataset, starts: &[usize]) -> f64 {
    if starts.is_empty() {
        return f64::NAN;
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for chunk in starts.chunks(256) {
        let (xs, targets) = data.gather(chunk, None);
        let y = net.forward_eval(&xs);
        sum += y
            .data
            .iter()
            .zip(&targets.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        count += targets.data.len();
    }
    sum / count as f64
}

/// Minibatch regression of the window dataset onto next-record targets.
/// Tracks clean test MSE per epoch, keeps the best parameters seen, and
/// stops early once the test score plateaus. A non-finite loss or gradient
/// aborts with the best finite parameters restored.
pub fn train_surrogate(
    net: &mut SurrogateNet,
    data: &WindowDataset,
    cfg: &SurrogateTrainConfig,
    rng: &mut ChaCha12Rng,
) -> Result<TrainReport, NnError> {
    let mut opt = Adam::new(net.n_params(), cfg.lr);
    let track_test = !data.test_starts.is_empty();

    let initial_mse = mse_over(net, data, &data.test_starts);
    let mut report = TrainReport {
        train_mse: Vec::new(),
        test_mse: vec![initial_mse],
        best_test_mse: initial_mse,
        best_epoch: 0,
        epochs_run: 0,
    };
    let mut best_params = net.params.clone();
    let mut stale = 0usize;

    let mut order = data.train_starts.clone();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let noise = if cfg.noise_sigma > 0.0 {
                Some((cfg.noise_sigma, &mut *rng))
            } else {
                None
            };
            let (xs, targets) = data.gather(chunk, noise);
            let (y, cache) = net.forward_train(&xs, rng);
            let n = y.data.len() as f64;
            let mut loss = 0.0;
            let mut dy = Mat::zeros(y.rows, y.cols);
            for i in 0..y.data.len() {
                let d = y.data[i] - targets.data[i];
                loss += d * d;
                dy.data[i] = 2.0 * d / n;
            }
            loss /= n;
            if !loss.is_finite() {
                net.params.copy_from_slice(&best_params);
                return Err(NnError::Diverged { epoch });
            }
            let grads = net.backward(&xs, &cache, &dy);
            if opt.step(&mut net.params, &grads).is_err() {
                net.params.copy_from_slice(&best_params);
                return Err(NnError::Diverged { epoch });
            }
            epoch_loss += loss;
            n_batches += 1;
        }
        report.train_mse.push(epoch_loss / n_batches.max(1) as f64);
        report.epochs_run = epoch + 1;

        let test = mse_over(net, data, &data.test_starts);
        report.test_mse.push(test);
        if track_test {
            if test < report.best_test_mse - cfg.min_delta {
                report.best_test_mse = test;
                report.best_epoch = epoch + 1;
                best_params.copy_from_slice(&net.params);
                stale = 0;
            } else {
                stale += 1;
                if cfg.patience > 0 && stale >= cfg.patience {
                    break;
                }
            }
        }
    }
    if track_test {
        net.params.copy_from_slice(&best_params);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Rolling prediction

/// One-step prediction from a physical-space window `(window, 7)` whose last
/// row already carries the intended speed command in its action column.
/// Returns the six predicted channels in physical units.
pub fn predict_next(
    net: &SurrogateNet,
    norm: &Normalizer,
    window: &Mat,
) -> Result<Vec<f64>, NnError> {
    if window.cols != net.l1.n_in {
        return Err(NnError::ShapeMismatch {
            what: "window channels",
            expected: net.l1.n_in.to_string(),
            got: window.cols.to_string(),
        });
    }
    if window.rows == 0 {
        return Err(NnError::TrajectoryTooShort { len: 0, window: 1 });
    }
    let normed = norm.normalize_rows(window);
    let xs: Vec<Mat> = (0..normed.rows)
        .map(|t| {
            let mut m = Mat::zeros(1, normed.cols);
            m.row_mut(0).copy_from_slice(normed.row(t));
            m
        })
        .collect();
    let y = net.forward_eval(&xs);
    Ok(y
        .row(0)
        .iter()
        .enumerate()
        .map(|(c, &v)| norm.denormalize_value(c, v.clamp(-2.0, 2.0)))
        .collect())
}

/// Advance a physical-space window by one model step: stamp the action into
/// the last row, predict the next record, apply any known-channel overrides,
/// then rotate the window. Returns the (possibly overridden) prediction.
///
/// Overrides exist because some channels are inputs the caller controls or
/// measures (gas flow, pump speed) or are derived (error = superheat minus
/// setpoint); pinning them to truth keeps multi-step rollouts honest about
/// what the model actually has to predict.
#[allow(clippy::too_many_arguments)]
pub fn roll_step(
    net: &SurrogateNet,
    norm: &Normalizer,
    window: &mut Mat,
    action: f64,
    m_a: Option<f64>,
    omega_p: Option<f64>,
    setpoint: Option<f64>,
) -> Result<Vec<f64>, NnError> {
    let last = window.rows - 1;
    window.row_mut(last)[N_CHANNELS - 1] = action;
    let mut o = predict_next(net, norm, window)?;
    if let Some(v) = m_a {
        o[2] = v;
    }
    if let Some(v) = omega_p {
        o[3] = v;
    }
    if let Some(sp) = setpoint {
        o[5] = o[4] - sp;
    }
    window.data.rotate_left(N_CHANNELS);
    let row = window.row_mut(last);
    row[..N_TARGETS].copy_from_slice(&o);
    row[N_CHANNELS - 1] = 0.0;
    Ok(o)
}

/// One step of a multi-step rollout: the action to stamp plus optional
/// ground-truth overrides for channels the model does not have to predict.
#[derive(Debug, Clone, Copy)]
pub struct FreeRunStep {
    pub action: f64,
    pub m_a: Option<f64>,
    pub omega_p: Option<f64>,
    pub setpoint: Option<f64>,
}

/// Closed-loop rollout: feed the model its own predictions for `steps.len()`
/// steps starting from `init_window` (physical units). With all overrides
/// `None` the rollout is pure feedback.
pub fn free_run(
    net: &SurrogateNet,
    norm: &Normalizer,
    init_window: &Mat,
    steps: &[FreeRunStep],
) -> Result<Vec<Vec<f64>>, NnError> {
    let mut window = init_window.clone();
    steps
        .iter()
        .map(|s| roll_step(net, norm, &mut window, s.action, s.m_a, s.omega_p, s.setpoint))
        .collect()
}

// ---------------------------------------------------------------------------
// Persistence

/// Save net parameters and the fitted normalizer in one checkpoint. The
/// normalizer rides along as two extra tensors; the dropout rate as metadata.
pub fn save_surrogate(
    path: &Path,
    net: &SurrogateNet,
    norm: &Normalizer,
    metas: &[(&str, String)],
) -> Result<(), NnError> {
    let mut layout = net.layout();
    layout.tensors.push(TensorSpec::new("norm_lo", vec![norm.lo.len()]));
    layout.tensors.push(TensorSpec::new("norm_scale", vec![norm.scale.len()]));
    let mut data = net.params.clone();
    data.extend_from_slice(&norm.lo);
    data.extend_from_slice(&norm.scale);
    let mut all_metas: Vec<(&str, String)> = vec![("drop_rate", net.drop_rate.to_string())];
    all_metas.extend(metas.iter().map(|(k, v)| (*k, v.clone())));
    checkpoint::save(path, &layout, &data, &all_metas)
}

/// A reloaded surrogate: the net, its normalizer, and checkpoint metadata.
pub type LoadedSurrogate = (SurrogateNet, Normalizer, Vec<(String, String)>);

pub fn load_surrogate(path: &Path) -> Result<LoadedSurrogate, NnError> {
    let (layout, data, metas) = checkpoint::load(path)?;
    let malformed =
        |reason: String| NnError::MalformedCheckpoint { reason };
    let dims = |name: &str| -> Result<Vec<usize>, NnError> {
        layout
            .tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.shape.clone())
            .ok_or_else(|| malformed(format!("missing tensor {name}")))
    };
    let wih1 = dims("lstm1_wih")?;
    let wih2 = dims("lstm2_wih")?;
    let head = dims("head_w")?;
    let (n_in, h1, h2, n_out) = (wih1[1], wih1[0] / 4, wih2[0] / 4, head[0]);
    let drop_rate: f64 = checkpoint::meta(&metas, "drop_rate")
        .ok_or_else(|| malformed("missing drop_rate metadata".into()))?
        .parse()
        .map_err(|_| malformed("unreadable drop_rate metadata".into()))?;

    let mut net = SurrogateNet {
        l1: Lstm::new(n_in, h1),
        l2: Lstm::new(h1, h2),
        n_out,
        drop_rate,
        params: Vec::new(),
    };
    let expected = {
        let mut l = net.layout();
        l.tensors.push(TensorSpec::new("norm_lo", vec![n_in]));
        l.tensors.push(TensorSpec::new("norm_scale", vec![n_in]));
        l
    };
    expected.expect_eq(&layout)?;
    let n_net = net.l1.n_params() + net.l2.n_params() + n_out * h2 + n_out;
    net.params = data[..n_net].to_vec();
    let norm = Normalizer {
        lo: data[n_net..n_net + n_in].to_vec(),
        scale: data[n_net + n_in..].to_vec(),
    };
    Ok((net, norm, metas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{strided_coords, worst_rel_err, GRAD_TOL};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn tiny_net(seed: u64) -> SurrogateNet {
        SurrogateNet::new(N_CHANNELS, 8, 10, N_TARGETS, 0.2, &mut rng(seed))
    }

    /// Rows follow a simple stable linear recurrence so a small net can
    /// actually learn the map.
    fn synthetic_rows(n: usize, seed: u64) -> Mat {
        let mut r = rng(seed);
        let mut state = [0.0f64; N_TARGETS];
        let mut rows = Mat::zeros(n, N_CHANNELS);
        for k in 0..n {
            let u: f64 = r.gen_range(-1.0..1.0);
            let row = rows.row_mut(k);
            row[..N_TARGETS].copy_from_slice(&state);
            row[N_TARGETS] = u;
            let mut next = [0.0f64; N_TARGETS];
            for (c, nx) in next.iter_mut().enumerate() {
                let neighbor = state[(c + 1) % N_TARGETS];
                *nx = 0.8 * state[c] + 0.15 * neighbor + 0.3 * u + 0.01 * (c as f64 + 1.0);
            }
            state = next;
        }
        rows
    }

    fn synthetic_dataset(n: usize, split_at: usize, window: usize) -> (WindowDataset, Normalizer) {
        let rows = synthetic_rows(n, 5);
        let norm = Normalizer::fit(&rows, split_at);
        let data = norm.normalize_rows(&rows);
        (WindowDataset::build(data, &[], window, split_at).unwrap(), norm)
    }

    #[test]
    fn normalizer_round_trips() {
        let rows = synthetic_rows(50, 3);
        let norm = Normalizer::fit(&rows, 50);
        for r in [0, 17, 49] {
            for (c, &v) in rows.row(r).iter().enumerate() {
                let n = norm.normalize_value(c, v);
                assert!((-1.0..=1.0).contains(&n), "fitted rows map inside the band");
                let back = norm.denormalize_value(c, n);
                assert!((back - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn constant_channel_gets_unit_scale() {
        let rows = Mat::from_fn(10, N_CHANNELS, |r, c| if c == 3 { 5.0 } else { r as f64 + c as f64 });
        let norm = Normalizer::fit(&rows, 10);
        assert_eq!(norm.scale[3], 1.0);
        let n = norm.normalize_value(3, 5.0);
        assert_eq!(norm.denormalize_value(3, n), 5.0);
    }

    #[test]
    fn window_counts_and_split_are_exact() {
        let (ds, _) = synthetic_dataset(30, 20, 10);
        // Train: k + 10 < 20 -> k in [0, 10). Test: k in [10, 20).
        assert_eq!(ds.train_starts, (0..10).collect::<Vec<_>>());
        assert_eq!(ds.test_starts, (10..20).collect::<Vec<_>>());
    }

    #[test]
    fn gap_windows_are_dropped() {
        let rows = synthetic_rows(30, 7);
        let data = Normalizer::fit(&rows, 30).normalize_rows(&rows);
        let ds = WindowDataset::build(data, &[15], 10, 30).unwrap();
        // Excluded: k < 15 <= k+10, i.e. k in [5, 15).
        for k in 5..15 {
            assert!(!ds.train_starts.contains(&k), "start {k} straddles the gap");
        }
        assert!(ds.train_starts.contains(&4));
        assert!(ds.train_starts.contains(&15));
    }

    #[test]
    fn too_short_trajectory_is_rejected() {
        let rows = synthetic_rows(10, 7);
        let err = WindowDataset::build(rows, &[], 10, 8).unwrap_err();
        assert!(matches!(err, NnError::TrajectoryTooShort { len: 10, window: 10 }));
    }

    #[test]
    fn eval_forward_is_deterministic_and_finite() {
        let net = tiny_net(1);
        let (ds, _) = synthetic_dataset(40, 25, 10);
        let (xs, _) = ds.gather(&ds.train_starts[..4], None);
        let a = net.forward_eval(&xs);
        let b = net.forward_eval(&xs);
        assert_eq!(a.data, b.data);
        assert!(a.all_finite());
        assert_eq!((a.rows, a.cols), (4, N_TARGETS));
    }

    #[test]
    fn full_stack_gradients_match_finite_differences_eval_mode() {
        let mut net = tiny_net(2);
        let mut r = rng(3);
        let xs: Vec<Mat> = (0..4)
            .map(|_| Mat::from_fn(2, N_CHANNELS, |_, _| r.gen_range(-1.0..1.0)))
            .collect();
        let w = Mat::from_fn(2, N_TARGETS, |_, _| r.gen_range(-1.0..1.0));
        let (_, cache) = net.forward_masked(&xs, None);
        let analytic = net.backward(&xs, &cache, &w);
        let coords = strided_coords(net.n_params(), 300);
        let mut params = net.params.clone();
        let worst = worst_rel_err(&mut params, &analytic, &coords, |p| {
            net.params.copy_from_slice(p);
            let y = net.forward_eval(&xs);
            y.data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
        });
        assert!(worst < GRAD_TOL, "worst {worst}");
    }

    #[test]
    fn full_stack_gradients_match_finite_differences_with_frozen_dropout() {
        let mut net = tiny_net(4);
        let mut r = rng(5);
        let xs: Vec<Mat> = (0..4)
            .map(|_| Mat::from_fn(2, N_CHANNELS, |_, _| r.gen_range(-1.0..1.0)))
            .collect();
        let w = Mat::from_fn(2, N_TARGETS, |_, _| r.gen_range(-1.0..1.0));
        let m1: Vec<Mat> = (0..4).map(|_| dropout::mask(2, 8, 0.2, &mut r)).collect();
        let m2: Vec<Mat> = (0..4).map(|_| dropout::mask(2, 10, 0.2, &mut r)).collect();
        let masks = (m1.clone(), m2.clone());
        let (_, cache) = net.forward_masked(&xs, Some(masks.clone()));
        let analytic = net.backward(&xs, &cache, &w);
        let coords = strided_coords(net.n_params(), 300);
        let mut params = net.params.clone();
        let worst = worst_rel_err(&mut params, &analytic, &coords, |p| {
            net.params.copy_from_slice(p);
            let (y, _) = net.forward_masked(&xs, Some(masks.clone()));
            y.data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
        });
        assert!(worst < GRAD_TOL, "worst {worst}");
    }

    #[test]
    fn zero_epochs_leaves_net_and_mse_untouched() {
        let mut net = tiny_net(6);
        let before = net.params.clone();
        let (ds, _) = synthetic_dataset(60, 40, 10);
        let cfg = SurrogateTrainConfig { epochs: 0, ..Default::default() };
        let report = train_surrogate(&mut net, &ds, &cfg, &mut rng(7)).unwrap();
        assert_eq!(net.params, before);
        assert_eq!(report.epochs_run, 0);
        assert_eq!(report.test_mse.len(), 1);
        assert_eq!(report.best_test_mse, report.test_mse[0]);
        let fresh = mse_over(&net, &ds, &ds.test_starts);
        assert_eq!(report.test_mse[0], fresh);
    }

    #[test]
    fn training_reduces_test_mse_on_a_learnable_system() {
        let mut net = tiny_net(8);
        let (ds, _) = synthetic_dataset(300, 200, 10);
        let cfg = SurrogateTrainConfig {
            epochs: 40,
            batch: 32,
            noise_sigma: 0.01,
            patience: 0,
            ..Default::default()
        };
        let report = train_surrogate(&mut net, &ds, &cfg, &mut rng(9)).unwrap();
        let first = report.test_mse[0];
        assert!(
            report.best_test_mse < 0.5 * first,
            "initial {first}, best {}",
            report.best_test_mse
        );
        assert_eq!(report.epochs_run, 40);
        // Final parameters are the best-scoring ones.
        let fresh = mse_over(&net, &ds, &ds.test_starts);
        assert!((fresh - report.best_test_mse).abs() < 1e-12);
    }

    #[test]
    fn training_is_reproducible_per_seed() {
        let (ds, _) = synthetic_dataset(120, 80, 10);
        let cfg = SurrogateTrainConfig { epochs: 2, ..Default::default() };
        let mut a = tiny_net(10);
        let mut b = tiny_net(10);
        train_surrogate(&mut a, &ds, &cfg, &mut rng(11)).unwrap();
        train_surrogate(&mut b, &ds, &cfg, &mut rng(11)).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn memorizes_a_small_window_set() {
        // Capacity check: with noise and dropout off, a long run should pin
        // 50 windows nearly exactly.
        let mut net = SurrogateNet::new(N_CHANNELS, 12, 12, N_TARGETS, 0.0, &mut rng(12));
        let rows = synthetic_rows(60, 13);
        let norm = Normalizer::fit(&rows, 60);
        let data = norm.normalize_rows(&rows);
        let ds = WindowDataset::build(data, &[], 10, 60).unwrap();
        assert_eq!(ds.train_starts.len(), 50);
        assert!(ds.test_starts.is_empty());
        let cfg = SurrogateTrainConfig {
            epochs: 500,
            noise_sigma: 0.0,
            patience: 0,
            batch: 50,
            ..Default::default()
        };
        let report = train_surrogate(&mut net, &ds, &cfg, &mut rng(14)).unwrap();
        assert_eq!(report.epochs_run, 500);
        let final_mse = mse_over(&net, &ds, &ds.train_starts);
        assert!(final_mse < 1e-3, "memorization MSE {final_mse}");
    }

    #[test]
    fn divergent_training_aborts_with_parameters_restored() {
        let mut net = tiny_net(15);
        let before = net.params.clone();
        let (ds, _) = synthetic_dataset(120, 80, 10);
        let cfg = SurrogateTrainConfig { epochs: 3, lr: 1e160, ..Default::default() };
        let err = train_surrogate(&mut net, &ds, &cfg, &mut rng(16)).unwrap_err();
        assert!(matches!(err, NnError::Diverged { .. }), "{err}");
        assert_eq!(net.params, before, "parameters fall back to the last finite state");
    }

    #[test]
    fn single_roll_step_without_overrides_matches_predict_next() {
        let net = tiny_net(17);
        let rows = synthetic_rows(40, 18);
        let norm = Normalizer::fit(&rows, 40);
        let window = Mat::from_fn(10, N_CHANNELS, |r, c| rows.get(r, c));

        let mut stamped = window.clone();
        stamped.row_mut(9)[N_CHANNELS - 1] = 0.37;
        let direct = predict_next(&net, &norm, &stamped).unwrap();

        let steps = [FreeRunStep { action: 0.37, m_a: None, omega_p: None, setpoint: None }];
        let rolled = free_run(&net, &norm, &window, &steps).unwrap();
        assert_eq!(rolled.len(), 1);
        assert_eq!(rolled[0], direct);
    }

    #[test]
    fn roll_step_applies_overrides_and_rotates_the_window() {
        let net = tiny_net(19);
        let rows = synthetic_rows(40, 20);
        let norm = Normalizer::fit(&rows, 40);
        let mut window = Mat::from_fn(10, N_CHANNELS, |r, c| rows.get(r, c));
        let second_row = window.row(1).to_vec();
        let o = roll_step(&net, &norm, &mut window, -0.2, Some(0.41), Some(19.0), Some(25.0))
            .unwrap();
        assert_eq!(o[2], 0.41);
        assert_eq!(o[3], 19.0);
        assert!((o[5] - (o[4] - 25.0)).abs() < 1e-15);
        // Window slid by one: old row 1 is now row 0, prediction is last.
        assert_eq!(window.row(0), &second_row[..]);
        assert_eq!(&window.row(9)[..N_TARGETS], &o[..]);
        assert_eq!(window.row(9)[N_CHANNELS - 1], 0.0);
    }

    #[test]
    fn prediction_is_clamped_into_the_fitted_band() {
        // A huge head bias forces raw outputs far outside [-1, 1]; the
        // physical prediction must stay at the clamp edge, not fly off.
        let mut net = tiny_net(21);
        let n = net.params.len();
        for v in &mut net.params[n - N_TARGETS..] {
            *v = 1e6;
        }
        let rows = synthetic_rows(40, 22);
        let norm = Normalizer::fit(&rows, 40);
        let window = Mat::from_fn(10, N_CHANNELS, |r, c| rows.get(r, c));
        let o = predict_next(&net, &norm, &window).unwrap();
        for (c, &v) in o.iter().enumerate() {
            assert_eq!(v, norm.denormalize_value(c, 2.0));
        }
    }

    #[test]
    fn surrogate_checkpoint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("surrogate.ckpt");
        let net = tiny_net(23);
        let rows = synthetic_rows(30, 24);
        let norm = Normalizer::fit(&rows, 30);
        save_surrogate(&path, &net, &norm, &[("seed", "23".into())]).unwrap();
        let (net2, norm2, metas) = load_surrogate(&path).unwrap();
        assert_eq!(net.params, net2.params);
        assert_eq!(net.l1.n_in, net2.l1.n_in);
        assert_eq!(net.l2.n_h, net2.l2.n_h);
        assert_eq!(net.drop_rate, net2.drop_rate);
        assert_eq!(norm, norm2);
        assert_eq!(checkpoint::meta(&metas, "seed"), Some("23"));

        let rows_w = Mat::from_fn(10, N_CHANNELS, |r, c| rows.get(r, c));
        assert_eq!(
            predict_next(&net, &norm, &rows_w).unwrap(),
            predict_next(&net2, &norm2, &rows_w).unwrap()
        );
    }

    #[test]
    fn wrong_window_width_is_rejected() {
        let net = tiny_net(25);
        let rows = synthetic_rows(30, 26);
        let norm = Normalizer {
            lo: vec![0.0; 5],
            scale: vec![1.0; 5],
        };
        let window = Mat::from_fn(10, 5, |r, c| rows.get(r, c));
        assert!(predict_next(&net, &norm, &window).is_err());
    }
}

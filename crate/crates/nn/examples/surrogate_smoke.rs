//! End-to-end smoke run of the surrogate stack at production scale:
//! synthesize a trajectory, fit the normalizer, train briefly, checkpoint,
//! reload, and free-run. Prints timing so training budgets can be sanity
//! checked.

use anyhow::Result;
use orclab_nn::surrogate::{self, N_CHANNELS};
use orclab_nn::{FreeRunStep, Mat, Normalizer, SurrogateNet, SurrogateTrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn synthetic_rows(n: usize, seed: u64) -> Mat {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut state = [0.2f64, -0.1, 0.4, 0.0, 0.3, -0.2];
    let mut rows = Mat::zeros(n, N_CHANNELS);
    for k in 0..n {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let row = rows.row_mut(k);
        row[..6].copy_from_slice(&state);
        row[6] = u;
        let mut next = [0.0f64; 6];
        for (c, nx) in next.iter_mut().enumerate() {
            *nx = 0.85 * state[c] + 0.1 * state[(c + 2) % 6] + 0.25 * u
                + 0.02 * ((k as f64) * 0.01).sin();
        }
        state = next;
    }
    rows
}

fn main() -> Result<()> {
    let rows = synthetic_rows(3000, 42);
    let norm = Normalizer::fit(&rows, 2400);
    let data = norm.normalize_rows(&rows);
    let dataset = surrogate::WindowDataset::build(data, &[1200], 10, 2400)?;
    println!(
        "dataset: {} train windows, {} test windows",
        dataset.train_starts.len(),
        dataset.test_starts.len()
    );

    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut net = SurrogateNet::standard(&mut rng);
    println!("net: {} parameters", net.n_params());

    let cfg = SurrogateTrainConfig { epochs: 2, patience: 0, ..Default::default() };
    let t0 = Instant::now();
    let report = surrogate::train_surrogate(&mut net, &dataset, &cfg, &mut rng)?;
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "trained {} epochs in {:.1}s ({:.1}s/epoch at {} windows)",
        report.epochs_run,
        dt,
        dt / report.epochs_run as f64,
        dataset.train_starts.len()
    );
    println!("test MSE: initial {:.4}, best {:.4}", report.test_mse[0], report.best_test_mse);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("surrogate.ckpt");
    surrogate::save_surrogate(&path, &net, &norm, &[("seed", "7".into())])?;
    let (net2, norm2, _) = surrogate::load_surrogate(&path)?;
    assert_eq!(net.params, net2.params);
    assert_eq!(norm, norm2);
    println!("checkpoint round trip: ok ({} bytes)", std::fs::read(&path)?.len());

    let window = Mat::from_fn(10, N_CHANNELS, |r, c| rows.get(2600 + r, c));
    let steps: Vec<FreeRunStep> = (0..20)
        .map(|k| FreeRunStep {
            action: rows.get(2610 + k, 6),
            m_a: None,
            omega_p: None,
            setpoint: None,
        })
        .collect();
    let preds = surrogate::free_run(&net2, &norm2, &window, &steps)?;
    let mut worst = 0.0f64;
    for (k, p) in preds.iter().enumerate() {
        for (c, &v) in p.iter().enumerate() {
            assert!(v.is_finite());
            worst = worst.max((v - rows.get(2610 + k, c)).abs());
        }
    }
    println!("free run: 20 steps, worst absolute deviation {worst:.3}");
    Ok(())
}

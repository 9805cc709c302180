//! Learning-curve summaries: smoothing, medians, and the episodes-to-
//! threshold measurement used to compare fine-tuned and from-scratch runs.

/// Mean of each length-`w` window; output has `xs.len() - w + 1` entries.
/// Returns an empty vector when fewer than `w` points exist.
pub fn moving_mean(xs: &[f64], w: usize) -> Vec<f64> {
    assert!(w > 0, "window must be positive");
    if xs.len() < w {
        return Vec::new();
    }
    (0..=xs.len() - w).map(|i| xs[i..i + w].iter().sum::<f64>() / w as f64).collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean of the last `k` entries (all of them if fewer exist).
pub fn mean_tail(xs: &[f64], k: usize) -> f64 {
    let start = xs.len().saturating_sub(k);
    mean(&xs[start..])
}

/// Median with even-length averaging; ignores nothing, so keep NaNs out.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

/// Threshold a learning curve must hold to count as converged: 90% of the
/// asymptote, where "asymptote" is the mean of the last `tail` returns.
/// Returns are usually negative early on, so 90% "of" a negative asymptote
/// means a bound slightly below it rather than above.
pub fn convergence_threshold(returns: &[f64], tail: usize) -> (f64, f64) {
    let asym = mean_tail(returns, tail);
    let thr = if asym > 0.0 { 0.9 * asym } else { asym / 0.9 };
    (asym, thr)
}

/// Episodes until the `w`-episode moving mean first reaches `threshold`.
/// The count includes the full first window, so the earliest possible
/// answer is `w`. `None` means the curve never got there.
pub fn reach_episode(returns: &[f64], threshold: f64, w: usize) -> Option<usize> {
    moving_mean(returns, w).iter().position(|&m| m >= threshold).map(|i| i + w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_mean_matches_hand_windows() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(moving_mean(&xs, 2), vec![1.5, 2.5, 3.5, 4.5]);
        assert_eq!(moving_mean(&xs, 5), vec![3.0]);
        assert!(moving_mean(&xs, 6).is_empty());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn threshold_sign_convention() {
        // Positive asymptote: threshold sits below it.
        let rs = vec![0.0; 30].into_iter().chain(vec![100.0; 20]).collect::<Vec<_>>();
        let (asym, thr) = convergence_threshold(&rs, 20);
        assert_eq!(asym, 100.0);
        assert_eq!(thr, 90.0);
        // Negative asymptote: threshold is more negative, still reachable.
        let rs = vec![-100.0; 20];
        let (asym, thr) = convergence_threshold(&rs, 20);
        assert_eq!(asym, -100.0);
        assert!(thr < asym);
        assert!((thr - asym / 0.9).abs() < 1e-12);
    }

    #[test]
    fn reach_counts_full_first_window() {
        // Ten zeros then tens: the 3-window mean first hits 10 at index 10.
        let mut rs = vec![0.0; 10];
        rs.extend(vec![10.0; 10]);
        assert_eq!(reach_episode(&rs, 10.0, 3), Some(13));
        assert_eq!(reach_episode(&rs, 5.0, 3), Some(12));
        // Instant success still costs one window of episodes.
        assert_eq!(reach_episode(&[5.0, 5.0, 5.0], 5.0, 3), Some(3));
        assert_eq!(reach_episode(&rs, 11.0, 3), None);
    }

    #[test]
    fn tail_mean_clamps_to_available_data() {
        assert_eq!(mean_tail(&[1.0, 2.0, 3.0, 4.0], 2), 3.5);
        assert_eq!(mean_tail(&[1.0, 2.0], 10), 1.5);
    }
}

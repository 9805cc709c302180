//! Step reward for superheat tracking.
//!
//! Three ingredients: a quadratic penalty on the post-step tracking error, a
//! movement penalty on the change in commanded action, and a discrete bonus
//! table that pays sharply for landing inside tight error bands. The table
//! gives the learner a graded signal long before the quadratic term
//! dominates, and the movement penalty discourages actuator thrash.

/// Band edges on `|error|` (K); bin `k` applies when `|e|` is below edge `k`
/// and at or above the previous edge.
pub const BAND_EDGES: [f64; 7] = [0.05, 0.1, 0.5, 1.0, 2.0, 3.5, 5.0];

/// Bonus per band; the final entry applies beyond the last edge.
pub const BAND_VALUES: [f64; 8] = [300.0, 100.0, 50.0, 0.0, -5.0, -20.0, -50.0, -100.0];

/// Added on top of the stale-observation reward when a step faults.
pub const FAULT_PENALTY: f64 = BAND_VALUES[7];

/// Reward for ending a step at tracking error `e` (K) after changing the
/// commanded action by `du` (action units, `[-1, 1]` scale).
pub fn reward(e: f64, du: f64) -> f64 {
    let ae = e.abs();
    let mut k = 0;
    while k < BAND_EDGES.len() && ae >= BAND_EDGES[k] {
        k += 1;
    }
    -0.8 * (e * e) - 0.8 * du.abs() + BAND_VALUES[k]
}

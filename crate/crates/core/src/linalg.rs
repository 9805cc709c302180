//! Tiny dense linear solves for the Newton iterations.
//!
//! The DAE solver needs a 3x3 solve per Newton step and the equilibrium finder
//! a 7x7; at those sizes Gaussian elimination with partial pivoting is all
//! there is to it.

/// Solves `a x = b` in place, returning `None` when a pivot collapses
/// (singular to working precision).
pub fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot_row = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let pivot = a[col];
        for row in col + 1..N {
            let f = a[row][col] / pivot[col];
            if f == 0.0 {
                continue;
            }
            for (dst, p) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                *dst -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let mut s = b[row];
        for k in row + 1..N {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

//! Row-major matrix with the three multiply kernels the layers need.
//!
//! The shapes here are tiny by deep-learning standards (hundreds of units,
//! batches of 64), so the kernels are plain loops arranged for contiguous
//! access; LLVM autovectorizes them well enough that the training loops are
//! dominated by these functions rather than anything smarter being needed.

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Mat::zeros(rows.len(), cols);
        for (r, src) in rows.iter().enumerate() {
            m.row_mut(r).copy_from_slice(src);
        }
        m
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dot product with four independent accumulators so the loop pipelines.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `a (m,k) @ b^T (k,n)` where `b` is stored as `(n,k)`: both operands are
/// walked along contiguous rows. This is the layout weights use (out, in).
pub fn matmul_nt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols, "matmul_nt inner dimensions");
    let mut out = Mat::zeros(a.rows, b.rows);
    for r in 0..a.rows {
        let ar = a.row(r);
        let or = out.row_mut(r);
        for (c, ov) in or.iter_mut().enumerate() {
            *ov = dot(ar, b.row(c));
        }
    }
    out
}

/// `a (m,k) @ b (k,n)`, accumulated row-wise so `b` is read contiguously.
pub fn matmul_nn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows, "matmul_nn inner dimensions");
    let mut out = Mat::zeros(a.rows, b.cols);
    for r in 0..a.rows {
        let ar = a.row(r);
        let or = out.row_mut(r);
        for (k, &av) in ar.iter().enumerate() {
            if av != 0.0 {
                axpy(or, av, b.row(k));
            }
        }
    }
    out
}

/// `dw (p,q) += a^T (p,B) @ b (B,q)` with `a` stored `(B,p)`; `dw` is a flat
/// row-major slice. This is the weight-gradient accumulation pattern.
pub fn accumulate_outer(dw: &mut [f64], a: &Mat, b: &Mat) {
    assert_eq!(a.rows, b.rows, "accumulate_outer batch dimension");
    assert_eq!(dw.len(), a.cols * b.cols, "accumulate_outer output size");
    for s in 0..a.rows {
        let arow = a.row(s);
        let brow = b.row(s);
        for (i, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                axpy(&mut dw[i * b.cols..(i + 1) * b.cols], av, brow);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn naive_ab_t(a: &Mat, b: &Mat) -> Mat {
        Mat::from_fn(a.rows, b.rows, |r, c| {
            (0..a.cols).map(|k| a.get(r, k) * b.get(c, k)).sum()
        })
    }

    #[test]
    fn matmul_nt_matches_naive() {
        let a = Mat::from_fn(3, 5, |r, c| (r * 5 + c) as f64 * 0.3 - 2.0);
        let b = Mat::from_fn(4, 5, |r, c| (r as f64 - c as f64) * 0.7);
        let got = matmul_nt(&a, &b);
        let want = naive_ab_t(&a, &b);
        for (x, y) in got.data.iter().zip(&want.data) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn matmul_nn_matches_transposed_nt() {
        let a = Mat::from_fn(2, 6, |r, c| (r + 2 * c) as f64 * 0.11 - 0.5);
        let b = Mat::from_fn(6, 3, |r, c| (3 * r + c) as f64 * 0.09 - 1.0);
        let bt = Mat::from_fn(3, 6, |r, c| b.get(c, r));
        let got = matmul_nn(&a, &b);
        let want = matmul_nt(&a, &bt);
        for (x, y) in got.data.iter().zip(&want.data) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn accumulate_outer_matches_naive() {
        let a = Mat::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.2 - 1.0);
        let b = Mat::from_fn(4, 5, |r, c| (r + c) as f64 * 0.4 - 0.9);
        let mut dw = vec![0.25; 15];
        accumulate_outer(&mut dw, &a, &b);
        for i in 0..3 {
            for j in 0..5 {
                let want: f64 =
                    0.25 + (0..4).map(|s| a.get(s, i) * b.get(s, j)).sum::<f64>();
                assert_abs_diff_eq!(dw[i * 5 + j], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dot_handles_remainders() {
        for n in 0..9 {
            let a: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
            let b: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 - 3.0).collect();
            let want: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert_abs_diff_eq!(dot(&a, &b), want, epsilon = 1e-12);
        }
    }
}

//! Banded symmetric positive definite solves.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Cholesky factor `L` of a symmetric banded matrix, stored row by row with
/// `bandwidth + 1` entries (`L[i][i - bandwidth ..= i]`).
#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix whose lower band is given by `entry(i, j)` for
    /// `i - bw <= j <= i`. Returns `None` if it is not positive definite.
    pub(crate) fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Option<Self> {
        let w = bw + 1;
        let mut rows = vec![0.0; n * w];
        // rows[i*w + (j + bw - i)] holds L[i][j]
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = entry(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= rows[i * w + k + bw - i] * rows[j * w + k + bw - j];
                }
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    rows[i * w + bw] = math::sqrt(s);
                } else {
                    rows[i * w + j + bw - i] = s / rows[j * w + bw];
                }
            }
        }
        Some(BandedCholesky { n, bw, rows })
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.rows[i * w + k + bw - i] * b[k];
            }
            b[i] = s / self.rows[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.rows[k * w + i + bw - k] * b[k];
            }
            b[i] = s / self.rows[i * w + bw];
        }
    }
}

//! Banded LU factorization without pivoting.
//!
//! The phase operators are perturbations of a diagonally dominant M-matrix, so
//! Doolittle elimination inside the band is stable; a vanishing pivot is
//! reported instead of silently producing garbage.

use super::stencil::PhaseOperator;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    /// Row-major band: entry `(r, c)` at `r * width + (c + lower - r)`.
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(op: &PhaseOperator) -> Result<Self> {
        let n = op.size();
        let bw = op.bandwidth();
        let (lower, upper) = (bw, bw);
        let width = lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for r in 0..n {
            for (c, v) in op.row(r) {
                band[r * width + c + lower - r] = v;
            }
        }
        let scale = band.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        for k in 0..n {
            let pivot = band[k * width + lower];
            if !(pivot.abs() > 1e-14 * scale) {
                return Err(Error::SingularPivot { row: k, pivot });
            }
            let last_col = (k + upper).min(n - 1);
            let span = last_col - k;
            let (head, tail) = band.split_at_mut((k + 1) * width);
            let pivot_row = &head[k * width + lower + 1..k * width + lower + 1 + span];
            for r in (k + 1)..=(k + lower).min(n - 1) {
                let base = (r - k - 1) * width;
                let offset = k + lower - r;
                let entry = &mut tail[base + offset];
                if *entry == 0.0 {
                    continue;
                }
                let l = *entry / pivot;
                *entry = l;
                let row = &mut tail[base + offset + 1..base + offset + 1 + span];
                for (a, p) in row.iter_mut().zip(pivot_row) {
                    *a -= l * p;
                }
            }
        }
        Ok(Self {
            n,
            lower,
            upper,
            width,
            band,
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, w, lo, up) = (self.n, self.width, self.lower, self.upper);
        for r in 0..n {
            let start = r.saturating_sub(lo);
            let row = &self.band[r * w..(r + 1) * w];
            let mut acc = x[r];
            for c in start..r {
                acc -= row[c + lo - r] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let end = (r + up).min(n - 1);
            let row = &self.band[r * w..(r + 1) * w];
            let mut acc = x[r];
            for c in (r + 1)..=end {
                acc -= row[c + lo - r] * x[c];
            }
            x[r] = acc / row[lo];
        }
    }
}

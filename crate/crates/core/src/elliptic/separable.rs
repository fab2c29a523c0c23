//! Fast solver for the constant-coefficient (flat interface) phase problem.
//!
//! With identity metric the horizontal stencil is the Neumann second
//! difference, diagonalized by the cosine transform; each mode then reduces
//! to a tridiagonal system in the vertical direction. The result is the exact
//! solution of the same discrete system that [`super::stencil`] assembles.

use ndarray::Array2;

use crate::spectral::CosineTransform;

#[derive(Debug, Clone)]
pub struct SeparableSolver {
    nx: usize,
    rows: usize,
    dx: f64,
    ds: f64,
    shift: f64,
    transform: CosineTransform,
    /// Discrete horizontal eigenvalues `(2/Δx sin(π m / 2nx))²`.
    eigenvalues: Vec<f64>,
}

impl SeparableSolver {
    pub fn new(nx: usize, rows: usize, dx: f64, ds: f64, shift: f64) -> Self {
        let eigenvalues = (0..nx)
            .map(|m| {
                let s = (std::f64::consts::PI * m as f64 / (2.0 * nx as f64)).sin();
                (2.0 * s / dx).powi(2)
            })
            .collect();
        Self {
            nx,
            rows,
            dx,
            ds,
            shift,
            transform: CosineTransform::new(nx),
            eigenvalues,
        }
    }

    /// Solves for rows `1..=m` given the Dirichlet row and optional sources.
    /// Returns the full `(m + 1, nx)` field including row 0.
    pub fn solve(&self, dirichlet: &[f64], source: Option<&Array2<f64>>) -> Array2<f64> {
        let (nx, m) = (self.nx, self.rows);
        let mut spectral = Array2::<f64>::zeros((m + 1, nx));
        let mut buf = vec![0.0; nx];
        buf.copy_from_slice(dirichlet);
        self.transform.forward_in_place(&mut buf);
        spectral.row_mut(0).assign(&ndarray::ArrayView1::from(&buf));
        if let Some(f) = source {
            for i in 1..=m {
                buf.iter_mut().zip(f.row(i)).for_each(|(b, v)| *b = *v);
                self.transform.forward_in_place(&mut buf);
                spectral.row_mut(i).assign(&ndarray::ArrayView1::from(&buf));
            }
        }

        let inv_ds2 = 1.0 / (self.ds * self.ds);
        let mut diag = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for (mode, &lambda) in self.eigenvalues.iter().enumerate() {
            // Thomas elimination on rows 1..=m; sub/super diagonals are -1/ds²
            // except the wall row whose sub-diagonal is -2/ds².
            let centre = self.shift + lambda + 2.0 * inv_ds2;
            for i in 0..m {
                rhs[i] = spectral[[i + 1, mode]];
            }
            rhs[0] += inv_ds2 * spectral[[0, mode]];
            diag[0] = centre;
            for i in 1..m {
                let sub = if i == m - 1 { -2.0 * inv_ds2 } else { -inv_ds2 };
                let w = sub / diag[i - 1];
                diag[i] = centre - w * (-inv_ds2);
                rhs[i] -= w * rhs[i - 1];
            }
            rhs[m - 1] /= diag[m - 1];
            for i in (0..m - 1).rev() {
                rhs[i] = (rhs[i] + inv_ds2 * rhs[i + 1]) / diag[i];
            }
            for i in 0..m {
                spectral[[i + 1, mode]] = rhs[i];
            }
        }

        let mut field = Array2::<f64>::zeros((m + 1, nx));
        field.row_mut(0).assign(&ndarray::ArrayView1::from(dirichlet));
        for i in 1..=m {
            buf.iter_mut().zip(spectral.row(i)).for_each(|(b, v)| *b = *v);
            self.transform.inverse_in_place(&mut buf);
            field.row_mut(i).assign(&ndarray::ArrayView1::from(&buf));
        }
        field
    }

    /// Solves `A u = b` on the unknown rows with homogeneous Dirichlet data;
    /// `b` and the result are in row-major unknown ordering.
    pub fn precondition(&self, b: &[f64]) -> Vec<f64> {
        let (nx, m) = (self.nx, self.rows);
        let mut source = Array2::<f64>::zeros((m + 1, nx));
        for (r, v) in b.iter().enumerate() {
            source[[r / nx + 1, r % nx]] = *v;
        }
        let field = self.solve(&vec![0.0; nx], Some(&source));
        field.slice(ndarray::s![1.., ..]).iter().copied().collect()
    }

    /// Relative residual `|A u - b| / |b|` of a full field against the flat
    /// operator, without assembling it.
    pub fn relative_residual(&self, field: &Array2<f64>, source: Option<&Array2<f64>>) -> f64 {
        let (nx, m) = (self.nx, self.rows);
        let inv_ds2 = 1.0 / (self.ds * self.ds);
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let u = |j: usize, i: usize| field[[i, j]];
        let (mut num, mut den) = (0.0, 0.0);
        for i in 1..=m {
            for j in 0..nx {
                let left = u(j.saturating_sub(1), i);
                let right = u((j + 1).min(nx - 1), i);
                let horizontal = (right - 2.0 * u(j, i) + left) * inv_dx2;
                let vertical = if i < m {
                    (u(j, i + 1) - 2.0 * u(j, i) + u(j, i - 1)) * inv_ds2
                } else {
                    2.0 * (u(j, i - 1) - u(j, i)) * inv_ds2
                };
                let coupling = if i == 1 { u(j, 0) * inv_ds2 } else { 0.0 };
                let b = source.map_or(0.0, |s| s[[i, j]]) + coupling;
                let lhs = self.shift * u(j, i) - horizontal - vertical + coupling;
                num += (lhs - b) * (lhs - b);
                den += b * b;
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

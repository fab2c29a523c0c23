//! Finite-difference assembly of `(η - Δ_h) u = f` on one phase rectangle.
//!
//! Unknowns sit at `(x_j, s_i)` for `j = 0..nx` (cell centres) and `i = 1..=m`
//! (rows above the Dirichlet row `i = 0`). Fluxes `A ∇u` are evaluated on cell
//! faces; the side-wall face fluxes are zero, the top row uses a mirror ghost
//! `u_{m+1} = u_{m-1}`, and cross derivatives use four-point averages. Each row
//! is multiplied by `J` to recover `Δ_h = J ∇·(A ∇)`.

use ndarray::Array2;

use crate::geometry::PhaseMetric;

/// Compressed sparse rows plus the coupling to the Dirichlet row.
#[derive(Debug, Clone)]
pub struct PhaseOperator {
    pub nx: usize,
    pub rows: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Per unknown, `(j, c)` pairs: the row contains `c * g_j`.
    dirichlet: Vec<Vec<(usize, f64)>>,
}

#[derive(Default)]
struct RowBuilder {
    entries: Vec<(usize, f64)>,
    dirichlet: Vec<(usize, f64)>,
}

impl RowBuilder {
    fn push(&mut self, col: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.entries.iter_mut().find(|(c, _)| *c == col) {
            Some(e) => e.1 += coef,
            None => self.entries.push((col, coef)),
        }
    }

    fn push_dirichlet(&mut self, j: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.dirichlet.iter_mut().find(|(c, _)| *c == j) {
            Some(e) => e.1 += coef,
            None => self.dirichlet.push((j, coef)),
        }
    }
}

/// A linear combination of grid values `Σ c u(j, i)`, before ghost resolution.
type Combination = Vec<(f64, isize, usize)>;

impl PhaseOperator {
    pub fn assemble(metric: &PhaseMetric, dx: f64, shift: f64) -> Self {
        let nx = metric.det.ncols();
        let m = metric.rows();
        let ds = metric.spacing;
        let n = nx * m;

        let unknown = |j: usize, i: usize| (i - 1) * nx + j;

        // u at (j, i) with wall mirrors; returns None for the Dirichlet row.
        let resolve = |j: isize, i: usize| -> (usize, usize) {
            let j = j.clamp(0, nx as isize - 1) as usize;
            let i = if i == m + 1 { m - 1 } else { i };
            (j, i)
        };

        // flux through the vertical face between cells f-1 and f on row i
        let xflux = |f: usize, i: usize| -> Combination {
            if f == 0 || f == nx {
                return Vec::new();
            }
            let a11 = metric.xface_a11[[i, f]];
            let a12 = metric.xface_a12[[i, f]];
            let (l, r) = (f as isize - 1, f as isize);
            let mut c = vec![(a11 / dx, r, i), (-a11 / dx, l, i)];
            if a12 != 0.0 && i < m {
                let w = a12 / (4.0 * ds);
                c.extend([(w, l, i + 1), (-w, l, i - 1), (w, r, i + 1), (-w, r, i - 1)]);
            }
            c
        };

        // flux through the half row between rows i and i+1 at column j
        let sflux = |j: usize, i: usize| -> Combination {
            let a22 = metric.sface_a22[[i, j]];
            let a12 = metric.sface_a12[[i, j]];
            let jj = j as isize;
            let mut c = vec![(a22 / ds, jj, i + 1), (-a22 / ds, jj, i)];
            if a12 != 0.0 {
                let w = a12 / (4.0 * dx);
                c.extend([(w, jj + 1, i), (-w, jj - 1, i), (w, jj + 1, i + 1), (-w, jj - 1, i + 1)]);
            }
            c
        };

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(9 * n);
        let mut vals = Vec::with_capacity(9 * n);
        let mut dirichlet = Vec::with_capacity(n);
        row_ptr.push(0);

        for i in 1..=m {
            for j in 0..nx {
                let jac = metric.det[[i, j]];
                let mut row = RowBuilder::default();
                row.push(unknown(j, i), shift);

                let mut add = |combo: Combination, scale: f64| {
                    for (c, jj, ii) in combo {
                        let (jr, ir) = resolve(jj, ii);
                        if ir == 0 {
                            row.push_dirichlet(jr, -jac * scale * c);
                        } else {
                            row.push(unknown(jr, ir), -jac * scale * c);
                        }
                    }
                };
                add(xflux(j + 1, i), 1.0 / dx);
                add(xflux(j, i), -1.0 / dx);
                if i < m {
                    add(sflux(j, i), 1.0 / ds);
                    add(sflux(j, i - 1), -1.0 / ds);
                } else {
                    // zero flux through the wall, half control volume
                    add(sflux(j, i - 1), -2.0 / ds);
                }

                row.entries.sort_by_key(|e| e.0);
                for (c, v) in row.entries {
                    cols.push(c);
                    vals.push(v);
                }
                row_ptr.push(cols.len());
                dirichlet.push(row.dirichlet);
            }
        }

        Self {
            nx,
            rows: m,
            row_ptr,
            cols,
            vals,
            dirichlet,
        }
    }

    pub fn size(&self) -> usize {
        self.nx * self.rows
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Right-hand side `f - B g` for Dirichlet data `g` and source rows `1..=m`
    /// of `source` (row 0 ignored).
    pub fn rhs(&self, dirichlet: &[f64], source: Option<&Array2<f64>>) -> Vec<f64> {
        let mut b = vec![0.0; self.size()];
        for (r, out) in b.iter_mut().enumerate() {
            let (i, j) = (r / self.nx + 1, r % self.nx);
            let f = source.map_or(0.0, |s| s[[i, j]]);
            *out = f - self
                .dirichlet[r]
                .iter()
                .map(|&(jj, c)| c * dirichlet[jj])
                .sum::<f64>();
        }
        b
    }

    /// Lower/upper bandwidth in the row-major unknown ordering.
    pub fn bandwidth(&self) -> usize {
        (0..self.size())
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }
}

/// Flux `(A ∇u)_s` through the interface row, recovered from the balance of
/// the half cell `0 < s < Δs/2`:
/// `F_0 = F_{1/2} + Δs/2 (δ_ξ F_ξ - (η u_0 - f_0) / J_0)`.
///
/// Summed over the columns this equals the discrete volume integral of
/// `(f - η u) / J`, so fluxes of solutions with `η = 0, f = 0` cancel exactly.
pub fn interface_flux(
    metric: &PhaseMetric,
    dx: f64,
    shift: f64,
    field: &Array2<f64>,
    source_row0: Option<&[f64]>,
) -> Vec<f64> {
    let nx = field.ncols();
    let ds = metric.spacing;
    let u = |j: isize, i: usize| field[[i, j.clamp(0, nx as isize - 1) as usize]];
    let ds_row0 = |j: isize| (-3.0 * u(j, 0) + 4.0 * u(j, 1) - u(j, 2)) / (2.0 * ds);

    let xflux = |f: usize| -> f64 {
        if f == 0 || f == nx {
            return 0.0;
        }
        let (l, r) = (f as isize - 1, f as isize);
        let a11 = metric.xface_a11[[0, f]];
        let a12 = metric.xface_a12[[0, f]];
        a11 * (u(r, 0) - u(l, 0)) / dx + a12 * 0.5 * (ds_row0(l) + ds_row0(r))
    };

    (0..nx)
        .map(|j| {
            let jj = j as isize;
            let a22 = metric.sface_a22[[0, j]];
            let a12 = metric.sface_a12[[0, j]];
            let cross = (u(jj + 1, 0) - u(jj - 1, 0) + u(jj + 1, 1) - u(jj - 1, 1)) / (4.0 * dx);
            let half = a22 * (u(jj, 1) - u(jj, 0)) / ds + a12 * cross;
            let divergence = (xflux(j + 1) - xflux(j)) / dx;
            let f0 = source_row0.map_or(0.0, |s| s[j]);
            let reaction = (shift * u(jj, 0) - f0) / metric.det[[0, j]];
            half + 0.5 * ds * (divergence - reaction)
        })
        .collect()
}

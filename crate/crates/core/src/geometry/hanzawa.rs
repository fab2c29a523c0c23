//! Hanzawa transform of the straight-walled container.
//!
//! The physical point `(x, y)` is sent to the reference point
//! `(x, ζ) = (x, y - χ((y - h(x))/a) h(x))`, which flattens the graph of `h` onto
//! `Σ` and is the identity outside the tube `|y| < a`. The two phases are solved
//! on the fixed rectangles `[0, W] x [0, d⁺]` and `[0, W] x [-d⁻, 0]`, with the
//! variable coefficients of the pulled-back operator sampled here.
//!
//! For a reference-grid function `u` the physical gradient is `Gᵀ ∇u` with
//! `G = [[1, 0], [ζ_x, ζ_y]]`, and the pulled-back Laplacian in divergence form
//! is `Δ_h u = J ∇·(A ∇u)` with `J = det G = ζ_y` and `A = G Gᵀ / J`.

use ndarray::Array2;

use super::cutoff::{chi, chi_prime};
use super::{ContainerGeometry, HeightField};
use crate::elliptic::{EllipticGrid, Phase};
use crate::error::{Error, Result};
use crate::spectral::{resample, CosineSeries};

/// Derivatives of the reference vertical coordinate at one physical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub zeta_x: f64,
    pub zeta_y: f64,
}

impl Metric {
    pub const IDENTITY: Metric = Metric {
        zeta_x: 0.0,
        zeta_y: 1.0,
    };

    pub fn det(&self) -> f64 {
        self.zeta_y
    }

    /// `DΘ_h` as a row-major 2x2 matrix.
    pub fn jacobian(&self) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [self.zeta_x, self.zeta_y]]
    }

    /// `(DΘ_h)^{-T}`.
    pub fn inverse_transpose(&self) -> [[f64; 2]; 2] {
        let inv = 1.0 / self.zeta_y;
        [[1.0, -self.zeta_x * inv], [0.0, inv]]
    }

    /// Symmetric conductivity `G Gᵀ / J` as `(a11, a12, a22)`.
    pub fn conductivity(&self) -> (f64, f64, f64) {
        let inv = 1.0 / self.zeta_y;
        (
            inv,
            self.zeta_x * inv,
            (self.zeta_x * self.zeta_x + self.zeta_y * self.zeta_y) * inv,
        )
    }

    /// Physical gradient from the reference gradient `(∂_ξ u, ∂_ζ u)`.
    pub fn physical_gradient(&self, reference: [f64; 2]) -> [f64; 2] {
        [
            reference[0] + self.zeta_x * reference[1],
            self.zeta_y * reference[1],
        ]
    }
}

/// Coefficients of the pulled-back operator on one phase rectangle, expressed
/// in the coordinates `(ξ, s)` with `s = |ζ|` increasing away from `Σ`.
///
/// Rows `i = 0..=m` sit at `s = i Δs`; row 0 is the interface. Horizontal faces
/// `f = 0..=nx` sit at `x = f Δx` (faces 0 and `nx` are the side walls).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMetric {
    pub phase: Phase,
    pub spacing: f64,
    /// `J` at nodes, shape `(m + 1, nx)`.
    pub det: Array2<f64>,
    /// `A11` on vertical cell faces, shape `(m + 1, nx + 1)`.
    pub xface_a11: Array2<f64>,
    /// `A12` (sign-adjusted to `s`) on vertical cell faces, shape `(m + 1, nx + 1)`.
    pub xface_a12: Array2<f64>,
    /// `A12` (sign-adjusted) on half rows `s = (i + 1/2) Δs`, shape `(m, nx)`.
    pub sface_a12: Array2<f64>,
    /// `A22` on half rows, shape `(m, nx)`.
    pub sface_a22: Array2<f64>,
}

impl PhaseMetric {
    fn identity(phase: Phase, spacing: f64, rows: usize, nx: usize) -> Self {
        Self {
            phase,
            spacing,
            det: Array2::ones((rows + 1, nx)),
            xface_a11: Array2::ones((rows + 1, nx + 1)),
            xface_a12: Array2::zeros((rows + 1, nx + 1)),
            sface_a12: Array2::zeros((rows, nx)),
            sface_a22: Array2::ones((rows, nx)),
        }
    }

    pub fn rows(&self) -> usize {
        self.sface_a22.nrows()
    }
}

/// The sampled Hanzawa transform for a height field on a given elliptic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HanzawaMap {
    geometry: ContainerGeometry,
    grid: EllipticGrid,
    heights: Vec<f64>,
    series: CosineSeries,
    identity: bool,
    upper: PhaseMetric,
    lower: PhaseMetric,
    interface: Vec<Metric>,
    min_det: f64,
}

struct Column {
    height: f64,
    slope: f64,
    tube: f64,
}

impl Column {
    fn forward(&self, y: f64) -> f64 {
        y - chi((y - self.height) / self.tube) * self.height
    }

    /// Inverse of `forward`; `forward` is strictly increasing with slope at
    /// least `1 - 4|h|/a`, and the root is bracketed by `ζ ± |h|`.
    fn inverse(&self, zeta: f64) -> f64 {
        let spread = self.height.abs();
        if spread == 0.0 {
            return zeta;
        }
        let (mut lo, mut hi) = (zeta - spread, zeta + spread);
        let mut y = zeta + self.height * chi(zeta / self.tube);
        let tol = 4.0 * f64::EPSILON * (zeta.abs() + spread + self.tube);
        for _ in 0..100 {
            let residual = self.forward(y) - zeta;
            if residual.abs() <= tol {
                break;
            }
            if residual > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let slope = 1.0 - chi_prime((y - self.height) / self.tube) * self.height / self.tube;
            let newton = y - residual / slope;
            y = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        y
    }

    fn metric(&self, zeta: f64) -> Metric {
        let y = self.inverse(zeta);
        let r = (y - self.height) / self.tube;
        let ratio = self.height / self.tube;
        Metric {
            zeta_x: self.slope * (chi_prime(r) * ratio - chi(r)),
            zeta_y: 1.0 - chi_prime(r) * ratio,
        }
    }
}

impl HanzawaMap {
    /// The map of the flat interface `h ≡ 0`.
    pub fn identity(geometry: ContainerGeometry, grid: EllipticGrid) -> Self {
        let nx = grid.nx();
        Self {
            geometry,
            grid,
            heights: vec![0.0; nx],
            series: CosineSeries::from_nodes(&vec![0.0; nx], geometry.width()),
            identity: true,
            upper: PhaseMetric::identity(Phase::Upper, grid.spacing(&geometry, Phase::Upper), grid.rows(Phase::Upper), nx),
            lower: PhaseMetric::identity(Phase::Lower, grid.spacing(&geometry, Phase::Lower), grid.rows(Phase::Lower), nx),
            interface: vec![Metric::IDENTITY; nx],
            min_det: 1.0,
        }
    }

    /// Samples the transform of `h` on `grid`, interpolating `h` to the grid's
    /// columns with its cosine series when the resolutions differ.
    pub fn new(h: &HeightField, grid: &EllipticGrid) -> Result<Self> {
        h.check_admissible()?;
        let geometry = *h.geometry();
        if h.values().iter().all(|&v| v == 0.0) {
            return Ok(Self::identity(geometry, *grid));
        }
        let nx = grid.nx();
        let heights = resample(h.values(), nx);
        let fine = HeightField::new(geometry, heights.clone())?;
        fine.check_admissible()?;

        let tube = geometry.tube_half_width();
        let dx = geometry.node_spacing(nx);
        let series = CosineSeries::from_nodes(&heights, geometry.width());
        let column = |x: f64| Column {
            height: series.value(x),
            slope: series.derivative(x),
            tube,
        };
        let centers: Vec<Column> = (0..nx).map(|j| column((j as f64 + 0.5) * dx)).collect();
        let faces: Vec<Column> = (0..=nx).map(|f| column(f as f64 * dx)).collect();

        let sample = |phase: Phase| {
            let rows = grid.rows(phase);
            let ds = grid.spacing(&geometry, phase);
            let sign = phase.orientation();
            let mut metric = PhaseMetric::identity(phase, ds, rows, nx);
            for i in 0..=rows {
                let zeta = sign * i as f64 * ds;
                for (j, c) in centers.iter().enumerate() {
                    metric.det[[i, j]] = c.metric(zeta).det();
                }
                for (f, c) in faces.iter().enumerate() {
                    let (a11, a12, _) = c.metric(zeta).conductivity();
                    metric.xface_a11[[i, f]] = a11;
                    metric.xface_a12[[i, f]] = sign * a12;
                }
            }
            for i in 0..rows {
                let zeta = sign * (i as f64 + 0.5) * ds;
                for (j, c) in centers.iter().enumerate() {
                    let (_, a12, a22) = c.metric(zeta).conductivity();
                    metric.sface_a12[[i, j]] = sign * a12;
                    metric.sface_a22[[i, j]] = a22;
                }
            }
            metric
        };
        let upper = sample(Phase::Upper);
        let lower = sample(Phase::Lower);
        let interface: Vec<Metric> = centers.iter().map(|c| c.metric(0.0)).collect();

        let min_det = upper
            .det
            .iter()
            .chain(lower.det.iter())
            .fold(f64::INFINITY, |m, &d| m.min(d));
        let bound = 1.0 - 5.0 * fine.max_abs() / tube;
        if !(min_det >= bound && bound > 0.0) {
            return Err(Error::DegenerateMap { min_det, bound });
        }

        Ok(Self {
            geometry,
            grid: *grid,
            heights,
            series,
            identity: false,
            upper,
            lower,
            interface,
            min_det,
        })
    }

    pub fn geometry(&self) -> &ContainerGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &EllipticGrid {
        &self.grid
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Heights at the elliptic grid's columns.
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn phase(&self, phase: Phase) -> &PhaseMetric {
        match phase {
            Phase::Upper => &self.upper,
            Phase::Lower => &self.lower,
        }
    }

    /// Metric on `Σ` (where `y = h`) at column `j`.
    pub fn interface_metric(&self, j: usize) -> Metric {
        self.interface[j]
    }

    pub fn min_det(&self) -> f64 {
        self.min_det
    }

    fn column(&self, x: f64) -> Column {
        Column {
            height: self.series.value(x),
            slope: self.series.derivative(x),
            tube: self.geometry.tube_half_width(),
        }
    }

    /// Reference vertical coordinate `ζ` of the physical point `(x, y)`.
    pub fn forward(&self, x: f64, y: f64) -> f64 {
        if self.identity {
            y
        } else {
            self.column(x).forward(y)
        }
    }

    /// Physical height `y` of the reference point `(x, ζ)`.
    pub fn inverse(&self, x: f64, zeta: f64) -> f64 {
        if self.identity {
            zeta
        } else {
            self.column(x).inverse(zeta)
        }
    }

    /// Metric at the reference point `(x, ζ)`.
    pub fn metric_at(&self, x: f64, zeta: f64) -> Metric {
        if self.identity {
            Metric::IDENTITY
        } else {
            self.column(x).metric(zeta)
        }
    }
}

/// Builds the Hanzawa transform of `h` sampled on `grid`.
pub fn build_hanzawa(h: &HeightField, grid: &EllipticGrid) -> Result<HanzawaMap> {
    HanzawaMap::new(h, grid)
}

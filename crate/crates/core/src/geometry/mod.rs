//! Container geometry, height functions and graph curvature.
//!
//! The container is `[0, W] x [-d⁻, d⁺]` with the reference interface
//! `Σ = [0, W] x {0}`. The upper phase occupies `y > h(x)` and the lower phase
//! `y < h(x)`; interface normals point from the lower phase into the upper one.
//!
//! Heights live on `N` cell-centred nodes `x_j = (j + 1/2) W / N`. The 90° contact
//! angle is the homogeneous Neumann condition `h'(0) = h'(W) = 0`, realized by
//! mirror ghost values `h_{-1} = h_0`, `h_N = h_{N-1}` in every difference stencil.
//!
//! Sign convention: `curvature(h)` linearizes to `+h''` at `h = 0`.

pub mod cutoff;
mod hanzawa;

pub use hanzawa::{build_hanzawa, HanzawaMap, Metric, PhaseMetric};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_positive, Error, Result};

/// The fixed rectangular container.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainerGeometry {
    width: f64,
    depth_plus: f64,
    depth_minus: f64,
}

impl ContainerGeometry {
    pub fn new(width: f64, depth_plus: f64, depth_minus: f64) -> Result<Self> {
        ensure_positive("width", width)?;
        ensure_positive("depth_plus", depth_plus)?;
        ensure_positive("depth_minus", depth_minus)?;
        Ok(Self {
            width,
            depth_plus,
            depth_minus,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Distance from `Σ` to the top wall.
    pub fn depth_plus(&self) -> f64 {
        self.depth_plus
    }

    /// Distance from `Σ` to the bottom wall.
    pub fn depth_minus(&self) -> f64 {
        self.depth_minus
    }

    /// Half-width `a` of the tube around `Σ` in which the Hanzawa map acts.
    pub fn tube_half_width(&self) -> f64 {
        self.depth_plus.min(self.depth_minus)
    }

    /// Heights must satisfy `max|h| < a/5`.
    pub fn admissibility_bound(&self) -> f64 {
        self.tube_half_width() / 5.0
    }

    /// Wavenumber `k_m = π m / W` of cosine mode `m`.
    pub fn wavenumber(&self, mode: usize) -> f64 {
        std::f64::consts::PI * mode as f64 / self.width
    }

    pub fn node_spacing(&self, n: usize) -> f64 {
        self.width / n as f64
    }

    /// Cell-centred node positions for `n` nodes.
    pub fn nodes(&self, n: usize) -> Vec<f64> {
        let dx = self.node_spacing(n);
        (0..n).map(|j| (j as f64 + 0.5) * dx).collect()
    }
}

/// Nodal samples of the height function over `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    geometry: ContainerGeometry,
    values: Vec<f64>,
}

impl HeightField {
    pub fn new(geometry: ContainerGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "n_nodes",
                reason: format!("need at least 2 nodes, got {}", values.len()),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("non-finite height {bad}"),
            });
        }
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: ContainerGeometry, n: usize) -> Result<Self> {
        Self::new(geometry, vec![0.0; n])
    }

    /// Samples `f` at the cell-centred nodes.
    pub fn from_fn(geometry: ContainerGeometry, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(geometry, geometry.nodes(n).into_iter().map(f).collect())
    }

    /// `amplitude * cos(π m x / W)`.
    pub fn cosine_mode(
        geometry: ContainerGeometry,
        n: usize,
        mode: usize,
        amplitude: f64,
    ) -> Result<Self> {
        let k = geometry.wavenumber(mode);
        Self::from_fn(geometry, n, |x| amplitude * (k * x).cos())
    }

    /// Smooth random profile from a seeded generator: cosine modes `0..=8`
    /// with uniform coefficients damped like `1/(1+m)`, scaled so that
    /// `max|h| = amplitude`.
    pub fn seeded_random(geometry: ContainerGeometry, n: usize, seed: u64, amplitude: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = n.min(9);
        let coeffs: Vec<f64> = (0..modes)
            .map(|m| rng.random_range(-1.0..1.0) / (1.0 + m as f64))
            .collect();
        let raw = Self::from_fn(geometry, n, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(m, c)| c * (geometry.wavenumber(m) * x).cos())
                .sum()
        })?;
        let peak = raw.max_abs();
        if peak == 0.0 {
            return Ok(raw);
        }
        let scale = amplitude / peak;
        raw.with_values(raw.values.iter().map(|v| v * scale).collect())
    }

    pub fn geometry(&self) -> &ContainerGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.geometry.node_spacing(self.len())
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.geometry.nodes(self.len())
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Self::new(self.geometry, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// `max_j |h_j - mean(h)|`.
    pub fn deviation(&self) -> f64 {
        let mean = self.mean();
        self.values.iter().fold(0.0, |m, v| m.max((v - mean).abs()))
    }

    /// Midpoint-rule volume `∫ h dx`.
    pub fn volume(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }

    pub fn is_admissible(&self) -> bool {
        self.max_abs() < self.geometry.admissibility_bound()
    }

    pub fn check_admissible(&self) -> Result<()> {
        let bound = self.geometry.admissibility_bound();
        let max_abs = self.max_abs();
        if max_abs < bound {
            Ok(())
        } else {
            Err(Error::Inadmissible { max_abs, bound })
        }
    }
}

/// Centred first differences with mirror ghosts at both walls.
pub fn first_difference(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|j| {
            let prev = values[j.saturating_sub(1)];
            let next = values[(j + 1).min(n - 1)];
            (next - prev) / (2.0 * dx)
        })
        .collect()
}

/// Three-point second differences with mirror ghosts, written as a
/// difference of face fluxes so that constants map to exact zeros.
pub fn second_difference(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let inv = 1.0 / (dx * dx);
    (0..n)
        .map(|j| {
            let prev = values[j.saturating_sub(1)];
            let next = values[(j + 1).min(n - 1)];
            ((next - values[j]) - (values[j] - prev)) * inv
        })
        .collect()
}

fn require_nodes(h: &HeightField, min: usize) -> Result<()> {
    if h.len() < min {
        Err(Error::InvalidParameter {
            name: "n_nodes",
            reason: format!("need at least {min} nodes, got {}", h.len()),
        })
    } else {
        Ok(())
    }
}

/// Graph curvature `h'' (1 + h'^2)^{-3/2}` at the nodes.
pub fn curvature(h: &HeightField) -> Result<Vec<f64>> {
    let decomposition = curvature_decomposition(h)?;
    Ok(decomposition.reconstruct(h.values()))
}

/// Splitting of the curvature into a principal part linear in `h''` and a
/// lower-order remainder.
///
/// With straight walls the curvilinear correction vanishes, so the principal
/// part is the second-difference stencil scaled by `(1 + h'^2)^{-3/2}` and the
/// remainder is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureDecomposition {
    spacing: f64,
    principal: Vec<f64>,
    remainder: Vec<f64>,
}

impl CurvatureDecomposition {
    /// Per-node multipliers of the second-difference stencil.
    pub fn principal_coefficients(&self) -> &[f64] {
        &self.principal
    }

    pub fn remainder(&self) -> &[f64] {
        &self.remainder
    }

    /// `P(h) g` for an arbitrary nodal vector `g`.
    pub fn apply_principal(&self, g: &[f64]) -> Vec<f64> {
        second_difference(g, self.spacing)
            .into_iter()
            .zip(&self.principal)
            .map(|(d2, c)| c * d2)
            .collect()
    }

    /// `P(h) g + Q(h)`.
    pub fn reconstruct(&self, g: &[f64]) -> Vec<f64> {
        self.apply_principal(g)
            .into_iter()
            .zip(&self.remainder)
            .map(|(p, q)| p + q)
            .collect()
    }
}

pub fn curvature_decomposition(h: &HeightField) -> Result<CurvatureDecomposition> {
    h.check_admissible()?;
    require_nodes(h, 4)?;
    let dx = h.spacing();
    let principal = first_difference(h.values(), dx)
        .into_iter()
        .map(|s| {
            let w = 1.0 + s * s;
            1.0 / (w * w.sqrt())
        })
        .collect();
    Ok(CurvatureDecomposition {
        spacing: dx,
        principal,
        remainder: vec![0.0; h.len()],
    })
}

/// Unit normals of the graph and the factor `√(1 + h'^2)` relating the normal
/// velocity to `∂_t h`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceNormals {
    pub normals: Vec<[f64; 2]>,
    pub velocity_factor: Vec<f64>,
}

pub fn normal_and_velocity_factor(h: &HeightField) -> Result<InterfaceNormals> {
    h.check_admissible()?;
    let slopes = first_difference(h.values(), h.spacing());
    let mut normals = Vec::with_capacity(h.len());
    let mut velocity_factor = Vec::with_capacity(h.len());
    for s in slopes {
        let norm = (1.0 + s * s).sqrt();
        normals.push([-s / norm, 1.0 / norm]);
        velocity_factor.push(norm);
    }
    Ok(InterfaceNormals {
        normals,
        velocity_factor,
    })
}

/// Discrete interface length `Σ_j √(1 + h'_j^2) Δx`.
pub fn perimeter(h: &HeightField) -> f64 {
    let dx = h.spacing();
    first_difference(h.values(), dx)
        .into_iter()
        .map(|s| (1.0 + s * s).sqrt())
        .sum::<f64>()
        * dx
}

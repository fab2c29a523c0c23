//! Conserved quantities, the energy law, the spectrum of the assembled
//! linearization and decay-rate fits.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::elliptic::LinearizedOperator;
use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::geometry::{perimeter, ContainerGeometry, HeightField};
use crate::spectral::{symbol_strip, CosineTransform, ModeCoefficients};

/// Smallest elliptic resolution accepted for assembling `A₀`.
pub const MIN_ASSEMBLY_RESOLUTION: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    /// `∫ h dx`.
    pub volume: f64,
    /// Discrete perimeter `Σ √(1 + h'²) Δx`.
    pub energy: f64,
    /// `max |h - mean|`.
    pub deviation: f64,
    /// `-d/dt log(deviation)` from the previous record, when both are positive.
    pub rate: Option<f64>,
}

impl DiagnosticsRecord {
    pub fn measure(h: &HeightField) -> Self {
        Self {
            volume: h.volume(),
            energy: perimeter(h),
            deviation: h.deviation(),
            rate: None,
        }
    }

    pub fn with_rate_from(mut self, previous: &DiagnosticsRecord, dt: f64) -> Self {
        self.rate = (previous.deviation > 0.0 && self.deviation > 0.0 && dt > 0.0)
            .then(|| (previous.deviation.ln() - self.deviation.ln()) / dt);
        self
    }
}

/// Dense matrix of the discrete `A₀` in the nodal basis, one solve per column.
pub fn assemble_a0(op: &LinearizedOperator) -> Result<DMatrix<f64>> {
    let grid = op.grid();
    let smallest = [grid.nx(), grid.rows(crate::Phase::Upper), grid.rows(crate::Phase::Lower)]
        .into_iter()
        .min()
        .unwrap_or(0);
    if smallest < MIN_ASSEMBLY_RESOLUTION {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: format!("assembly needs elliptic resolution >= {MIN_ASSEMBLY_RESOLUTION}, got {smallest}"),
        });
    }
    let n = op.nodes();
    let columns: Result<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            op.apply(&e)
        })
        .collect();
    let columns = columns?;
    Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
}

/// Orthonormal cosine-transform matrix `C` with `ĥ = C h`.
fn cosine_matrix(n: usize) -> DMatrix<f64> {
    let transform = CosineTransform::new(n);
    let mut c = DMatrix::zeros(n, n);
    for m in 0..n {
        let mut basis = vec![0.0; n];
        basis[m] = 1.0;
        let row = transform.inverse(&ModeCoefficients::new(basis));
        for (j, v) in row.into_iter().enumerate() {
            c[(m, j)] = v;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Eigenvalues of the symmetric part, ascending.
    pub eigenvalues: Vec<f64>,
    pub kernel_dimension: usize,
    /// Largest deviation of the unit max-norm kernel eigenvector from its mean.
    pub kernel_vector_deviation: f64,
    /// Numerical rank of the raw matrix at tolerance `1e-6 · a_max`.
    pub rank: usize,
    /// Numerical rank of the squared matrix at tolerance `1e-6 · a_max · a₁`.
    pub rank_squared: usize,
    /// Largest off-diagonal entry in the cosine basis relative to the larger
    /// of the two corresponding diagonal entries.
    pub leakage: f64,
    /// Cosine-basis diagonal entries.
    pub diagonal: Vec<f64>,
    /// Per-mode `|diag_m - a_strip(k_m)| / a_strip(k_m)`; mode 0 holds the
    /// absolute diagonal entry relative to `a₁`.
    pub symbol_errors: Vec<f64>,
    /// `‖M - Mᵀ‖_F / ‖M‖_F`.
    pub asymmetry: f64,
    /// Largest `|Im λ| / max|λ|` over the eigenvalues of the raw matrix.
    pub raw_imaginary: f64,
    /// Strip symbol of the first mode, the scale of the kernel threshold.
    pub a1: f64,
    /// Largest strip symbol among the represented modes.
    pub a_max: f64,
    pub violations: Vec<String>,
}

impl SpectrumReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Smallest eigenvalue outside the kernel.
    pub fn smallest_nonzero(&self) -> Option<f64> {
        self.eigenvalues.get(self.kernel_dimension).copied()
    }

    /// Largest symbol error over modes `1..=max_mode`.
    pub fn max_symbol_error(&self, max_mode: usize) -> f64 {
        self.symbol_errors
            .iter()
            .skip(1)
            .take(max_mode)
            .fold(0.0, |m, &e| m.max(e))
    }
}

impl fmt::Display for SpectrumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "size: {}", self.eigenvalues.len())?;
        writeln!(f, "kernel_dimension: {}", self.kernel_dimension)?;
        writeln!(f, "kernel_vector_deviation: {:.17e}", self.kernel_vector_deviation)?;
        writeln!(f, "rank: {}", self.rank)?;
        writeln!(f, "rank_squared: {}", self.rank_squared)?;
        writeln!(f, "smallest_nonzero: {:.17e}", self.smallest_nonzero().unwrap_or(f64::NAN))?;
        writeln!(f, "a1: {:.17e}", self.a1)?;
        writeln!(f, "a_max: {:.17e}", self.a_max)?;
        writeln!(f, "leakage: {:.17e}", self.leakage)?;
        writeln!(f, "asymmetry: {:.17e}", self.asymmetry)?;
        writeln!(f, "raw_imaginary: {:.17e}", self.raw_imaginary)?;
        writeln!(f, "passed: {}", self.passed())?;
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        for (i, e) in self.eigenvalues.iter().enumerate() {
            writeln!(f, "eigenvalue[{i}]: {e:.17e}")?;
        }
        for (m, (d, e)) in self.diagonal.iter().zip(&self.symbol_errors).enumerate() {
            writeln!(f, "mode[{m}]: diagonal {d:.17e} symbol_error {e:.17e}")?;
        }
        Ok(())
    }
}

fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    m.clone().singular_values().iter().filter(|&&s| s > tol).count()
}

/// Spectral checks of an assembled `A₀` against the strip symbol of `geometry`.
pub fn spectrum_check(matrix: &DMatrix<f64>, geometry: &ContainerGeometry) -> Result<SpectrumReport> {
    let n = matrix.nrows();
    if n < 2 || matrix.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: n.max(2) * n.max(2),
            got: matrix.len(),
        });
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("matrix has non-finite entries".into()));
    }
    let strip: Vec<f64> = (0..n).map(|m| symbol_strip(geometry.wavenumber(m), geometry)).collect();
    let a1 = strip[1];
    let a_max = strip.iter().fold(0.0f64, |m, &v| m.max(v));

    let symmetric = (matrix + matrix.transpose()) * 0.5;
    let eigen = SymmetricEigen::try_new(symmetric, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();

    let kernel_tol = 1e-6 * a1;
    let kernel_dimension = eigenvalues.iter().filter(|v| v.abs() < kernel_tol).count();
    let kernel_vector_deviation = {
        let v = eigen.eigenvectors.column(order[0]);
        let scale = v.amax();
        let mean = v.mean();
        v.iter().fold(0.0f64, |m, x| m.max((x - mean).abs())) / scale
    };

    let rank_tol = 1e-6 * a_max;
    let rank = numerical_rank(matrix, rank_tol);
    let rank_squared = numerical_rank(&(matrix * matrix), rank_tol * a1);

    let c = cosine_matrix(n);
    let modal = &c * matrix * c.transpose();
    let diagonal: Vec<f64> = (0..n).map(|m| modal[(m, m)]).collect();
    let mut leakage: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let scale = diagonal[i].abs().max(diagonal[j].abs());
                if scale > 0.0 {
                    leakage = leakage.max(modal[(i, j)].abs() / scale);
                }
            }
        }
    }
    let symbol_errors: Vec<f64> = (0..n)
        .map(|m| {
            if m == 0 {
                diagonal[0].abs() / a1
            } else {
                (diagonal[m] - strip[m]).abs() / strip[m]
            }
        })
        .collect();

    let asymmetry = (matrix - matrix.transpose()).norm() / matrix.norm().max(f64::MIN_POSITIVE);
    let complex = matrix.clone().complex_eigenvalues();
    let largest = complex.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let raw_imaginary = complex.iter().fold(0.0f64, |m, z| m.max(z.im.abs())) / largest.max(f64::MIN_POSITIVE);

    let mut violations = Vec::new();
    if kernel_dimension != 1 {
        violations.push(format!("kernel dimension {kernel_dimension}, expected 1"));
    }
    if !(kernel_vector_deviation <= 1e-6) {
        violations.push(format!("kernel eigenvector deviates from a constant by {kernel_vector_deviation:e}"));
    }
    if let Some(&lowest) = eigenvalues.first() {
        if lowest < -1e-9 * a_max {
            violations.push(format!("negative eigenvalue {lowest:e}"));
        }
    }
    if eigenvalues.iter().skip(kernel_dimension.max(1)).any(|&v| v <= 0.0) {
        violations.push("non-positive eigenvalue outside the kernel".into());
    }
    if rank != n - 1 {
        violations.push(format!("rank {rank}, expected {}", n - 1));
    }
    if rank_squared != rank {
        violations.push(format!("rank of the square {rank_squared} differs from rank {rank}"));
    }

    Ok(SpectrumReport {
        eigenvalues,
        kernel_dimension,
        kernel_vector_deviation,
        rank,
        rank_squared,
        leakage,
        diagonal,
        symbol_errors,
        asymmetry,
        raw_imaginary,
        a1,
        a_max,
        violations,
    })
}

/// Minimum number of samples a decay fit accepts.
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    /// Root-mean-square residual of the fit in `log(deviation)`.
    pub residual: f64,
    pub points: usize,
    pub window_start: f64,
}

/// Least-squares decay rate of `(t, deviation)` samples over the tail
/// window: the last half of the time span, restricted to samples below 10%
/// of the initial deviation and above `1e-14`.
pub fn fit_decay_series(series: &[(f64, f64)]) -> Result<DecayFit> {
    let (Some(&(t0, d0)), Some(&(t1, _))) = (series.first(), series.last()) else {
        return Err(Error::InsufficientData {
            found: 0,
            required: MIN_FIT_POINTS,
        });
    };
    let window_start = t0 + 0.5 * (t1 - t0);
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(t, d)| t >= window_start && d < 0.1 * d0 && d > 1e-14)
        .map(|&(t, d)| (t, d.ln()))
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            found: points.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let k = points.len() as f64;
    let tm = points.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let residual = (points
        .iter()
        .map(|p| (p.1 - ym - slope * (p.0 - tm)).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        residual,
        points: points.len(),
        window_start,
    })
}

/// Decay fit over the snapshots of a trajectory.
pub fn fit_decay_rate(trajectory: &Trajectory) -> Result<DecayFit> {
    fit_decay_series(&trajectory.deviation_series())
}

/// Invariants of a trajectory, recomputed from the stored heights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    /// `max_t |∫h(t) - ∫h₀| / (W a)`.
    pub volume_drift: f64,
    /// Largest per-step increase of the perimeter (negative if it always fell).
    pub max_energy_increase: f64,
    /// Steps whose perimeter grew by more than the slack.
    pub energy_violations: usize,
    /// `|mean(h_final) - mean(h₀)| / a`.
    pub mean_drift: f64,
    /// Smallest perimeter minus the width; never negative for a graph.
    pub energy_excess: f64,
}

/// Perimeter slack per step.
pub const ENERGY_SLACK: f64 = 1e-10;

pub fn check_invariants(trajectory: &Trajectory) -> InvariantReport {
    let first = trajectory.initial_state();
    let geometry = *first.h.geometry();
    let scale = geometry.width() * geometry.tube_half_width();
    let v0 = first.h.volume();
    let volume_drift = trajectory
        .snapshots
        .iter()
        .map(|s| (s.h.volume() - v0).abs() / scale)
        .fold(0.0, f64::max);
    let energies: Vec<f64> = trajectory.log.iter().map(|r| r.energy).collect();
    let increases: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    let max_energy_increase = increases.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let energy_violations = increases.iter().filter(|&&d| d > ENERGY_SLACK).count();
    let snapshot_energy = trajectory.snapshots.iter().map(|s| perimeter(&s.h));
    let energy_excess = snapshot_energy
        .chain(energies.iter().copied())
        .map(|e| e - geometry.width())
        .fold(f64::INFINITY, f64::min);
    let mean_drift = (trajectory.final_state().h.mean() - first.h.mean()).abs() / geometry.tube_half_width();
    InvariantReport {
        volume_drift,
        max_energy_increase,
        energy_violations,
        mean_drift,
        energy_excess,
    }
}

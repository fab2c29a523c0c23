//! Cosine-basis transforms and the Dirichlet-to-Neumann symbols of the
//! linearized flow.
//!
//! The orthonormal type-II cosine transform diagonalizes the Neumann
//! second-difference operator on cell-centred nodes, so every linear,
//! translation-invariant piece of the discrete problem at `h = 0` is diagonal
//! in this basis.

mod transform;

pub use transform::{resample, CosineSeries, CosineTransform, ModeCoefficients};

use crate::error::{Error, Result};
use crate::geometry::{ContainerGeometry, HeightField};

/// Half-space symbol `2 ξ² √(ω² + ξ²)` of the shifted model problem.
pub fn symbol_halfspace(xi: f64, omega: f64) -> f64 {
    2.0 * xi * xi * (omega * omega + xi * xi).sqrt()
}

/// Strip symbol `k³ (tanh(k d⁺) + tanh(k d⁻))` of the container with Neumann walls.
pub fn symbol_strip(k: f64, geometry: &ContainerGeometry) -> f64 {
    let k = k.abs();
    k * k * k * ((k * geometry.depth_plus()).tanh() + (k * geometry.depth_minus()).tanh())
}

/// Maximum relative deviation of `a_ω(ξ)` from `ω³ a_1(ξ/ω)` over the samples.
///
/// Samples with `a_ω(ξ) = 0` contribute the absolute deviation instead.
pub fn scaling_identity_check(samples: &[(f64, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(xi, omega) in samples {
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("scaling requires ω > 0, got {omega}"),
            });
        }
        let direct = symbol_halfspace(xi, omega);
        let scaled = omega.powi(3) * symbol_halfspace(xi / omega, 1.0);
        let diff = (direct - scaled).abs();
        worst = worst.max(if direct == 0.0 { diff } else { diff / direct });
    }
    Ok(worst)
}

/// Per-mode decay rates of the linearized operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    wavenumbers: Vec<f64>,
    rates: Vec<f64>,
}

impl SymbolTable {
    /// Analytic strip symbol for modes `0..n`.
    pub fn strip(geometry: &ContainerGeometry, n: usize) -> Self {
        let wavenumbers: Vec<f64> = (0..n).map(|m| geometry.wavenumber(m)).collect();
        let rates = wavenumbers.iter().map(|&k| symbol_strip(k, geometry)).collect();
        Self { wavenumbers, rates }
    }

    /// Table with externally measured rates, e.g. the diagonal of the
    /// discrete operator in the cosine basis.
    pub fn from_rates(geometry: &ContainerGeometry, rates: Vec<f64>) -> Self {
        let wavenumbers = (0..rates.len()).map(|m| geometry.wavenumber(m)).collect();
        Self { wavenumbers, rates }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, mode: usize) -> f64 {
        self.rates[mode]
    }

    /// Exact per-mode solution of `(∂_t + ω³) ĥ + a_m ĥ = f̂` with `f̂`
    /// constant over `[0, t]`.
    pub fn propagate(
        &self,
        h0: &HeightField,
        forcing: Option<&ModeCoefficients>,
        t: f64,
        omega: f64,
    ) -> Result<HeightField> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("must be >= 0, got {t}"),
            });
        }
        if !(omega >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("must be >= 0, got {omega}"),
            });
        }
        if h0.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: h0.len(),
            });
        }
        if let Some(f) = forcing {
            if f.len() != self.len() {
                return Err(Error::ShapeMismatch {
                    expected: self.len(),
                    got: f.len(),
                });
            }
        }
        let transform = CosineTransform::new(h0.len());
        let mut coeffs = transform.forward(h0.values());
        let shift = omega.powi(3);
        for (m, c) in coeffs.as_mut_slice().iter_mut().enumerate() {
            let lambda = self.rates[m] + shift;
            let decay = (-lambda * t).exp();
            let mut next = decay * *c;
            if let Some(f) = forcing {
                let weight = if lambda == 0.0 {
                    t
                } else {
                    -(-lambda * t).exp_m1() / lambda
                };
                next += weight * f.as_slice()[m];
            }
            *c = next;
        }
        h0.with_values(transform.inverse(&coeffs))
    }
}

/// Exact linearized evolution under the strip symbol.
pub fn linear_propagate(
    h0: &HeightField,
    forcing: Option<&ModeCoefficients>,
    t: f64,
    omega: f64,
) -> Result<HeightField> {
    SymbolTable::strip(h0.geometry(), h0.len()).propagate(h0, forcing, t, omega)
}

pub fn dct_forward(h: &HeightField) -> ModeCoefficients {
    CosineTransform::new(h.len()).forward(h.values())
}

pub fn dct_inverse(geometry: ContainerGeometry, coeffs: &ModeCoefficients) -> Result<HeightField> {
    HeightField::new(geometry, CosineTransform::new(coeffs.len()).inverse(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> ContainerGeometry {
        ContainerGeometry::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn halfspace_values() {
        assert_eq!(symbol_halfspace(1.0, 0.0), 2.0);
        assert!((symbol_halfspace(1.0, 1.0) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((symbol_halfspace(1.0, 1.0) - 2.828427).abs() < 1e-6);
        assert_eq!(symbol_halfspace(0.0, 3.0), 0.0);
    }

    #[test]
    fn strip_values() {
        let g = unit();
        assert_eq!(symbol_strip(0.0, &g), 0.0);
        let a = symbol_strip(PI, &g);
        assert!((a - 2.0 * PI.powi(3) * PI.tanh()).abs() < 1e-12);
        assert!((a - 61.78).abs() < 5e-3, "a = {a}");
        let deep = ContainerGeometry::new(1.0, 10.0, 10.0).unwrap();
        let a_deep = symbol_strip(PI, &deep);
        assert!(a_deep <= 2.0 * PI.powi(3));
        assert!((a_deep - symbol_halfspace(PI, 0.0)).abs() / a_deep < 1e-12);
        assert!((a_deep - 62.012).abs() < 1e-3);
        // monotone approach from below as the depth grows
        let mut prev = 0.0;
        for d in [0.1, 0.3, 0.6, 1.0, 2.0] {
            let v = symbol_strip(PI, &ContainerGeometry::new(1.0, d, d).unwrap());
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn scaling_examples() {
        assert!(scaling_identity_check(&[(2.0, 3.0)]).unwrap() <= 1e-14);
        assert_eq!(scaling_identity_check(&[(0.0, 2.0)]).unwrap(), 0.0);
        assert!(scaling_identity_check(&[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn strip_table_invariants() {
        let t = SymbolTable::strip(&ContainerGeometry::new(2.0, 1.0, 0.75).unwrap(), 64);
        assert_eq!(t.rate(0), 0.0);
        assert!(t.rates().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn constants_are_stationary() {
        let h0 = HeightField::new(unit(), vec![0.013; 32]).unwrap();
        let h = linear_propagate(&h0, None, 3.7, 0.0).unwrap();
        for v in h.values() {
            assert!((v - 0.013).abs() < 1e-16 * 32.0);
        }
    }

    #[test]
    fn single_mode_decays_by_e_after_one_relaxation_time() {
        let g = unit();
        let eps = 1e-3;
        let h0 = HeightField::cosine_mode(g, 32, 1, eps).unwrap();
        let a1 = symbol_strip(PI, &g);
        let h = linear_propagate(&h0, None, 1.0 / a1, 0.0).unwrap();
        for (v, v0) in h.values().iter().zip(h0.values()) {
            assert!((v - v0 / std::f64::consts::E).abs() < 1e-12 * eps);
        }
    }

    #[test]
    fn modes_decay_independently() {
        let g = unit();
        let n = 32;
        let h0 = HeightField::from_fn(g, n, |x| 1e-3 * (PI * x).cos() + 2e-3 * (3.0 * PI * x).cos())
            .unwrap();
        let t = 0.01;
        let h = linear_propagate(&h0, None, t, 0.0).unwrap();
        let c0 = dct_forward(&h0);
        let c = dct_forward(&h);
        for m in [1usize, 3] {
            let ratio = c.as_slice()[m] / c0.as_slice()[m];
            let expected = (-symbol_strip(g.wavenumber(m), &g) * t).exp();
            assert!((ratio - expected).abs() < 1e-10 * expected.max(1e-300));
        }
    }

    #[test]
    fn forcing_and_shift() {
        let g = unit();
        let n = 8;
        let h0 = HeightField::zeros(g, n).unwrap();
        let mut f = ModeCoefficients::zeros(n);
        f.as_mut_slice()[0] = 1.0;
        f.as_mut_slice()[2] = 0.5;
        // mode 0 without shift integrates linearly
        let h = SymbolTable::strip(&g, n).propagate(&h0, Some(&f), 2.0, 0.0).unwrap();
        let c = dct_forward(&h);
        assert!((c.as_slice()[0] - 2.0).abs() < 1e-13);
        let lambda = symbol_strip(g.wavenumber(2), &g);
        let expected = 0.5 * (1.0 - (-lambda * 2.0).exp()) / lambda;
        assert!((c.as_slice()[2] - expected).abs() < 1e-14);
        // a shift damps mode 0 as well
        let h = SymbolTable::strip(&g, n).propagate(&h0, Some(&f), 2.0, 1.0).unwrap();
        let c = dct_forward(&h);
        assert!((c.as_slice()[0] - (1.0 - (-2.0f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn propagate_rejects_bad_arguments() {
        let h0 = HeightField::zeros(unit(), 8).unwrap();
        assert!(linear_propagate(&h0, None, -1.0, 0.0).is_err());
        assert!(linear_propagate(&h0, None, 1.0, -1.0).is_err());
        let f = ModeCoefficients::zeros(4);
        assert!(linear_propagate(&h0, Some(&f), 1.0, 0.0).is_err());
    }
}
